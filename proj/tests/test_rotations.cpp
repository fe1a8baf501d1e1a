// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/rotations.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "fimesh/common.hpp"
#include "fimesh/rng.hpp"
#include "fimesh/trimesh.hpp"

using namespace fimesh;

namespace {

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  double a, b, c, d;
  normal_pair(rng, a, b);
  normal_pair(rng, c, d);
  Eigen::Vector3d v(a, b, c);
  while (v.norm() < 1e-6) {
    normal_pair(rng, a, b);
    v = {a, b, v.z()};
  }
  return v.normalized();
}

}  // namespace

TEST_CASE("rotation maps are corner-exact and orientation-preserving") {
  const TriMesh& l1 = canonical_level1();
  const TriMesh foc = make_focused(4);
  const RotationTable t = build_rotation_table(l1, foc);

  REQUIRE(t.face_count() == 80);
  REQUIRE(t.vertex_count() == foc.vertex_count());

  const int d = t.designated;
  CHECK((t.maps[d] - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::Matrix3d f0;
  for (int j = 0; j < 3; ++j) f0.col(j) = l1.vertices.col(l1.faces(j, d));

  for (int i = 0; i < 80; ++i) {
    CHECK(t.maps[i].determinant() > 0.0);
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d want = l1.vertices.col(l1.faces(j, i));
      CHECK((t.maps[i] * f0.col(j) - want).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(std::isfinite(orthogonality_deviation(t.maps[i])));
  }
  CHECK(orthogonality_deviation(t.maps[d]) < 1e-12);
}

TEST_CASE("rotated vertices are unit and round-trip through the inverse map") {
  const TriMesh foc = make_focused(4);
  const RotationTable t = build_rotation_table(canonical_level1(), foc);
  for (int i = 0; i < 80; ++i) {
    const Eigen::Matrix3d inv = t.maps[i].inverse();
    for (std::int64_t v = 0; v < foc.vertex_count(); v += 7) {
      const Eigen::Vector3d r = t.rotated_vertices[i].col(v);
      CHECK(std::abs(r.norm() - 1.0) < 1e-12);
      const Eigen::Vector3d back = (inv * r).normalized();
      CHECK((back - foc.vertices.col(v)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("face_of_point is total and hits faces proportionally to area") {
  const TriMesh& l1 = canonical_level1();
  CHECK(face_of_point(l1, Eigen::Vector3d(1, 0, 0)) == designated_face(l1));

  // a corner vertex belongs to the smallest incident face index
  for (std::int64_t v = 0; v < l1.vertex_count(); ++v) {
    const Eigen::Vector3d p = l1.vertices.col(v);
    const int got = face_of_point(l1, p);
    int smallest = -1;
    for (std::int64_t f = 0; f < 80 && smallest < 0; ++f)
      for (int j = 0; j < 3; ++j)
        if (l1.faces(j, f) == static_cast<std::uint32_t>(v)) {
          smallest = static_cast<int>(f);
          break;
        }
    CHECK(got == smallest);
  }

  // spherical-area oracle per face
  std::vector<double> area(80);
  for (int f = 0; f < 80; ++f)
    area[f] = spherical_triangle_area(l1.vertices.col(l1.faces(0, f)),
                                      l1.vertices.col(l1.faces(1, f)),
                                      l1.vertices.col(l1.faces(2, f)));

  auto rng = make_stream(2026, "test/face_mc");
  const int n = 1000000;
  std::vector<int> hits(80, 0);
  for (int i = 0; i < n; ++i) {
    const int f = face_of_point(l1, random_unit(rng));
    REQUIRE(f >= 0);
    REQUIRE(f < 80);
    ++hits[f];
  }
  const double total_area = 4.0 * 3.14159265358979323846;
  for (int f = 0; f < 80; ++f) {
    const double expected = static_cast<double>(n) * area[f] / total_area;
    CHECK(std::abs(hits[f] - expected) / expected < 0.05);
  }
}

TEST_CASE("rotation tables round-trip through disk") {
  const TriMesh foc = make_focused(3);
  const RotationTable t = build_rotation_table(canonical_level1(), foc);
  const auto path = std::filesystem::temp_directory_path() / "fimesh_rot_test.firot";
  save_rotation_table(path, t);
  const RotationTable back = load_rotation_table(path);
  CHECK(back.focused_level == t.focused_level);
  CHECK(back.designated == t.designated);
  for (int i = 0; i < 80; ++i) {
    CHECK((back.maps[i] - t.maps[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.rotated_vertices[i] - t.rotated_vertices[i])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("rotation table rejects mismatched meshes") {
  TriMesh foc = make_focused(2);
  CHECK_THROWS_AS(build_rotation_table(foc, foc), ConfigError);
  TriMesh shifted = foc;
  shifted.vertices.col(0) = Eigen::Vector3d(0, 0, 1);
  CHECK_THROWS_AS(build_rotation_table(canonical_level1(),
                                       TriMesh{2, MeshKind::Full,
                                               shifted.vertices, shifted.faces,
                                               shifted.parent_edge, 42}),
                  ConfigError);
}
