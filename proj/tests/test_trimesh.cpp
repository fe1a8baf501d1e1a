// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/trimesh.hpp"

#include <doctest.h>

#include "fimesh/common.hpp"

#include <cstring>
#include <set>
#include <sstream>

using namespace fimesh;

namespace {

std::size_t count_edges(const TriMesh& m) {
  std::set<std::uint64_t> keys;
  for (std::int64_t f = 0; f < m.face_count(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const std::uint64_t a = m.faces(e, f);
      const std::uint64_t b = m.faces((e + 1) % 3, f);
      keys.insert((std::min(a, b) << 32) | std::max(a, b));
    }
  }
  return keys.size();
}

bool faces_ccw(const TriMesh& m) {
  for (std::int64_t f = 0; f < m.face_count(); ++f) {
    const Eigen::Vector3d a = m.vertices.col(m.faces(0, f));
    const Eigen::Vector3d b = m.vertices.col(m.faces(1, f));
    const Eigen::Vector3d c = m.vertices.col(m.faces(2, f));
    if (a.cross(b).dot(c) <= 0.0) return false;
  }
  return true;
}

double total_area(const TriMesh& m) {
  double s = 0.0;
  for (std::int64_t f = 0; f < m.face_count(); ++f)
    s += spherical_triangle_area(m.vertices.col(m.faces(0, f)),
                                 m.vertices.col(m.faces(1, f)),
                                 m.vertices.col(m.faces(2, f)));
  return s;
}

}  // namespace

TEST_CASE("icosahedron is a unit-sphere manifold") {
  const TriMesh m = make_icosahedron();
  CHECK(m.vertex_count() == 12);
  CHECK(m.face_count() == 20);
  CHECK(count_edges(m) == 30);
  for (std::int64_t v = 0; v < 12; ++v)
    CHECK(m.vertices.col(v).norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(faces_ccw(m));

  // every directed edge appears exactly once (closed 2-manifold)
  std::set<std::uint64_t> directed;
  for (std::int64_t f = 0; f < 20; ++f)
    for (int e = 0; e < 3; ++e) {
      const std::uint64_t a = m.faces(e, f);
      const std::uint64_t b = m.faces((e + 1) % 3, f);
      CHECK(directed.insert((a << 32) | b).second);
    }
  CHECK(directed.size() == 60);

  // all edges have the same arc length
  double len = -1.0;
  for (std::int64_t f = 0; f < 20; ++f)
    for (int e = 0; e < 3; ++e) {
      const double d = (m.vertices.col(m.faces(e, f)) -
                        m.vertices.col(m.faces((e + 1) % 3, f)))
                           .norm();
      if (len < 0) len = d;
      CHECK(d == doctest::Approx(len).epsilon(1e-12));
    }
}

TEST_CASE("full subdivision matches the V/E/F recurrence") {
  // oracle: V' = V + E, E' = 2E + 3F, F' = 4F, independently of the
  // closed-form counts
  std::int64_t v = 12, e = 30, f = 20;
  TriMesh m = make_icosahedron();
  for (int level = 1; level <= 4; ++level) {
    const std::int64_t v2 = v + e;
    const std::int64_t e2 = 2 * e + 3 * f;
    const std::int64_t f2 = 4 * f;
    m = subdivide(m);
    CHECK(m.level == level);
    CHECK(m.vertex_count() == v2);
    CHECK(m.face_count() == f2);
    CHECK(count_edges(m) == static_cast<std::size_t>(e2));
    CHECK(m.vertex_count() == full_vertex_count(level));
    CHECK(m.face_count() == full_face_count(level));
    v = v2;
    e = e2;
    f = f2;
  }
  CHECK(faces_ccw(m));
  CHECK(full_vertex_count(5) == 10242);
  CHECK(full_vertex_count(6) == 40962);
  CHECK(full_vertex_count(7) == 163842);
  CHECK(full_vertex_count(8) == 655362);
  CHECK(full_vertex_count(9) == 2621442);
}

TEST_CASE("subdivision keeps the coarse vertices as a bit-exact prefix") {
  const TriMesh l1 = subdivide(make_icosahedron());
  const TriMesh l2 = subdivide(l1);
  CHECK(l2.coarse_vertex_count == l1.vertex_count());
  CHECK(std::memcmp(l2.vertices.data(), l1.vertices.data(),
                    sizeof(double) * 3 * l1.vertex_count()) == 0);

  // each midpoint is exactly the normalized parent sum
  for (std::int64_t i = l2.coarse_vertex_count; i < l2.vertex_count(); ++i) {
    const auto a = l2.parent_edge(0, i);
    const auto b = l2.parent_edge(1, i);
    CHECK(a < b);
    const Eigen::Vector3d mid =
        (l2.vertices.col(a) + l2.vertices.col(b)).normalized();
    CHECK(std::memcmp(mid.data(), l2.vertices.col(i).data(),
                      sizeof(double) * 3) == 0);
  }
  for (std::int64_t i = 0; i < l2.coarse_vertex_count; ++i) {
    // prefix rows keep whatever parents they had one level down
    if (i < 12) CHECK(l2.parent_edge(0, i) == kNoParent);
  }
}

TEST_CASE("designated face contains the zero-latitude zero-longitude axis") {
  const TriMesh& l1 = canonical_level1();
  const int d = designated_face(l1);
  const Eigen::Vector3d p(1.0, 0.0, 0.0);
  const Eigen::Vector3d a = l1.vertices.col(l1.faces(0, d));
  const Eigen::Vector3d b = l1.vertices.col(l1.faces(1, d));
  const Eigen::Vector3d c = l1.vertices.col(l1.faces(2, d));
  CHECK(a.cross(b).dot(p) >= -1e-12);
  CHECK(b.cross(c).dot(p) >= -1e-12);
  CHECK(c.cross(a).dot(p) >= -1e-12);

  // lowest containing index wins
  for (int f = 0; f < d; ++f) {
    const Eigen::Vector3d fa = l1.vertices.col(l1.faces(0, f));
    const Eigen::Vector3d fb = l1.vertices.col(l1.faces(1, f));
    const Eigen::Vector3d fc = l1.vertices.col(l1.faces(2, f));
    const bool inside = fa.cross(fb).dot(p) >= -1e-12 &&
                        fb.cross(fc).dot(p) >= -1e-12 &&
                        fc.cross(fa).dot(p) >= -1e-12;
    CHECK_FALSE(inside);
  }
}

TEST_CASE("focused meshes have the expected counts") {
  CHECK(focused_vertex_count(6) == 600);
  CHECK(focused_vertex_count(7) == 2184);
  CHECK(focused_vertex_count(8) == 8424);
  CHECK(focused_vertex_count(9) == 33192);

  const TriMesh f1 = make_focused(1);
  CHECK(f1.vertex_count() == 42);
  CHECK(f1.face_count() == 80);
  CHECK(f1.kind == MeshKind::Focused);

  for (int k = 2; k <= 7; ++k) {
    const TriMesh fk = make_focused(k);
    CHECK(fk.level == k);
    CHECK(fk.vertex_count() == focused_vertex_count(k));
    CHECK(fk.face_count() == focused_face_count(k));
    CHECK(faces_ccw(fk));
  }
}

TEST_CASE("focused leaf faces tile the sphere") {
  CHECK(total_area(make_full(3)) == doctest::Approx(4.0 * 3.14159265358979323846).epsilon(1e-12));
  CHECK(total_area(make_focused(6)) == doctest::Approx(4.0 * 3.14159265358979323846).epsilon(1e-12));
}

TEST_CASE("focused levels are prefixes of each other") {
  const TriMesh f4 = make_focused(4);
  const TriMesh f6 = make_focused(6);
  CHECK(std::memcmp(f6.vertices.data(), f4.vertices.data(),
                    sizeof(double) * 3 * f4.vertex_count()) == 0);
  CHECK(std::memcmp(f6.parent_edge.data(), f4.parent_edge.data(),
                    sizeof(std::uint32_t) * 2 * f4.vertex_count()) == 0);
}

TEST_CASE("refined patch has lattice-triangle vertex counts") {
  CHECK(refined_face_vertex_ids(make_focused(1)).size() == 3);
  CHECK(refined_face_vertex_ids(make_focused(2)).size() == 6);
  for (int k = 3; k <= 6; ++k) {
    const std::int64_t n = std::int64_t{1} << (k - 1);
    const auto ids = refined_face_vertex_ids(make_focused(k));
    CHECK(ids.size() == static_cast<std::size_t>((n + 1) * (n + 2) / 2));
  }
  const TriMesh f6 = make_focused(6);
  CHECK(refined_face_ids(f6).size() == 1024);  // 4^5
}

TEST_CASE("focused patch vertices coincide with full-mesh vertices") {
  const TriMesh full = make_full(3);
  const TriMesh foc = make_focused(3);
  for (std::uint32_t id : refined_face_vertex_ids(foc)) {
    const Eigen::Vector3d p = foc.vertices.col(id);
    double best = 1e9;
    for (std::int64_t v = 0; v < full.vertex_count(); ++v)
      best = std::min(best, (full.vertices.col(v) - p).norm());
    CHECK(best < 1e-14);
  }
}

TEST_CASE("equivalent resolution reproduces the planar ladder") {
  const auto r6 = equivalent_resolution(40962);
  CHECK(r6.width == 360);
  CHECK(r6.height == 180);
  CHECK(r6.raw_width == doctest::Approx(358.74).epsilon(1e-3));
  CHECK(equivalent_resolution(163842).width == 720);
  CHECK(equivalent_resolution(163842).height == 360);
  CHECK(equivalent_resolution(655362).width == 1440);
  CHECK(equivalent_resolution(2621442).width == 2880);
  CHECK(equivalent_resolution(2621442).height == 1440);

  CHECK(equivalent_resolution(1).width == 2);
  CHECK(equivalent_resolution(1).height == 1);
  CHECK(equivalent_resolution(12).width == 6);

  // off-ladder counts round to the nearest even width
  CHECK(equivalent_resolution(43000).width == 368);
  CHECK_THROWS_AS(equivalent_resolution(0), ConfigError);
}

TEST_CASE("mesh serialization round-trips bitwise") {
  const TriMesh m = make_focused(4);
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_mesh(ss, m);
  const TriMesh r = read_mesh(ss);
  CHECK(r.level == m.level);
  CHECK(r.kind == m.kind);
  CHECK(r.coarse_vertex_count == m.coarse_vertex_count);
  REQUIRE(r.vertex_count() == m.vertex_count());
  REQUIRE(r.face_count() == m.face_count());
  CHECK(std::memcmp(r.vertices.data(), m.vertices.data(),
                    sizeof(double) * 3 * m.vertex_count()) == 0);
  CHECK(std::memcmp(r.faces.data(), m.faces.data(),
                    sizeof(std::uint32_t) * 3 * m.face_count()) == 0);
  CHECK(std::memcmp(r.parent_edge.data(), m.parent_edge.data(),
                    sizeof(std::uint32_t) * 2 * m.vertex_count()) == 0);
  CHECK(mesh_hash(r) == mesh_hash(m));

  std::string bytes = ss.str();
  SUBCASE("truncated file is rejected") {
    std::stringstream cut(bytes.substr(0, bytes.size() / 2),
                          std::ios::in | std::ios::binary);
    CHECK_THROWS_AS(read_mesh(cut), DataError);
  }
  SUBCASE("bad magic is rejected") {
    bytes[0] = 'X';
    std::stringstream bad(bytes, std::ios::in | std::ios::binary);
    CHECK_THROWS_AS(read_mesh(bad), DataError);
  }
}

TEST_CASE("constructor preconditions") {
  CHECK_THROWS_AS(make_focused(0), ConfigError);
  CHECK_THROWS_AS(make_full(-1), ConfigError);
  CHECK_THROWS_AS(subdivide(make_focused(2)), ConfigError);
}

TEST_CASE("latitude and longitude round-trip through unit vectors") {
  const double lat = 0.6, lon = -2.1;
  const Eigen::Vector3d p = latlon_to_unit(lat, lon);
  CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-15));
  double lat2, lon2;
  unit_to_latlon(p, lat2, lon2);
  CHECK(lat2 == doctest::Approx(lat).epsilon(1e-12));
  CHECK(lon2 == doctest::Approx(lon).epsilon(1e-12));
  CHECK(latlon_to_unit(0.0, 0.0).isApprox(Eigen::Vector3d(1, 0, 0), 1e-15));
}
