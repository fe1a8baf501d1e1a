// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/rotations.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fimesh/common.hpp"

namespace fimesh {

namespace {
constexpr char kRotMagic[9] = "FIROT001";

Eigen::Matrix3d face_corners(const TriMesh& m, int face) {
  Eigen::Matrix3d f;
  for (int j = 0; j < 3; ++j) f.col(j) = m.vertices.col(m.faces(j, face));
  return f;
}
}  // namespace

RotationTable build_rotation_table(const TriMesh& level1, const TriMesh& focused) {
  if (level1.kind != MeshKind::Full || level1.level != 1)
    throw ConfigError("rotation table needs the Full Level-1 mesh");
  if (focused.kind != MeshKind::Focused)
    throw ConfigError("rotation table needs a Focused mesh");
  if (std::memcmp(level1.vertices.data(), focused.vertices.data(),
                  sizeof(double) * 3 * level1.vertex_count()) != 0)
    throw ConfigError("focused mesh was not built on this Level-1 base");

  RotationTable t;
  t.focused_level = focused.level;
  t.designated = designated_face(level1);

  const Eigen::Matrix3d f0 = face_corners(level1, t.designated);
  const double det = f0.determinant();
  if (std::abs(det) < 1e-12)
    throw NumericError("designated face corners are singular");
  const Eigen::Matrix3d f0_inv = f0.inverse();

  t.maps.resize(80);
  t.rotated_vertices.resize(80);
  for (int i = 0; i < 80; ++i) {
    t.maps[i] = face_corners(level1, i) * f0_inv;
    t.rotated_vertices[i] = rotate_positions(t.maps[i], focused.vertices);
  }
  return t;
}

Eigen::Matrix3Xd rotate_positions(const Eigen::Matrix3d& map,
                                  const Eigen::Matrix3Xd& positions) {
  Eigen::Matrix3Xd out = map * positions;
  for (std::int64_t c = 0; c < out.cols(); ++c) out.col(c).normalize();
  return out;
}

double orthogonality_deviation(const Eigen::Matrix3d& map) {
  return (map.transpose() * map - Eigen::Matrix3d::Identity()).norm();
}

void save_rotation_table(const std::filesystem::path& path, const RotationTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MissingInputError("cannot open for writing: " + path.string());
  BinaryWriter w(os);
  w.magic(kRotMagic);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.focused_level));
  for (const auto& m : t.maps) w.bytes(m.data(), sizeof(double) * 9);
  for (const auto& r : t.rotated_vertices)
    w.bytes(r.data(), sizeof(double) * 3 * r.cols());
}

RotationTable load_rotation_table(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open rotation table: " + path.string());
  BinaryReader r(is);
  r.expect_magic(kRotMagic);
  RotationTable t;
  t.focused_level = static_cast<int>(r.pod<std::uint32_t>());
  if (t.focused_level < 1 || t.focused_level > 24)
    throw DataError("implausible focused level");
  const std::int64_t nv = focused_vertex_count(t.focused_level);
  t.maps.resize(80);
  t.rotated_vertices.resize(80);
  for (auto& m : t.maps) r.bytes(m.data(), sizeof(double) * 9);
  for (auto& p : t.rotated_vertices) {
    p.resize(3, nv);
    r.bytes(p.data(), sizeof(double) * 3 * nv);
  }
  t.designated = designated_face(canonical_level1());
  return t;
}

}  // namespace fimesh
