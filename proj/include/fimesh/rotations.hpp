// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fimesh/trimesh.hpp"

namespace fimesh {

// Per-face linear maps that carry the designated Level-1 face onto each of
// the 80 Level-1 faces, plus the focused-mesh vertex positions pushed
// through every map.
//
// maps[i] = F_i * F_0^{-1}, where F_0 / F_i are 3x3 matrices whose columns
// are the designated / i-th face corners in stored vertex order. The maps
// are linear-exact at corners but not orthogonal in general, so transformed
// positions are re-normalized onto the sphere; orthogonality_deviation
// reports how far each map is from a true rotation.
struct RotationTable {
  int focused_level = 0;
  std::vector<Eigen::Matrix3d> maps;               // 80
  std::vector<Eigen::Matrix3Xd> rotated_vertices;  // 80 x (3 x V), unit columns
  int designated = -1;

  std::int64_t face_count() const { return static_cast<std::int64_t>(maps.size()); }
  std::int64_t vertex_count() const {
    return rotated_vertices.empty() ? 0 : rotated_vertices[0].cols();
  }
};

// level1 must be the Full Level-1 mesh and focused a Focused mesh built on
// the same base (bit-identical Level-1 vertex prefix).
RotationTable build_rotation_table(const TriMesh& level1, const TriMesh& focused);

// normalize(map * v) per column.
Eigen::Matrix3Xd rotate_positions(const Eigen::Matrix3d& map,
                                  const Eigen::Matrix3Xd& positions);

double orthogonality_deviation(const Eigen::Matrix3d& map);

void save_rotation_table(const std::filesystem::path& path, const RotationTable& t);
RotationTable load_rotation_table(const std::filesystem::path& path);

}  // namespace fimesh
