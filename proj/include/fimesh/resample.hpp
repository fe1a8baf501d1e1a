// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "fimesh/equirect.hpp"
#include "fimesh/rotations.hpp"
#include "fimesh/trimesh.hpp"

namespace fimesh {

// Nearest-pixel values at arbitrary unit directions.
Eigen::MatrixXd sample_positions(const EquirectImage& img,
                                 const Eigen::Matrix3Xd& positions);

// Per-face mesh signal: looks up the nearest pixel at every rotated vertex
// position of `face`. `mesh` may be any focused level at or below the
// table's level; its vertices are the corresponding prefix of the table's.
MeshSignal sample_to_mesh(const EquirectImage& img, const RotationTable& table,
                          int face, std::shared_ptr<const TriMesh> mesh);

// Integer-lattice view of a focused mesh's refined patch. Corner k of the
// designated face sits at lattice coordinate (0,0) / (n,0) / (0,n); every
// midpoint vertex is the exact coordinate average of its parents, so the
// map is combinatorial, not geometric. Supports nearest-vertex queries for
// directions inside (or near) the designated face.
class PatchLattice {
 public:
  static PatchLattice build(std::shared_ptr<const TriMesh> focused);

  // Nearest patch vertex to the unit direction q: barycentric seed followed
  // by greedy descent on chord distance over the 2-ring lattice
  // neighborhood.
  std::int64_t nearest_vertex(const Eigen::Vector3d& q) const;

  // Brute-force argmin over all patch vertices (test oracle).
  std::int64_t nearest_vertex_exhaustive(const Eigen::Vector3d& q) const;

  int n() const { return n_; }
  std::int64_t vertex_at(int i, int j) const {
    return grid_[static_cast<std::size_t>(i) * (n_ + 1) + j];
  }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  int n_ = 0;
  std::vector<std::int64_t> grid_;  // (n+1) x (n+1), -1 where j > n - i
  Eigen::Matrix3d corner_inv_;
  std::vector<std::int64_t> patch_;
};

// Paints the requested Level-1 faces; every other pixel stays black. The
// signal must live on the table's focused mesh.
EquirectImage render_to_equirect(const MeshSignal& signal,
                                 const RotationTable& table,
                                 const std::vector<int>& faces, int width);

std::vector<int> all_faces();

}  // namespace fimesh
