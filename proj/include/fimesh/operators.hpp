// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <memory>

#include "fimesh/trimesh.hpp"

namespace fimesh {

// How per-face gradients are averaged onto vertices.
enum class GradientWeighting : std::uint8_t { FaceArea = 0, Uniform = 1 };

struct SparseOp {
  Eigen::SparseMatrix<double> matrix;  // compressed, no stored zeros
  bool symmetric = false;

  std::int64_t rows() const { return matrix.rows(); }
  std::int64_t cols() const { return matrix.cols(); }
};

// The four per-vertex linear operators a mesh convolution consumes:
// identity, north-component gradient, east-component gradient, and the
// mass-normalized cotangent Laplacian (negative semi-definite convention:
// positive off-diagonal weights, non-positive diagonal).
struct OperatorSet {
  SparseOp identity;
  SparseOp grad_lat;
  SparseOp grad_lng;
  SparseOp laplacian;
  std::shared_ptr<const TriMesh> mesh;
  std::uint64_t source_hash = 0;
};

struct OperatorOptions {
  GradientWeighting weighting = GradientWeighting::FaceArea;
  // planar face area below this is treated as degenerate geometry
  double degenerate_area = 1e-15;
};

// Assembles all four operators in one pass over the faces. Vertices within
// 1e-12 of either pole get all-zero gradient rows; the subdivided meshes
// carry exact pole vertices from level 1 on, so those rows are always hit.
OperatorSet build_operators(std::shared_ptr<const TriMesh> mesh,
                            const OperatorOptions& options = {});

// y = A x applied per channel; signal rows are channels, columns vertices.
Eigen::MatrixXd apply(const SparseOp& op, const Eigen::MatrixXd& signal);
MeshSignal apply(const SparseOp& op, const MeshSignal& signal);

// Unit tangent frame used by the gradient projections: north is the
// direction of increasing latitude, east of increasing longitude. Both are
// zero vectors at the poles.
Eigen::Vector3d local_north(const Eigen::Vector3d& v);
Eigen::Vector3d local_east(const Eigen::Vector3d& v);

// Barycentric (one-ring area / 3) vertex masses used to normalize the
// Laplacian.
Eigen::VectorXd vertex_masses(const TriMesh& mesh);

void save_operator_set(const std::filesystem::path& path, const OperatorSet& ops);

// Requires the same mesh the file was built from; the stored hash is
// checked against mesh_hash(*mesh).
OperatorSet load_operator_set(const std::filesystem::path& path,
                              std::shared_ptr<const TriMesh> mesh);

}  // namespace fimesh
