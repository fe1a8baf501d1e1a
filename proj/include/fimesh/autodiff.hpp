// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "fimesh/operators.hpp"

namespace fimesh::ad {

// Logical tensor shape: batch x channels x vertices. Values are stored flat
// as [batch][channel][vertex], i.e. each batch element is a row-major
// channels x vertices block.
struct Shape {
  std::int64_t batch = 1;
  std::int64_t channels = 1;
  std::int64_t vertices = 1;

  std::int64_t size() const { return batch * channels * vertices; }
  bool operator==(const Shape&) const = default;
};

struct MeanPair {
  std::int64_t a = 0;     // source column (vertex) in group signal
  std::int64_t b = 0;     // second source column
  std::int64_t dest = 0;  // destination column in the output
};

// Mutable batch-norm running statistics; owned by the caller (parameter
// store), updated in-place by training-mode batchnorm nodes.
struct BatchNormState {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

// Eagerly evaluated reverse-mode tape over f64 tensors. Nodes are
// append-only; backward() walks them in reverse insertion order once.
class Tape {
 public:
  using NodeId = std::int32_t;

  NodeId input(const Shape& shape, Eigen::VectorXd values, bool requires_grad);
  NodeId constant(const Shape& shape, Eigen::VectorXd values);

  // weights {1, c_out, c_in} times x {b, c_in, v} -> {b, c_out, v}
  NodeId matmul(NodeId weights, NodeId x);
  // per-channel sparse operator in vertex space; op must outlive the tape
  NodeId sparse_matvec(const SparseOp* op, NodeId x);
  NodeId add(NodeId a, NodeId b);
  // bias {1, c, 1} broadcast over batch and vertices
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId scale(NodeId x, double alpha);
  NodeId relu(NodeId x);  // subgradient 0 at 0
  // batch norm over (batch, vertices) per channel; gamma/beta {1, c, 1}.
  // Training mode uses biased batch variance for normalization and updates
  // `state` with the unbiased variance; eval mode reads `state`.
  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState* state,
                   bool training, double eps, double momentum);
  // select channels: rows[k] gives the source channel of output channel k
  NodeId gather_rows(NodeId x, std::shared_ptr<const std::vector<std::int64_t>> rows);
  // out[:, :, dest] = (x[:, :, a] + x[:, :, b]) / 2 per pair; untouched
  // destination columns are zero
  NodeId scatter_mean_pairs(NodeId x,
                            std::shared_ptr<const std::vector<MeanPair>> pairs,
                            std::int64_t vertices_out);
  // concatenate along the vertex axis
  NodeId concat_cols(NodeId a, NodeId b);
  // zero-pad new trailing vertex columns
  NodeId pad_vertices(NodeId x, std::int64_t vertices_out);
  // mean over every element of (a - b)^2 -> {1,1,1}
  NodeId mse(NodeId a, NodeId b);

  void backward(NodeId loss);

  const Shape& shape(NodeId id) const { return nodes_[id].shape; }
  const Eigen::VectorXd& value(NodeId id) const { return nodes_[id].value; }
  // valid after backward(); zero for nodes the loss does not depend on
  const Eigen::VectorXd& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Views of a node's value/gradient as a channels x vertices matrix for
  // one batch element.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
  slice(NodeId id, std::int64_t batch) const;

 private:
  struct Node {
    Shape shape;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    std::function<void(Tape&, NodeId)> backward;
  };

  NodeId emplace(Shape shape, Eigen::VectorXd value, std::vector<NodeId> inputs,
                 std::function<void(Tape&, NodeId)> backward);
  Eigen::VectorXd& grad_buffer(NodeId id);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  friend struct TapeTestAccess;
};

}  // namespace fimesh::ad
