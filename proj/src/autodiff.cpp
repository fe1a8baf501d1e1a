// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/autodiff.hpp"

#include <cmath>

#include "fimesh/common.hpp"

namespace fimesh::ad {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapConstRow = Eigen::Map<const RowMat>;
}  // namespace

void Tape::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ConfigError("invalid tape node id");
}

Tape::NodeId Tape::emplace(Shape shape, Eigen::VectorXd value,
                           std::vector<NodeId> inputs,
                           std::function<void(Tape&, NodeId)> backward) {
  if (value.size() != shape.size())
    throw ConfigError("tape node value does not match its shape");
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  for (NodeId in : n.inputs)
    if (nodes_[in].requires_grad) n.requires_grad = true;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Eigen::VectorXd& Tape::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Eigen::VectorXd::Zero(n.shape.size());
  return n.grad;
}

const Eigen::VectorXd& Tape::grad(NodeId id) const {
  check(id);
  if (!ran_backward_) throw ConfigError("grad() before backward()");
  if (!nodes_[id].requires_grad)
    throw ConfigError("node does not track gradients");
  return nodes_[id].grad;
}

Eigen::Map<const RowMat> Tape::slice(NodeId id, std::int64_t batch) const {
  check(id);
  const Node& n = nodes_[id];
  return MapConstRow(n.value.data() + batch * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
}

Tape::NodeId Tape::input(const Shape& shape, Eigen::VectorXd values,
                         bool requires_grad) {
  NodeId id = emplace(shape, std::move(values), {}, nullptr);
  nodes_[id].requires_grad = requires_grad;
  return id;
}

Tape::NodeId Tape::constant(const Shape& shape, Eigen::VectorXd values) {
  return input(shape, std::move(values), false);
}

Tape::NodeId Tape::matmul(NodeId weights, NodeId x) {
  check(weights);
  check(x);
  const Shape& ws = nodes_[weights].shape;
  const Shape& xs = nodes_[x].shape;
  if (ws.batch != 1 || ws.vertices != xs.channels)
    throw ConfigError("matmul: weights must be {1, c_out, c_in} with c_in = input channels");
  const Shape out{xs.batch, ws.channels, xs.vertices};
  Eigen::VectorXd val(out.size());
  MapConstRow w(nodes_[weights].value.data(), ws.channels, ws.vertices);
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapConstRow xb(nodes_[x].value.data() + b * xs.channels * xs.vertices,
                   xs.channels, xs.vertices);
    MapRow yb(val.data() + b * out.channels * out.vertices, out.channels,
              out.vertices);
    yb.noalias() = w * xb;
  }
  return emplace(out, std::move(val), {weights, x}, [](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId weights = n.inputs[0], x = n.inputs[1];
    const Shape& ws = t.nodes_[weights].shape;
    const Shape& xs = t.nodes_[x].shape;
    MapConstRow w(t.nodes_[weights].value.data(), ws.channels, ws.vertices);
    for (std::int64_t b = 0; b < xs.batch; ++b) {
      MapConstRow gy(n.grad.data() + b * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
      MapConstRow xb(t.nodes_[x].value.data() + b * xs.channels * xs.vertices,
                     xs.channels, xs.vertices);
      if (t.nodes_[weights].requires_grad) {
        MapRow gw(t.grad_buffer(weights).data(), ws.channels, ws.vertices);
        gw.noalias() += gy * xb.transpose();
      }
      if (t.nodes_[x].requires_grad) {
        MapRow gx(t.grad_buffer(x).data() + b * xs.channels * xs.vertices,
                  xs.channels, xs.vertices);
        gx.noalias() += w.transpose() * gy;
      }
    }
  });
}

Tape::NodeId Tape::sparse_matvec(const SparseOp* op, NodeId x) {
  check(x);
  if (!op) throw ConfigError("sparse_matvec: null operator");
  const Shape& xs = nodes_[x].shape;
  if (op->rows() != xs.vertices || op->cols() != xs.vertices)
    throw ConfigError("sparse_matvec: operator size does not match vertices");
  Eigen::VectorXd val(xs.size());
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapConstRow xb(nodes_[x].value.data() + b * xs.channels * xs.vertices,
                   xs.channels, xs.vertices);
    MapRow yb(val.data() + b * xs.channels * xs.vertices, xs.channels,
              xs.vertices);
    yb.noalias() = xb * op->matrix.transpose();
  }
  return emplace(xs, std::move(val), {x}, [op](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0];
    const Shape& xs = t.nodes_[x].shape;
    for (std::int64_t b = 0; b < xs.batch; ++b) {
      MapConstRow gy(n.grad.data() + b * xs.channels * xs.vertices, xs.channels,
                     xs.vertices);
      MapRow gx(t.grad_buffer(x).data() + b * xs.channels * xs.vertices,
                xs.channels, xs.vertices);
      gx.noalias() += gy * op->matrix;
    }
  });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (!(nodes_[a].shape == nodes_[b].shape))
    throw ConfigError("add: shape mismatch");
  Eigen::VectorXd val = nodes_[a].value + nodes_[b].value;
  return emplace(nodes_[a].shape, std::move(val), {a, b},
                 [](Tape& t, NodeId id) {
                   const Node& n = t.nodes_[id];
                   for (NodeId in : n.inputs)
                     if (t.nodes_[in].requires_grad)
                       t.grad_buffer(in) += n.grad;
                 });
}

Tape::NodeId Tape::add_bias(NodeId x, NodeId bias) {
  check(x);
  check(bias);
  const Shape& xs = nodes_[x].shape;
  const Shape& bs = nodes_[bias].shape;
  if (bs.batch != 1 || bs.vertices != 1 || bs.channels != xs.channels)
    throw ConfigError("add_bias: bias must be {1, channels, 1}");
  Eigen::VectorXd val = nodes_[x].value;
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapRow yb(val.data() + b * xs.channels * xs.vertices, xs.channels,
              xs.vertices);
    yb.colwise() += Eigen::Map<const Eigen::VectorXd>(
        nodes_[bias].value.data(), xs.channels);
  }
  return emplace(xs, std::move(val), {x, bias}, [](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0], bias = n.inputs[1];
    const Shape& xs = t.nodes_[x].shape;
    if (t.nodes_[x].requires_grad) t.grad_buffer(x) += n.grad;
    if (t.nodes_[bias].requires_grad) {
      Eigen::Map<Eigen::VectorXd> gb(t.grad_buffer(bias).data(), xs.channels);
      for (std::int64_t b = 0; b < xs.batch; ++b) {
        MapConstRow gy(n.grad.data() + b * xs.channels * xs.vertices,
                       xs.channels, xs.vertices);
        gb += gy.rowwise().sum();
      }
    }
  });
}

Tape::NodeId Tape::scale(NodeId x, double alpha) {
  check(x);
  Eigen::VectorXd val = alpha * nodes_[x].value;
  return emplace(nodes_[x].shape, std::move(val), {x},
                 [alpha](Tape& t, NodeId id) {
                   const Node& n = t.nodes_[id];
                   if (t.nodes_[n.inputs[0]].requires_grad)
                     t.grad_buffer(n.inputs[0]) += alpha * n.grad;
                 });
}

Tape::NodeId Tape::relu(NodeId x) {
  check(x);
  Eigen::VectorXd val = nodes_[x].value.cwiseMax(0.0);
  return emplace(nodes_[x].shape, std::move(val), {x}, [](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0];
    if (!t.nodes_[x].requires_grad) return;
    Eigen::VectorXd& gx = t.grad_buffer(x);
    const Eigen::VectorXd& xv = t.nodes_[x].value;
    for (std::int64_t i = 0; i < gx.size(); ++i)
      if (xv[i] > 0.0) gx[i] += n.grad[i];
  });
}

Tape::NodeId Tape::batchnorm(NodeId x, NodeId gamma, NodeId beta,
                             BatchNormState* state, bool training, double eps,
                             double momentum) {
  check(x);
  check(gamma);
  check(beta);
  if (!state) throw ConfigError("batchnorm: null state");
  const Shape& xs = nodes_[x].shape;
  const std::int64_t c = xs.channels;
  if (nodes_[gamma].shape.size() != c || nodes_[beta].shape.size() != c ||
      state->running_mean.size() != c || state->running_var.size() != c)
    throw ConfigError("batchnorm: per-channel parameter size mismatch");

  const std::int64_t n = xs.batch * xs.vertices;
  Eigen::VectorXd mean(c), var(c);
  if (training) {
    mean.setZero();
    var.setZero();
    for (std::int64_t b = 0; b < xs.batch; ++b)
      mean += slice(x, b).rowwise().sum();
    mean /= static_cast<double>(n);
    for (std::int64_t b = 0; b < xs.batch; ++b)
      var += (slice(x, b).colwise() - mean).array().square().matrix().rowwise().sum();
    var /= static_cast<double>(n);
    state->running_mean = (1.0 - momentum) * state->running_mean + momentum * mean;
    const double bessel = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
    state->running_var =
        (1.0 - momentum) * state->running_var + momentum * (var * bessel);
  } else {
    mean = state->running_mean;
    var = state->running_var;
  }
  const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();

  Eigen::VectorXd val(xs.size());
  Eigen::VectorXd xhat(xs.size());
  const Eigen::Map<const Eigen::VectorXd> g(nodes_[gamma].value.data(), c);
  const Eigen::Map<const Eigen::VectorXd> be(nodes_[beta].value.data(), c);
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapRow xh(xhat.data() + b * c * xs.vertices, c, xs.vertices);
    MapRow y(val.data() + b * c * xs.vertices, c, xs.vertices);
    xh = ((slice(x, b).colwise() - mean).array().colwise() * inv_std.array())
             .matrix();
    y = (xh.array().colwise() * g.array()).matrix().colwise() + be;
  }

  auto xhat_keep = std::make_shared<Eigen::VectorXd>(std::move(xhat));
  auto inv_keep = std::make_shared<Eigen::VectorXd>(inv_std);
  return emplace(
      xs, std::move(val), {x, gamma, beta},
      [xhat_keep, inv_keep, training](Tape& t, NodeId id) {
        const Node& nd = t.nodes_[id];
        const NodeId x = nd.inputs[0], gamma = nd.inputs[1], beta = nd.inputs[2];
        const Shape& xs = t.nodes_[x].shape;
        const std::int64_t c = xs.channels;
        const std::int64_t n = xs.batch * xs.vertices;
        const Eigen::Map<const Eigen::VectorXd> g(t.nodes_[gamma].value.data(), c);

        // per-channel reductions over the whole batch
        Eigen::VectorXd sum_gy = Eigen::VectorXd::Zero(c);
        Eigen::VectorXd sum_gy_xhat = Eigen::VectorXd::Zero(c);
        for (std::int64_t b = 0; b < xs.batch; ++b) {
          MapConstRow gy(nd.grad.data() + b * c * xs.vertices, c, xs.vertices);
          MapConstRow xh(xhat_keep->data() + b * c * xs.vertices, c, xs.vertices);
          sum_gy += gy.rowwise().sum();
          sum_gy_xhat += (gy.array() * xh.array()).matrix().rowwise().sum();
        }
        if (t.nodes_[gamma].requires_grad)
          Eigen::Map<Eigen::VectorXd>(t.grad_buffer(gamma).data(), c) += sum_gy_xhat;
        if (t.nodes_[beta].requires_grad)
          Eigen::Map<Eigen::VectorXd>(t.grad_buffer(beta).data(), c) += sum_gy;
        if (!t.nodes_[x].requires_grad) return;

        for (std::int64_t b = 0; b < xs.batch; ++b) {
          MapConstRow gy(nd.grad.data() + b * c * xs.vertices, c, xs.vertices);
          MapConstRow xh(xhat_keep->data() + b * c * xs.vertices, c, xs.vertices);
          MapRow gx(t.grad_buffer(x).data() + b * c * xs.vertices, c, xs.vertices);
          if (training) {
            // mean and variance are functions of x, so their terms fold in
            const Eigen::ArrayXd sc =
                g.array() * inv_keep->array() / static_cast<double>(n);
            gx += (((gy.array() * static_cast<double>(n) -
                     xh.array().colwise() * sum_gy_xhat.array())
                        .colwise() -
                    sum_gy.array())
                       .colwise() *
                   sc)
                      .matrix();
          } else {
            gx += (gy.array().colwise() * (g.array() * inv_keep->array())).matrix();
          }
        }
      });
}

Tape::NodeId Tape::gather_rows(
    NodeId x, std::shared_ptr<const std::vector<std::int64_t>> rows) {
  check(x);
  if (!rows || rows->empty()) throw ConfigError("gather_rows: empty row list");
  const Shape& xs = nodes_[x].shape;
  for (std::int64_t r : *rows)
    if (r < 0 || r >= xs.channels) throw ConfigError("gather_rows: row out of range");
  const Shape out{xs.batch, static_cast<std::int64_t>(rows->size()), xs.vertices};
  Eigen::VectorXd val(out.size());
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapConstRow xb(nodes_[x].value.data() + b * xs.channels * xs.vertices,
                   xs.channels, xs.vertices);
    MapRow yb(val.data() + b * out.channels * out.vertices, out.channels,
              out.vertices);
    for (std::size_t k = 0; k < rows->size(); ++k)
      yb.row(static_cast<std::int64_t>(k)) = xb.row((*rows)[k]);
  }
  return emplace(out, std::move(val), {x}, [rows](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0];
    if (!t.nodes_[x].requires_grad) return;
    const Shape& xs = t.nodes_[x].shape;
    for (std::int64_t b = 0; b < xs.batch; ++b) {
      MapConstRow gy(n.grad.data() + b * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
      MapRow gx(t.grad_buffer(x).data() + b * xs.channels * xs.vertices,
                xs.channels, xs.vertices);
      for (std::size_t k = 0; k < rows->size(); ++k)
        gx.row((*rows)[k]) += gy.row(static_cast<std::int64_t>(k));
    }
  });
}

Tape::NodeId Tape::scatter_mean_pairs(
    NodeId x, std::shared_ptr<const std::vector<MeanPair>> pairs,
    std::int64_t vertices_out) {
  check(x);
  if (!pairs) throw ConfigError("scatter_mean_pairs: null pairs");
  const Shape& xs = nodes_[x].shape;
  for (const MeanPair& p : *pairs)
    if (p.a < 0 || p.a >= xs.vertices || p.b < 0 || p.b >= xs.vertices ||
        p.dest < 0 || p.dest >= vertices_out)
      throw ConfigError("scatter_mean_pairs: index out of range");
  const Shape out{xs.batch, xs.channels, vertices_out};
  Eigen::VectorXd val = Eigen::VectorXd::Zero(out.size());
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapConstRow xb(nodes_[x].value.data() + b * xs.channels * xs.vertices,
                   xs.channels, xs.vertices);
    MapRow yb(val.data() + b * out.channels * out.vertices, out.channels,
              out.vertices);
    for (const MeanPair& p : *pairs)
      yb.col(p.dest) = 0.5 * (xb.col(p.a) + xb.col(p.b));
  }
  return emplace(out, std::move(val), {x}, [pairs](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0];
    if (!t.nodes_[x].requires_grad) return;
    const Shape& xs = t.nodes_[x].shape;
    for (std::int64_t b = 0; b < xs.batch; ++b) {
      MapConstRow gy(n.grad.data() + b * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
      MapRow gx(t.grad_buffer(x).data() + b * xs.channels * xs.vertices,
                xs.channels, xs.vertices);
      for (const MeanPair& p : *pairs) {
        gx.col(p.a) += 0.5 * gy.col(p.dest);
        gx.col(p.b) += 0.5 * gy.col(p.dest);
      }
    }
  });
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Shape& as = nodes_[a].shape;
  const Shape& bs = nodes_[b].shape;
  if (as.batch != bs.batch || as.channels != bs.channels)
    throw ConfigError("concat_cols: batch/channel mismatch");
  const Shape out{as.batch, as.channels, as.vertices + bs.vertices};
  Eigen::VectorXd val(out.size());
  for (std::int64_t i = 0; i < as.batch; ++i) {
    MapRow yb(val.data() + i * out.channels * out.vertices, out.channels,
              out.vertices);
    yb.leftCols(as.vertices) = slice(a, i);
    yb.rightCols(bs.vertices) = slice(b, i);
  }
  return emplace(out, std::move(val), {a, b}, [](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId a = n.inputs[0], b = n.inputs[1];
    const Shape& as = t.nodes_[a].shape;
    const Shape& bs = t.nodes_[b].shape;
    for (std::int64_t i = 0; i < as.batch; ++i) {
      MapConstRow gy(n.grad.data() + i * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
      if (t.nodes_[a].requires_grad) {
        MapRow ga(t.grad_buffer(a).data() + i * as.channels * as.vertices,
                  as.channels, as.vertices);
        ga += gy.leftCols(as.vertices);
      }
      if (t.nodes_[b].requires_grad) {
        MapRow gb(t.grad_buffer(b).data() + i * bs.channels * bs.vertices,
                  bs.channels, bs.vertices);
        gb += gy.rightCols(bs.vertices);
      }
    }
  });
}

Tape::NodeId Tape::pad_vertices(NodeId x, std::int64_t vertices_out) {
  check(x);
  const Shape& xs = nodes_[x].shape;
  if (vertices_out < xs.vertices)
    throw ConfigError("pad_vertices: target smaller than input");
  const Shape out{xs.batch, xs.channels, vertices_out};
  Eigen::VectorXd val = Eigen::VectorXd::Zero(out.size());
  for (std::int64_t b = 0; b < xs.batch; ++b) {
    MapRow yb(val.data() + b * out.channels * out.vertices, out.channels,
              out.vertices);
    yb.leftCols(xs.vertices) = slice(x, b);
  }
  return emplace(out, std::move(val), {x}, [](Tape& t, NodeId id) {
    const Node& n = t.nodes_[id];
    const NodeId x = n.inputs[0];
    if (!t.nodes_[x].requires_grad) return;
    const Shape& xs = t.nodes_[x].shape;
    for (std::int64_t b = 0; b < xs.batch; ++b) {
      MapConstRow gy(n.grad.data() + b * n.shape.channels * n.shape.vertices,
                     n.shape.channels, n.shape.vertices);
      MapRow gx(t.grad_buffer(x).data() + b * xs.channels * xs.vertices,
                xs.channels, xs.vertices);
      gx += gy.leftCols(xs.vertices);
    }
  });
}

Tape::NodeId Tape::mse(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (!(nodes_[a].shape == nodes_[b].shape)) throw ConfigError("mse: shape mismatch");
  const double n = static_cast<double>(nodes_[a].shape.size());
  Eigen::VectorXd val(1);
  val[0] = (nodes_[a].value - nodes_[b].value).squaredNorm() / n;
  return emplace(Shape{1, 1, 1}, std::move(val), {a, b}, [n](Tape& t, NodeId id) {
    const Node& nd = t.nodes_[id];
    const NodeId a = nd.inputs[0], b = nd.inputs[1];
    const Eigen::VectorXd diff =
        (2.0 * nd.grad[0] / n) * (t.nodes_[a].value - t.nodes_[b].value);
    if (t.nodes_[a].requires_grad) t.grad_buffer(a) += diff;
    if (t.nodes_[b].requires_grad) t.grad_buffer(b) -= diff;
  });
}

void Tape::backward(NodeId loss) {
  check(loss);
  if (ran_backward_) throw ConfigError("backward() already ran on this tape");
  if (nodes_[loss].shape.size() != 1)
    throw ConfigError("backward() expects a scalar loss");
  if (!nodes_[loss].requires_grad)
    throw ConfigError("loss does not depend on any tracked input");
  ran_backward_ = true;
  grad_buffer(loss)[0] = 1.0;
  for (std::int64_t id = static_cast<std::int64_t>(nodes_.size()) - 1; id >= 0;
       --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, static_cast<NodeId>(id));
  }
  // nodes the loss never touched still answer grad() with zeros
  for (std::size_t id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].requires_grad && nodes_[id].grad.size() == 0)
      grad_buffer(static_cast<NodeId>(id));
}

}  // namespace fimesh::ad
