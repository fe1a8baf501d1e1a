// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/layers.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "fimesh/common.hpp"
#include "fimesh/rng.hpp"

namespace fimesh {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

Eigen::VectorXd uniform_init(std::mt19937_64& rng, std::int64_t n,
                             double bound) {
  Eigen::VectorXd v(n);
  for (std::int64_t i = 0; i < n; ++i)
    v[i] = uniform_range(rng, -bound, bound);
  return v;
}

double op_inf_norm(const SparseOp& op) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(op.rows());
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
      acc[it.row()] += std::abs(it.value());
  return acc.size() > 0 ? acc.maxCoeff() : 0.0;
}

}  // namespace

VertexShufflePlan VertexShufflePlan::build(
    std::shared_ptr<const TriMesh> coarse, std::shared_ptr<const TriMesh> fine) {
  if (!coarse || !fine) throw ConfigError("vertex shuffle plan needs two meshes");
  if (fine->level != coarse->level + 1 || fine->kind != coarse->kind)
    throw ConfigError("vertex shuffle plan spans exactly one subdivision level");
  if (fine->coarse_vertex_count != coarse->vertex_count())
    throw ConfigError("fine mesh was not subdivided from this coarse mesh");

  const std::int64_t vc = coarse->vertex_count();
  const std::int64_t vf = fine->vertex_count();

  std::unordered_map<std::uint64_t, std::int64_t> midpoint_of;
  midpoint_of.reserve(static_cast<std::size_t>(vf - vc));
  for (std::int64_t v = vc; v < vf; ++v) {
    const std::uint32_t a = fine->parent_edge(0, v);
    const std::uint32_t b = fine->parent_edge(1, v);
    if (a == kNoParent || static_cast<std::int64_t>(a) >= vc ||
        static_cast<std::int64_t>(b) >= vc)
      throw ConfigError("fine vertex has no coarse parent edge");
    midpoint_of.emplace(edge_key(a, b), v);
  }

  std::array<std::vector<ad::MeanPair>, 3> groups;
  std::vector<char> assigned(static_cast<std::size_t>(vf - vc), 0);
  for (std::int64_t f = 0; f < coarse->face_count(); ++f) {
    const std::uint32_t corner[3] = {coarse->faces(0, f), coarse->faces(1, f),
                                     coarse->faces(2, f)};
    for (int slot = 0; slot < 3; ++slot) {
      const std::uint32_t a = corner[slot];
      const std::uint32_t b = corner[(slot + 1) % 3];
      const auto it = midpoint_of.find(edge_key(a, b));
      if (it == midpoint_of.end()) continue;
      char& seen = assigned[static_cast<std::size_t>(it->second - vc)];
      if (seen) continue;
      seen = 1;
      groups[slot].push_back(ad::MeanPair{static_cast<std::int64_t>(a),
                                          static_cast<std::int64_t>(b),
                                          it->second - vc});
    }
  }
  for (char seen : assigned)
    if (!seen) throw ConfigError("subdivision midpoint missing from coarse faces");

  VertexShufflePlan plan;
  plan.coarse = std::move(coarse);
  plan.fine = std::move(fine);
  plan.vertices_coarse = vc;
  plan.vertices_fine = vf;
  for (int g = 0; g < 3; ++g)
    plan.group_pairs[g] =
        std::make_shared<const std::vector<ad::MeanPair>>(std::move(groups[g]));
  return plan;
}

ad::Tape::NodeId vertex_shuffle(ad::Tape& tape, const VertexShufflePlan& plan,
                                ad::Tape::NodeId x) {
  const ad::Shape& xs = tape.shape(x);
  if (xs.channels % 4 != 0)
    throw ConfigError("vertex shuffle input channels must be divisible by 4");
  if (xs.vertices != plan.vertices_coarse)
    throw ConfigError("vertex shuffle input lives on the wrong mesh");
  const std::int64_t c = xs.channels / 4;
  const std::int64_t mids = plan.vertices_fine - plan.vertices_coarse;

  auto rows_of_group = [c](std::int64_t g) {
    auto rows = std::make_shared<std::vector<std::int64_t>>();
    rows->reserve(static_cast<std::size_t>(c));
    for (std::int64_t i = 0; i < c; ++i) rows->push_back(g * c + i);
    return std::shared_ptr<const std::vector<std::int64_t>>(std::move(rows));
  };

  ad::Tape::NodeId base = tape.gather_rows(x, rows_of_group(0));
  ad::Tape::NodeId mid = tape.scatter_mean_pairs(
      tape.gather_rows(x, rows_of_group(1)), plan.group_pairs[0], mids);
  for (std::int64_t g = 2; g <= 3; ++g)
    mid = tape.add(mid,
                   tape.scatter_mean_pairs(tape.gather_rows(x, rows_of_group(g)),
                                           plan.group_pairs[g - 1], mids));
  return tape.concat_cols(base, mid);
}

MeshConv::MeshConv(ParamStore& store, const std::string& name,
                   const OperatorSet* ops, std::int64_t c_in,
                   std::int64_t c_out, std::mt19937_64& init)
    : ops_(ops), c_in_(c_in), c_out_(c_out) {
  if (!ops) throw ConfigError("mesh convolution needs an operator set");
  if (c_in < 1 || c_out < 1) throw ConfigError("mesh convolution channel counts");
  const ad::Shape ws{1, c_out, c_in};
  // The derivative taps run through unit-gain rescaled operators (see
  // forward), so one fan-in bound covers all four weight blocks.
  const double bound = std::sqrt(1.0 / (4.0 * static_cast<double>(c_in)));
  inv_lat_ = 1.0 / std::max(1.0, op_inf_norm(ops->grad_lat));
  inv_lng_ = 1.0 / std::max(1.0, op_inf_norm(ops->grad_lng));
  inv_lap_ = 1.0 / std::max(1.0, op_inf_norm(ops->laplacian));
  w_id_ = store.add(name + "/w_id", ws, uniform_init(init, ws.size(), bound), true);
  w_lat_ = store.add(name + "/w_lat", ws, uniform_init(init, ws.size(), bound), true);
  w_lng_ = store.add(name + "/w_lng", ws, uniform_init(init, ws.size(), bound), true);
  w_lap_ = store.add(name + "/w_lap", ws, uniform_init(init, ws.size(), bound), true);
  b_ = store.add(name + "/b", {1, c_out, 1}, Eigen::VectorXd::Zero(c_out), true);
}

void MeshConv::seed_route(ParamStore& store, std::int64_t out,
                          std::int64_t in) const {
  if (out < 0 || out >= c_out_ || in < 0 || in >= c_in_)
    throw ConfigError("routing entry out of range");
  for (std::size_t id : {w_id_, w_lat_, w_lng_, w_lap_})
    store.value(id).segment(out * c_in_, c_in_).setZero();
  store.value(w_id_)[out * c_in_ + in] = 1.0;
  store.value(b_)[out] = 0.0;
}

void MeshConv::set_bias_entry(ParamStore& store, std::int64_t out,
                              double w) const {
  if (out < 0 || out >= c_out_) throw ConfigError("bias entry out of range");
  store.value(b_)[out] = w;
}

void MeshConv::clear(ParamStore& store) const {
  for (std::size_t id : {w_id_, w_lat_, w_lng_, w_lap_, b_})
    store.value(id).setZero();
}

ad::Tape::NodeId MeshConv::forward(ad::Tape& tape, const BoundParams& bound,
                                   ad::Tape::NodeId x) const {
  if (tape.shape(x).channels != c_in_)
    throw ConfigError("mesh convolution input channel mismatch");
  if (tape.shape(x).vertices != ops_->identity.rows())
    throw ConfigError("mesh convolution input lives on the wrong mesh");
  // Each derivative tap is divided by max(1, inf-norm) of its operator.
  // The Laplacian norm grows like 4^level, so raw responses would swamp
  // the identity tap and tie usable learning rates to the mesh level;
  // rescaling keeps the four taps at comparable gain on every mesh. This
  // only reparameterizes the weights, the expressible maps are unchanged.
  ad::Tape::NodeId y = tape.matmul(bound.node(w_id_), x);
  y = tape.add(y, tape.matmul(bound.node(w_lat_),
                              tape.scale(tape.sparse_matvec(&ops_->grad_lat, x),
                                         inv_lat_)));
  y = tape.add(y, tape.matmul(bound.node(w_lng_),
                              tape.scale(tape.sparse_matvec(&ops_->grad_lng, x),
                                         inv_lng_)));
  y = tape.add(y, tape.matmul(bound.node(w_lap_),
                              tape.scale(tape.sparse_matvec(&ops_->laplacian, x),
                                         inv_lap_)));
  return tape.add_bias(y, bound.node(b_));
}

ad::Tape::NodeId mesh_conv_transpose(ad::Tape& tape, const BoundParams& bound,
                                     const MeshConv& fine_conv,
                                     std::int64_t vertices_fine,
                                     ad::Tape::NodeId x) {
  return fine_conv.forward(tape, bound,
                           tape.pad_vertices(x, vertices_fine));
}

void BatchNorm::seed_affine(ParamStore& store, double gamma,
                            double beta) const {
  store.value(gamma_).setConstant(gamma);
  store.value(beta_).setConstant(beta);
}

void BatchNorm::seed_affine_entry(ParamStore& store, std::int64_t ch,
                                  double gamma, double beta) const {
  if (ch < 0 || ch >= store.value(gamma_).size())
    throw ConfigError("norm channel out of range");
  store.value(gamma_)[ch] = gamma;
  store.value(beta_)[ch] = beta;
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name,
                     std::int64_t channels, double eps, double momentum)
    : eps_(eps), momentum_(momentum) {
  const ad::Shape ps{1, channels, 1};
  gamma_ = store.add(name + "/gamma", ps, Eigen::VectorXd::Ones(channels), true);
  beta_ = store.add(name + "/beta", ps, Eigen::VectorXd::Zero(channels), true);
  running_mean_ = store.add(name + "/running_mean", ps,
                            Eigen::VectorXd::Zero(channels), false);
  running_var_ = store.add(name + "/running_var", ps,
                           Eigen::VectorXd::Ones(channels), false);
}

ad::Tape::NodeId BatchNorm::forward(ad::Tape& tape, ParamStore& store,
                                    const BoundParams& bound,
                                    ad::Tape::NodeId x, bool training) const {
  ad::BatchNormState state{store.value(running_mean_), store.value(running_var_)};
  ad::Tape::NodeId y =
      tape.batchnorm(x, bound.node(gamma_), bound.node(beta_), &state, training,
                     eps_, momentum_);
  if (training) {
    store.value(running_mean_) = state.running_mean;
    store.value(running_var_) = state.running_var;
  }
  return y;
}

ResBlock::ResBlock(ParamStore& store, const std::string& name,
                   const OperatorSet* ops, std::int64_t channels,
                   std::mt19937_64& init)
    : conv1_(store, name + "/conv1", ops, channels, channels, init),
      bn_(store, name + "/bn", channels),
      conv2_(store, name + "/conv2", ops, channels, channels, init) {}

ad::Tape::NodeId ResBlock::forward(ad::Tape& tape, ParamStore& store,
                                   const BoundParams& bound, ad::Tape::NodeId x,
                                   bool training) const {
  ad::Tape::NodeId h = conv1_.forward(tape, bound, x);
  h = bn_.forward(tape, store, bound, h, training);
  h = tape.relu(h);
  h = conv2_.forward(tape, bound, h);
  return tape.add(x, h);
}

MeshStack MeshStack::build(int level_in, int level_out) {
  if (level_in < 1 || level_out <= level_in)
    throw ConfigError("mesh stack needs 1 <= level_in < level_out");
  MeshStack stack;
  for (int level = level_in; level <= level_out; ++level) {
    auto mesh = std::make_shared<const TriMesh>(make_focused(level));
    stack.meshes.push_back(mesh);
    stack.ops.push_back(build_operators(mesh));
  }
  for (std::size_t i = 0; i + 1 < stack.meshes.size(); ++i)
    stack.plans.push_back(
        VertexShufflePlan::build(stack.meshes[i], stack.meshes[i + 1]));
  return stack;
}

std::int64_t ModelConfig::resolved_w1() const {
  if (w1 > 0) return w1;
  return std::max<std::int64_t>(4, width / 4);
}

std::int64_t ModelConfig::resolved_w2() const {
  if (w2 > 0) return w2;
  return std::max<std::int64_t>(4, resolved_w1() / 4);
}

SsrModel::SsrModel(ParamStore& store, const MeshStack& stack,
                   const ModelConfig& config)
    : config_(config), stack_(&stack) {
  if (config.level_out != config.level_in + 2)
    throw ConfigError("model spans exactly two upsampling stages");
  if (stack.meshes.size() != 3 || stack.meshes.front()->level != config.level_in)
    throw ConfigError("mesh stack does not match the model levels");
  if (config.channels_in < 1 || config.width < 1)
    throw ConfigError("model channel counts must be positive");

  const std::int64_t k = config.channels_in;
  const std::int64_t c = config.width;
  const std::int64_t w1 = config.resolved_w1();
  const std::int64_t w2 = config.resolved_w2();
  auto init = make_stream(config.seed, "init");

  convs_.reserve(4);
  convs_.emplace_back(store, "stem", &stack.ops[0], k, c, init);
  bn_ = std::make_unique<BatchNorm>(store, "stem_bn", c);
  blocks_.reserve(2);
  blocks_.emplace_back(store, "res1", &stack.ops[0], c, init);
  blocks_.emplace_back(store, "res2", &stack.ops[0], c, init);
  if (config.transpose_baseline) {
    convs_.emplace_back(store, "up1", &stack.ops[1], c, 4 * w1, init);
    convs_.emplace_back(store, "up2", &stack.ops[2], 4 * w1, 4 * w2, init);
    convs_.emplace_back(store, "head", &stack.ops[2], 4 * w2, k, init);
  } else {
    convs_.emplace_back(store, "up1", &stack.ops[0], c, 4 * w1, init);
    convs_.emplace_back(store, "up2", &stack.ops[1], w1, 4 * w2, init);
    convs_.emplace_back(store, "head", &stack.ops[2], w2, k, init);
  }

  // Seed a pass-through. Residual branches are cleared, signal channels
  // ride identity routes through stem, both up stages (once per channel
  // group) and the head, and the head bias cancels the trunk norm's beta
  // offset. On the routed channels the norm starts at gamma 0 / beta 0.02
  // (the relu stays in its active region, so every gradient is live while
  // the normalized branch contributes only a constant). Spare trunk
  // channels repeat the inputs at gamma 1, handing the residual stack
  // standardized copies of the signal from the first step. The head rows
  // are cleared, so none of that reaches the output at init: the shuffle
  // variant starts out computing exactly the parent-mean upsampling chain,
  // the transpose variant its own routing floor with zero-filled midpoints.
  // A random start spends most of a short training budget rediscovering
  // that baseline before it can improve on it.
  constexpr double kNormShift = 0.02;
  for (const ResBlock& block : blocks_) block.clear_branch(store);
  bn_->seed_affine(store, 0.0, kNormShift);
  for (std::int64_t ch = 0; ch < std::min(k, c); ++ch)
    convs_[0].seed_route(store, ch, ch);
  for (std::int64_t ch = k; ch < std::min(2 * k, c); ++ch) {
    convs_[0].seed_route(store, ch, ch - k);
    bn_->seed_affine_entry(store, ch, 1.0, 0.0);
  }
  const std::int64_t carry1 = std::min(k, w1);
  const std::int64_t carry2 = std::min(carry1, w2);
  for (std::int64_t g = 0; g < 4; ++g) {
    for (std::int64_t ch = 0; ch < std::min(carry1, c); ++ch)
      convs_[1].seed_route(store, g * w1 + ch, ch);
    for (std::int64_t ch = 0; ch < carry2; ++ch)
      convs_[2].seed_route(store, g * w2 + ch, ch);
  }
  for (std::int64_t ch = 0; ch < std::min(carry2, k); ++ch) {
    convs_[3].seed_route(store, ch, ch);
    convs_[3].set_bias_entry(store, ch, -kNormShift);
  }
}

ad::Tape::NodeId SsrModel::forward(ad::Tape& tape, ParamStore& store,
                                   const BoundParams& bound, ad::Tape::NodeId x,
                                   bool training) const {
  const MeshConv& stem = convs_[0];
  const MeshConv& up1 = convs_[1];
  const MeshConv& up2 = convs_[2];
  const MeshConv& head = convs_[3];

  ad::Tape::NodeId s = stem.forward(tape, bound, x);
  ad::Tape::NodeId h = tape.relu(bn_->forward(tape, store, bound, s, training));
  for (const ResBlock& block : blocks_)
    h = block.forward(tape, store, bound, h, training);
  h = tape.add(h, s);  // long skip from the pre-norm stem output

  if (config_.transpose_baseline) {
    h = mesh_conv_transpose(tape, bound, up1,
                            stack_->meshes[1]->vertex_count(), h);
    h = mesh_conv_transpose(tape, bound, up2,
                            stack_->meshes[2]->vertex_count(), h);
  } else {
    h = up1.forward(tape, bound, h);
    h = vertex_shuffle(tape, stack_->plans[0], h);
    h = up2.forward(tape, bound, h);
    h = vertex_shuffle(tape, stack_->plans[1], h);
  }
  return head.forward(tape, bound, h);
}

std::vector<std::pair<std::string, std::int64_t>> parameter_table(
    const ParamStore& store) {
  std::vector<std::pair<std::string, std::int64_t>> out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamRecord& r = store.record(i);
    if (r.trainable) out.emplace_back(r.name, r.value.size());
  }
  return out;
}

Eigen::MatrixXd interp_upsample(const TriMesh& fine,
                                const Eigen::MatrixXd& coarse_values) {
  const std::int64_t vc = fine.coarse_vertex_count;
  if (coarse_values.cols() != vc)
    throw ConfigError("interpolation input does not match the coarse level");
  Eigen::MatrixXd out(coarse_values.rows(), fine.vertex_count());
  out.leftCols(vc) = coarse_values;
  for (std::int64_t v = vc; v < fine.vertex_count(); ++v) {
    const std::uint32_t a = fine.parent_edge(0, v);
    const std::uint32_t b = fine.parent_edge(1, v);
    out.col(v) = 0.5 * (out.col(a) + out.col(b));
  }
  return out;
}

double psnr(double mse, double peak) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace fimesh
