// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <unordered_map>
#include <vector>

#include "doctest.h"
#include "fimesh/common.hpp"
#include "fimesh/layers.hpp"
#include "fimesh/rng.hpp"

using namespace fimesh;
using ad::Shape;
using ad::Tape;

namespace {

Eigen::VectorXd random_vec(std::mt19937_64& rng, std::int64_t n, double lo,
                           double hi) {
  Eigen::VectorXd v(n);
  for (std::int64_t i = 0; i < n; ++i) v[i] = uniform_range(rng, lo, hi);
  return v;
}

VertexShufflePlan plan_between(int coarse_level, int fine_level) {
  auto coarse = std::make_shared<const TriMesh>(make_focused(coarse_level));
  auto fine = std::make_shared<const TriMesh>(make_focused(fine_level));
  return VertexShufflePlan::build(coarse, fine);
}

// vertex_shuffle on a single batch element as a plain vector map
Eigen::VectorXd apply_shuffle(const VertexShufflePlan& plan, std::int64_t c4,
                              const Eigen::VectorXd& flat) {
  Tape t;
  Tape::NodeId in =
      t.input({1, c4, plan.vertices_coarse}, flat, false);
  Tape::NodeId out = vertex_shuffle(t, plan, in);
  return t.value(out);
}

std::int64_t conv_param_count(std::int64_t c_in, std::int64_t c_out) {
  return 4 * c_in * c_out + c_out;
}

// mesh_conv's per-tap gain divisor, recomputed from a dense copy
double inf_norm(const SparseOp& op) {
  const Eigen::MatrixXd dense = op.matrix.toDense();
  double best = 1.0;
  for (std::int64_t r = 0; r < dense.rows(); ++r)
    best = std::max(best, dense.row(r).cwiseAbs().sum());
  return best;
}

}  // namespace

TEST_CASE("vertex shuffle: shape contract on the focused ladder") {
  struct Case {
    int coarse, fine;
    std::int64_t c;
  };
  for (const Case& tc : {Case{6, 7, 3}, Case{8, 9, 1}}) {
    VertexShufflePlan plan = plan_between(tc.coarse, tc.fine);
    CHECK(plan.vertices_coarse == focused_vertex_count(tc.coarse));
    CHECK(plan.vertices_fine == focused_vertex_count(tc.fine));

    auto rng = make_stream(21, "vs/shape");
    const Shape in{2, 4 * tc.c, plan.vertices_coarse};
    Tape t;
    Tape::NodeId x = t.input(in, random_vec(rng, in.size(), -1, 1), false);
    Tape::NodeId y = vertex_shuffle(t, plan, x);
    CHECK(t.shape(y).batch == 2);
    CHECK(t.shape(y).channels == tc.c);
    CHECK(t.shape(y).vertices == focused_vertex_count(tc.fine));
  }
}

TEST_CASE("vertex shuffle: channel groups route as the face slots dictate") {
  VertexShufflePlan plan = plan_between(3, 4);
  const TriMesh& coarse = *plan.coarse;
  const TriMesh& fine = *plan.fine;
  const std::int64_t vc = plan.vertices_coarse;

  // independent slot scan: first coarse face, ascending, that contains the
  // midpoint's parent edge assigns group = slot of that edge in the face
  auto key = [](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_map<std::uint64_t, int> group_of_edge;
  for (std::int64_t f = 0; f < coarse.face_count(); ++f)
    for (int slot = 0; slot < 3; ++slot) {
      const std::uint64_t k =
          key(coarse.faces(slot, f), coarse.faces((slot + 1) % 3, f));
      group_of_edge.emplace(k, slot + 1);
    }

  const std::int64_t c = 2;
  auto rng = make_stream(22, "vs/groups");
  Eigen::VectorXd x = random_vec(rng, 4 * c * vc, -1, 1);
  Eigen::VectorXd y = apply_shuffle(plan, 4 * c, x);

  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t v = 0; v < vc; ++v)
      CHECK(y[ch * plan.vertices_fine + v] == x[ch * vc + v]);
    for (std::int64_t v = vc; v < plan.vertices_fine; ++v) {
      const std::uint32_t a = fine.parent_edge(0, v);
      const std::uint32_t b = fine.parent_edge(1, v);
      const auto it = group_of_edge.find(key(a, b));
      REQUIRE(it != group_of_edge.end());
      const std::int64_t g = it->second;
      const double expect =
          0.5 * (x[(g * c + ch) * vc + a] + x[(g * c + ch) * vc + b]);
      CHECK(y[ch * plan.vertices_fine + v] == doctest::Approx(expect).epsilon(1e-15));
    }
  }
}

TEST_CASE("vertex shuffle: linear map with exact dense transpose backward") {
  VertexShufflePlan plan = plan_between(2, 3);
  const std::int64_t c = 2;
  const std::int64_t in_n = 4 * c * plan.vertices_coarse;
  const std::int64_t out_n = c * plan.vertices_fine;

  Eigen::MatrixXd dense(out_n, in_n);
  for (std::int64_t j = 0; j < in_n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(in_n);
    e[j] = 1.0;
    dense.col(j) = apply_shuffle(plan, 4 * c, e);
  }

  auto rng = make_stream(23, "vs/dense");
  Eigen::VectorXd x = random_vec(rng, in_n, -1, 1);
  Eigen::VectorXd y = random_vec(rng, in_n, -1, 1);
  const double alpha = -1.375;

  SUBCASE("forward matches the dense matrix and is linear") {
    CHECK((apply_shuffle(plan, 4 * c, x) - dense * x).lpNorm<Eigen::Infinity>() <
          1e-12);
    const Eigen::VectorXd lhs = apply_shuffle(plan, 4 * c, alpha * x + y);
    const Eigen::VectorXd rhs = alpha * apply_shuffle(plan, 4 * c, x) +
                                apply_shuffle(plan, 4 * c, y);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("backward equals the dense transpose") {
    Tape t;
    Tape::NodeId in = t.input({1, 4 * c, plan.vertices_coarse}, x, true);
    Tape::NodeId out = vertex_shuffle(t, plan, in);
    Eigen::VectorXd target = random_vec(rng, out_n, -1, 1);
    Tape::NodeId loss = t.mse(out, t.constant(t.shape(out), target));
    t.backward(loss);

    const Eigen::VectorXd up =
        (2.0 / static_cast<double>(out_n)) * (t.value(out) - target);
    const Eigen::VectorXd expect = dense.transpose() * up;
    CHECK((t.grad(in) - expect).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("vertex shuffle: input validation") {
  VertexShufflePlan plan = plan_between(2, 3);
  Tape t;
  Tape::NodeId odd =
      t.input({1, 3, plan.vertices_coarse},
              Eigen::VectorXd::Zero(3 * plan.vertices_coarse), false);
  CHECK_THROWS_AS(vertex_shuffle(t, plan, odd), ConfigError);
  Tape::NodeId wrong_mesh = t.input({1, 4, 7}, Eigen::VectorXd::Zero(28), false);
  CHECK_THROWS_AS(vertex_shuffle(t, plan, wrong_mesh), ConfigError);

  auto l2 = std::make_shared<const TriMesh>(make_focused(2));
  auto l4 = std::make_shared<const TriMesh>(make_focused(4));
  CHECK_THROWS_AS(VertexShufflePlan::build(l2, l4), ConfigError);
}

TEST_CASE("mesh convolution: matches the operator taps directly") {
  auto mesh = std::make_shared<const TriMesh>(make_focused(3));
  OperatorSet ops = build_operators(mesh);
  ParamStore store;
  auto init = make_stream(5, "init");
  MeshConv conv(store, "c", &ops, 1, 1, init);

  const double wi = 0.7, wa = -1.3, wn = 0.4, wl = 2.1, bias = 0.25;
  store.value(store.index_of("c/w_id"))[0] = wi;
  store.value(store.index_of("c/w_lat"))[0] = wa;
  store.value(store.index_of("c/w_lng"))[0] = wn;
  store.value(store.index_of("c/w_lap"))[0] = wl;
  store.value(store.index_of("c/b"))[0] = bias;

  auto rng = make_stream(6, "conv/x");
  const std::int64_t v = mesh->vertex_count();
  Eigen::MatrixXd x(1, v);
  for (std::int64_t i = 0; i < v; ++i) x(0, i) = uniform_range(rng, -1, 1);

  Tape t;
  BoundParams bound(store, t, false);
  Tape::NodeId in = t.input({1, 1, v}, Eigen::VectorXd(x.row(0)), false);
  Tape::NodeId out = conv.forward(t, bound, in);

  // derivative taps answer through unit-gain rescaled operators
  const Eigen::MatrixXd expect =
      wi * x + (wa / inf_norm(ops.grad_lat)) * apply(ops.grad_lat, x) +
      (wn / inf_norm(ops.grad_lng)) * apply(ops.grad_lng, x) +
      (wl / inf_norm(ops.laplacian)) * apply(ops.laplacian, x) +
      Eigen::MatrixXd::Constant(1, v, bias);
  CHECK((Eigen::Map<const Eigen::RowVectorXd>(t.value(out).data(), v) -
         expect.row(0))
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("model: parameter counts favor shuffle over transpose baseline") {
  MeshStack stack = MeshStack::build(2, 4);
  ModelConfig cfg;
  cfg.level_in = 2;
  cfg.level_out = 4;
  cfg.channels_in = 3;
  cfg.width = 8;
  cfg.seed = 3;

  const std::int64_t k = cfg.channels_in, c = cfg.width;
  const std::int64_t w1 = cfg.resolved_w1(), w2 = cfg.resolved_w2();
  CHECK(w1 == 4);
  CHECK(w2 == 4);

  ParamStore ssr_store;
  SsrModel ssr(ssr_store, stack, cfg);
  ModelConfig base_cfg = cfg;
  base_cfg.transpose_baseline = true;
  ParamStore base_store;
  SsrModel baseline(base_store, stack, base_cfg);

  const std::int64_t trunk = conv_param_count(k, c) + 2 * c +
                             2 * (2 * conv_param_count(c, c) + 2 * c);
  const std::int64_t ssr_expected = trunk + conv_param_count(c, 4 * w1) +
                                    conv_param_count(w1, 4 * w2) +
                                    conv_param_count(w2, k);
  const std::int64_t base_expected = trunk + conv_param_count(c, 4 * w1) +
                                     conv_param_count(4 * w1, 4 * w2) +
                                     conv_param_count(4 * w2, k);
  CHECK(ssr_store.trainable_scalars() == ssr_expected);
  CHECK(base_store.trainable_scalars() == base_expected);
  CHECK(ssr_store.trainable_scalars() < base_store.trainable_scalars());
  CHECK(base_store.trainable_scalars() - ssr_store.trainable_scalars() ==
        48 * w1 * w2 + 12 * w2 * k);

  // the shuffle stages register nothing: 8 convolutions, 3 batch norms
  CHECK(ssr_store.size() == 8 * 5 + 3 * 4);
  CHECK(parameter_table(ssr_store).size() == 8 * 5 + 3 * 2);

  ModelConfig defaults;
  CHECK(defaults.resolved_w1() == 16);
  CHECK(defaults.resolved_w2() == 4);
}

TEST_CASE("model: forward shape, determinism, and config validation") {
  MeshStack stack = MeshStack::build(2, 4);
  ModelConfig cfg;
  cfg.level_in = 2;
  cfg.level_out = 4;
  cfg.channels_in = 2;
  cfg.width = 4;
  cfg.seed = 11;

  auto run = [&](const ModelConfig& mc, std::uint64_t xseed) {
    ParamStore store;
    SsrModel model(store, stack, mc);
    auto rng = make_stream(xseed, "model/x");
    const Shape in{2, mc.channels_in, stack.meshes[0]->vertex_count()};
    Tape t;
    BoundParams bound(store, t, false);
    Tape::NodeId x = t.input(in, random_vec(rng, in.size(), 0, 1), false);
    Tape::NodeId y = model.forward(t, store, bound, x, false);
    CHECK(t.shape(y).batch == 2);
    CHECK(t.shape(y).channels == mc.channels_in);
    CHECK(t.shape(y).vertices == stack.meshes[2]->vertex_count());
    return Eigen::VectorXd(t.value(y));
  };

  const Eigen::VectorXd a = run(cfg, 1);
  const Eigen::VectorXd b = run(cfg, 1);
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);  // same seed, same weights

  // The output rows are routing-seeded, so at init the output ignores the
  // randomly drawn weights; the seed must still change them underneath.
  ModelConfig other = cfg;
  other.seed = 12;
  CHECK((run(other, 1) - a).lpNorm<Eigen::Infinity>() == 0.0);
  {
    ParamStore s1, s2;
    SsrModel m1(s1, stack, cfg);
    SsrModel m2(s2, stack, other);
    double diff = 0.0;
    for (std::size_t i = 0; i < s1.size(); ++i)
      diff = std::max(
          diff, (s1.record(i).value - s2.record(i).value).lpNorm<Eigen::Infinity>());
    CHECK(diff > 0.0);
  }

  ModelConfig base_cfg = cfg;
  base_cfg.transpose_baseline = true;
  const Eigen::VectorXd base_out = run(base_cfg, 1);
  CHECK(base_out.size() == a.size());

  ModelConfig bad = cfg;
  bad.level_out = 5;
  ParamStore store;
  CHECK_THROWS_AS(SsrModel(store, stack, bad), ConfigError);
}

TEST_CASE("model: seeded init reproduces the interpolation chain") {
  MeshStack stack = MeshStack::build(2, 4);
  ModelConfig cfg;
  cfg.level_in = 2;
  cfg.level_out = 4;
  cfg.channels_in = 2;
  cfg.width = 8;
  cfg.seed = 5;
  ParamStore store;
  SsrModel model(store, stack, cfg);

  const std::int64_t v_in = stack.meshes[0]->vertex_count();
  const std::int64_t v_out = stack.meshes[2]->vertex_count();
  auto rng = make_stream(7, "model/floor");
  Tape t;
  BoundParams bound(store, t, false);
  const Shape in{1, 2, v_in};
  Tape::NodeId x = t.input(in, random_vec(rng, in.size(), 0, 1), false);
  Tape::NodeId y = model.forward(t, store, bound, x, false);

  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd expect =
      Eigen::Map<const RowMat>(t.value(x).data(), 2, v_in);
  for (std::size_t s = 1; s < stack.meshes.size(); ++s)
    expect = interp_upsample(*stack.meshes[s], expect);
  const Eigen::Map<const RowMat> got(t.value(y).data(), 2, v_out);
  CHECK((got - expect).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("model: gradients match finite differences end to end") {
  MeshStack stack = MeshStack::build(2, 4);
  ModelConfig cfg;
  cfg.level_in = 2;
  cfg.level_out = 4;
  cfg.channels_in = 2;
  cfg.width = 4;

  const std::int64_t v0 = stack.meshes[0]->vertex_count();
  const std::int64_t v2 = stack.meshes[2]->vertex_count();
  const Shape in{2, cfg.channels_in, v0};
  const double h = 1e-5;

  for (int seed = 0; seed < 10; ++seed) {
    ModelConfig mc = cfg;
    mc.seed = static_cast<std::uint64_t>(100 + seed);
    ParamStore store;
    SsrModel model(store, stack, mc);

    auto rng = make_stream(mc.seed, "model/fd");
    const Eigen::VectorXd x = random_vec(rng, in.size(), 0, 1);
    const Eigen::VectorXd target =
        random_vec(rng, 2 * cfg.channels_in * v2, -1, 1);

    auto eval_loss = [&]() {
      Tape t;
      BoundParams bound(store, t, true);
      Tape::NodeId xin = t.input(in, x, false);
      Tape::NodeId y = model.forward(t, store, bound, xin, true);
      Tape::NodeId loss = t.mse(y, t.constant(t.shape(y), target));
      return t.value(loss)[0];
    };

    Tape t;
    BoundParams bound(store, t, true);
    Tape::NodeId xin = t.input(in, x, true);
    Tape::NodeId y = model.forward(t, store, bound, xin, true);
    Tape::NodeId loss = t.mse(y, t.constant(t.shape(y), target));
    t.backward(loss);
    const std::vector<Eigen::VectorXd> grads = bound.gradients();
    const Eigen::VectorXd xgrad = t.grad(xin);

    double worst = 0.0;
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (!store.record(i).trainable) continue;
      for (std::int64_t kk = 0; kk < store.value(i).size(); ++kk) {
        const double old = store.value(i)[kk];
        store.value(i)[kk] = old + h;
        const double fp = eval_loss();
        store.value(i)[kk] = old - h;
        const double fm = eval_loss();
        store.value(i)[kk] = old;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = grads[i][kk];
        worst = std::max(worst, std::abs(fd - an) /
                                    std::max({std::abs(fd), std::abs(an), 1.0}));
      }
    }
    CHECK(worst < 1e-4);

    // a sample of input coordinates, same tolerance
    double worst_in = 0.0;
    Eigen::VectorXd xmut = x;
    auto eval_loss_x = [&]() {
      Tape t2;
      BoundParams b2(store, t2, true);
      Tape::NodeId xi = t2.input(in, xmut, false);
      Tape::NodeId yy = model.forward(t2, store, b2, xi, true);
      return t2.value(t2.mse(yy, t2.constant(t2.shape(yy), target)))[0];
    };
    for (std::int64_t kk = 0; kk < x.size(); kk += 7) {
      xmut[kk] = x[kk] + h;
      const double fp = eval_loss_x();
      xmut[kk] = x[kk] - h;
      const double fm = eval_loss_x();
      xmut[kk] = x[kk];
      const double fd = (fp - fm) / (2.0 * h);
      const double an = xgrad[kk];
      worst_in = std::max(worst_in, std::abs(fd - an) /
                                        std::max({std::abs(fd), std::abs(an), 1.0}));
    }
    CHECK(worst_in < 1e-4);
  }
}

TEST_CASE("interpolation upsample and psnr helpers") {
  auto coarse = std::make_shared<const TriMesh>(make_focused(3));
  const TriMesh fine = make_focused(4);
  REQUIRE(fine.coarse_vertex_count == coarse->vertex_count());

  auto rng = make_stream(31, "interp");
  Eigen::MatrixXd values(2, coarse->vertex_count());
  for (std::int64_t v = 0; v < coarse->vertex_count(); ++v) {
    values(0, v) = uniform_range(rng, -1, 1);
    values(1, v) = 3.0;  // constant channel stays constant
  }
  const Eigen::MatrixXd up = interp_upsample(fine, values);
  CHECK(up.cols() == fine.vertex_count());
  CHECK(up.leftCols(coarse->vertex_count()) == values);
  CHECK((up.row(1).array() - 3.0).abs().maxCoeff() == 0.0);
  for (std::int64_t v = coarse->vertex_count(); v < fine.vertex_count(); ++v) {
    const std::uint32_t a = fine.parent_edge(0, v);
    const std::uint32_t b = fine.parent_edge(1, v);
    CHECK(up(0, v) == 0.5 * (up(0, a) + up(0, b)));
  }
  CHECK_THROWS_AS(interp_upsample(fine, Eigen::MatrixXd::Zero(1, 7)), ConfigError);

  CHECK(psnr(0.01) == doctest::Approx(20.0));
  CHECK(psnr(4.0, 2.0) == doctest::Approx(0.0));
  CHECK(std::isinf(psnr(0.0)));
}
