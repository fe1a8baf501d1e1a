// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fimesh/autodiff.hpp"
#include "fimesh/operators.hpp"
#include "fimesh/params.hpp"
#include "fimesh/trimesh.hpp"

namespace fimesh {

// Wiring for the mesh analog of pixel shuffle. An input with 4C channels on
// the coarse mesh becomes C channels on the next finer mesh: channel group 0
// lands on the surviving coarse vertices, groups 1..3 land on the edge
// midpoints created by subdivision, averaged over the two edge endpoints.
// Each midpoint's group is the edge slot (v0,v1)->1, (v1,v2)->2, (v2,v0)->3
// in the first coarse face, by ascending face id, that contains its edge.
struct VertexShufflePlan {
  std::shared_ptr<const TriMesh> coarse;
  std::shared_ptr<const TriMesh> fine;
  std::int64_t vertices_coarse = 0;
  std::int64_t vertices_fine = 0;
  // pairs per channel group 1..3; dest indexes the midpoint block
  std::array<std::shared_ptr<const std::vector<ad::MeanPair>>, 3> group_pairs;

  static VertexShufflePlan build(std::shared_ptr<const TriMesh> coarse,
                                 std::shared_ptr<const TriMesh> fine);
};

// Applies the plan to x {b, 4c, v_coarse} -> {b, c, v_fine}. Purely a fixed
// linear rearrangement; introduces no parameters.
ad::Tape::NodeId vertex_shuffle(ad::Tape& tape, const VertexShufflePlan& plan,
                                ad::Tape::NodeId x);

// y = W_id x + W_lat (G_lat x) + W_lng (G_lng x) + W_lap (L x) + b, all four
// taps sharing the input. 4 * c_in * c_out + c_out parameters. Stored
// derivative-tap weights are expressed against unit-gain operators: the tap
// response is divided by max(1, inf-norm of the operator), a fixed per-mesh
// constant, before mixing.
class MeshConv {
 public:
  MeshConv(ParamStore& store, const std::string& name, const OperatorSet* ops,
           std::int64_t c_in, std::int64_t c_out, std::mt19937_64& init);

  ad::Tape::NodeId forward(ad::Tape& tape, const BoundParams& bound,
                           ad::Tape::NodeId x) const;

  // Turns output channel `out` into a pure copy of input channel `in`: the
  // row is zeroed across all four taps and the bias, then the identity tap
  // gets a unit entry. Used to seed channel routing.
  void seed_route(ParamStore& store, std::int64_t out, std::int64_t in) const;
  void set_bias_entry(ParamStore& store, std::int64_t out, double w) const;
  // Zeroes all four weight blocks and the bias.
  void clear(ParamStore& store) const;

  std::int64_t c_in() const { return c_in_; }
  std::int64_t c_out() const { return c_out_; }

 private:
  const OperatorSet* ops_;
  std::int64_t c_in_, c_out_;
  double inv_lat_ = 1.0, inv_lng_ = 1.0, inv_lap_ = 1.0;
  std::size_t w_id_, w_lat_, w_lng_, w_lap_, b_;
};

// Upsampling counterpart used by the baseline: zero-pad x onto the finer
// mesh (new vertices read zero), then convolve there. fine_conv must be
// built on the finer mesh's operators.
ad::Tape::NodeId mesh_conv_transpose(ad::Tape& tape, const BoundParams& bound,
                                     const MeshConv& fine_conv,
                                     std::int64_t vertices_fine,
                                     ad::Tape::NodeId x);

class BatchNorm {
 public:
  BatchNorm(ParamStore& store, const std::string& name, std::int64_t channels,
            double eps = 1e-5, double momentum = 0.1);

  // training mode folds fresh batch statistics back into the store
  ad::Tape::NodeId forward(ad::Tape& tape, ParamStore& store,
                           const BoundParams& bound, ad::Tape::NodeId x,
                           bool training) const;

  // Overwrites the affine pair; both stay trainable.
  void seed_affine(ParamStore& store, double gamma, double beta) const;
  void seed_affine_entry(ParamStore& store, std::int64_t ch, double gamma,
                         double beta) const;

 private:
  double eps_, momentum_;
  std::size_t gamma_, beta_, running_mean_, running_var_;
};

// x + conv2(relu(bn(conv1(x)))), channel-preserving
class ResBlock {
 public:
  ResBlock(ParamStore& store, const std::string& name, const OperatorSet* ops,
           std::int64_t channels, std::mt19937_64& init);

  ad::Tape::NodeId forward(ad::Tape& tape, ParamStore& store,
                           const BoundParams& bound, ad::Tape::NodeId x,
                           bool training) const;

  // Zeroes the second conv so the block starts as the identity.
  void clear_branch(ParamStore& store) const { conv2_.clear(store); }

 private:
  MeshConv conv1_;
  BatchNorm bn_;
  MeshConv conv2_;
};

// The three meshes spanned by a two-stage super-resolution model, their
// operators, and the shuffle plans between consecutive levels.
struct MeshStack {
  std::vector<std::shared_ptr<const TriMesh>> meshes;  // level_in..level_out
  std::vector<OperatorSet> ops;
  std::vector<VertexShufflePlan> plans;

  static MeshStack build(int level_in, int level_out);
};

struct ModelConfig {
  int level_in = 7;
  int level_out = 9;
  std::int64_t channels_in = 3;
  std::int64_t width = 64;  // trunk channels
  std::int64_t w1 = 0;      // 0 derives max(4, width / 4)
  std::int64_t w2 = 0;      // 0 derives max(4, w1 / 4)
  std::uint64_t seed = 0;
  // replaces each shuffle stage with zero-padding to the finer mesh followed
  // by a convolution there, keeping the pre-shuffle channel count
  bool transpose_baseline = false;

  std::int64_t resolved_w1() const;
  std::int64_t resolved_w2() const;
};

// Two-stage mesh super-resolution network: a residual trunk at the input
// level, then two upsampling stages to level_in + 2. Weight initialization
// draws from stream(seed, "init") in registration order, so a config and
// seed pin every parameter.
class SsrModel {
 public:
  SsrModel(ParamStore& store, const MeshStack& stack, const ModelConfig& config);

  // x {b, channels_in, v(level_in)} -> {b, channels_in, v(level_out)}
  ad::Tape::NodeId forward(ad::Tape& tape, ParamStore& store,
                           const BoundParams& bound, ad::Tape::NodeId x,
                           bool training) const;

  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  const MeshStack* stack_;
  std::vector<MeshConv> convs_;  // stem, up1, up2, head
  std::unique_ptr<BatchNorm> bn_;
  std::vector<ResBlock> blocks_;
};

// name and scalar count per record, in registration order
std::vector<std::pair<std::string, std::int64_t>> parameter_table(
    const ParamStore& store);

// Nearest ancestor-mean interpolation onto one finer level: coarse columns
// survive, each new midpoint takes the mean of its two parents.
Eigen::MatrixXd interp_upsample(const TriMesh& fine,
                                const Eigen::MatrixXd& coarse_values);

// +inf when mse is zero; tabulated output clamps at 99 dB
double psnr(double mse, double peak = 1.0);

}  // namespace fimesh
