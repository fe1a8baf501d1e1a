// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fimesh/autodiff.hpp"

namespace fimesh {

// One named tensor: a trainable weight or a non-trainable buffer such as
// batch-norm running statistics. Adam state is carried only for trainable
// records.
struct ParamRecord {
  std::string name;
  ad::Shape shape;
  Eigen::VectorXd value;
  bool trainable = true;
  Eigen::VectorXd m;  // Adam first moment
  Eigen::VectorXd v;  // Adam second moment
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Owns every persistent tensor of a model in registration order. That order
// is the contract for initialization, checkpoints, and optimizer state, so
// layers must register deterministically.
class ParamStore {
 public:
  // name must be unique; returns the record index
  std::size_t add(std::string name, const ad::Shape& shape,
                  Eigen::VectorXd value, bool trainable);

  std::size_t size() const { return records_.size(); }
  const ParamRecord& record(std::size_t index) const;
  std::size_t index_of(const std::string& name) const;  // throws ConfigError

  Eigen::VectorXd& value(std::size_t index);
  const Eigen::VectorXd& value(std::size_t index) const;

  std::size_t trainable_count() const;        // records
  std::int64_t trainable_scalars() const;     // summed element counts
  std::uint64_t step() const { return step_; }

  // One bias-corrected Adam update over every trainable record. grads must
  // have one entry per record, sized to match for trainable records (slots
  // for non-trainable records are ignored); anything else is a
  // NumericError.
  void adam_step(const std::vector<Eigen::VectorXd>& grads,
                 const AdamOptions& options);

  // Plain gradient descent with the same gradient contract; leaves the Adam
  // moments untouched but still advances the step counter.
  void sgd_step(const std::vector<Eigen::VectorXd>& grads, double lr);

  void save(const std::filesystem::path& path) const;
  // Restores values, Adam state, and the step counter into an already
  // registered store; any name, shape, or flag mismatch is a ConfigError.
  void load(const std::filesystem::path& path);

 private:
  std::vector<ParamRecord> records_;
  std::uint64_t step_ = 0;
};

// Binds every store record onto a tape as an input node, in registration
// order. Gradients are tracked for trainable records only when training is
// true, so evaluation tapes carry constants.
class BoundParams {
 public:
  BoundParams(const ParamStore& store, ad::Tape& tape, bool training);

  ad::Tape::NodeId node(std::size_t index) const;

  // Gradient of every record after tape.backward(); non-trainable slots
  // (and everything when bound for evaluation) stay empty.
  std::vector<Eigen::VectorXd> gradients() const;

 private:
  const ParamStore* store_;
  ad::Tape* tape_;
  bool training_;
  std::vector<ad::Tape::NodeId> nodes_;
};

}  // namespace fimesh
