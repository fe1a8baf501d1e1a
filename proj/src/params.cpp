// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/params.hpp"

#include <cmath>
#include <fstream>

#include "fimesh/common.hpp"

namespace fimesh {

namespace {
constexpr char kCheckpointMagic[9] = "FICKPT01";
constexpr std::uint8_t kDtypeF64 = 0;
}  // namespace

std::size_t ParamStore::add(std::string name, const ad::Shape& shape,
                            Eigen::VectorXd value, bool trainable) {
  if (name.empty()) throw ConfigError("parameter name must not be empty");
  for (const ParamRecord& r : records_)
    if (r.name == name) throw ConfigError("duplicate parameter name: " + name);
  if (value.size() != shape.size())
    throw ConfigError("parameter value does not match its shape: " + name);
  ParamRecord rec;
  rec.name = std::move(name);
  rec.shape = shape;
  rec.value = std::move(value);
  rec.trainable = trainable;
  if (trainable) {
    rec.m = Eigen::VectorXd::Zero(rec.value.size());
    rec.v = Eigen::VectorXd::Zero(rec.value.size());
  }
  records_.push_back(std::move(rec));
  return records_.size() - 1;
}

const ParamRecord& ParamStore::record(std::size_t index) const {
  if (index >= records_.size()) throw ConfigError("parameter index out of range");
  return records_[index];
}

std::size_t ParamStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].name == name) return i;
  throw ConfigError("unknown parameter: " + name);
}

Eigen::VectorXd& ParamStore::value(std::size_t index) {
  if (index >= records_.size()) throw ConfigError("parameter index out of range");
  return records_[index].value;
}

const Eigen::VectorXd& ParamStore::value(std::size_t index) const {
  return record(index).value;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const ParamRecord& r : records_)
    if (r.trainable) ++n;
  return n;
}

std::int64_t ParamStore::trainable_scalars() const {
  std::int64_t n = 0;
  for (const ParamRecord& r : records_)
    if (r.trainable) n += r.value.size();
  return n;
}

void ParamStore::adam_step(const std::vector<Eigen::VectorXd>& grads,
                           const AdamOptions& options) {
  if (grads.size() != records_.size())
    throw NumericError("optimizer received a gradient slot per record mismatch");
  ++step_;
  const double t = static_cast<double>(step_);
  const double corr1 = 1.0 - std::pow(options.beta1, t);
  const double corr2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    ParamRecord& r = records_[i];
    if (!r.trainable) continue;
    const Eigen::VectorXd& g = grads[i];
    if (g.size() != r.value.size())
      throw NumericError("missing or mis-sized gradient for " + r.name);
    r.m = options.beta1 * r.m + (1.0 - options.beta1) * g;
    r.v = options.beta2 * r.v +
          (1.0 - options.beta2) * g.cwiseProduct(g);
    // bias-corrected moments; eps is added outside the square root
    r.value.array() -= options.lr * (r.m.array() / corr1) /
                       ((r.v.array() / corr2).sqrt() + options.eps);
  }
}

void ParamStore::sgd_step(const std::vector<Eigen::VectorXd>& grads,
                          double lr) {
  if (grads.size() != records_.size())
    throw NumericError("optimizer received a gradient slot per record mismatch");
  ++step_;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    ParamRecord& r = records_[i];
    if (!r.trainable) continue;
    const Eigen::VectorXd& g = grads[i];
    if (g.size() != r.value.size())
      throw NumericError("missing or mis-sized gradient for " + r.name);
    r.value -= lr * g;
  }
}

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  BinaryWriter w(os);
  w.magic(kCheckpointMagic);
  w.pod<std::uint64_t>(records_.size());
  w.pod<std::uint64_t>(step_);
  for (const ParamRecord& r : records_) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.pod<std::uint8_t>(kDtypeF64);
    w.pod<std::uint8_t>(r.trainable ? 1 : 0);
    w.pod<std::uint8_t>(3);  // rank
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(r.shape.batch));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(r.shape.channels));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(r.shape.vertices));
    w.bytes(r.value.data(), sizeof(double) * r.value.size());
    if (r.trainable) {
      w.bytes(r.m.data(), sizeof(double) * r.m.size());
      w.bytes(r.v.data(), sizeof(double) * r.v.size());
    }
  }
}

void ParamStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open checkpoint " + path.string());
  BinaryReader rd(is);
  rd.expect_magic(kCheckpointMagic);
  const auto count = rd.pod<std::uint64_t>();
  if (count != records_.size())
    throw ConfigError("checkpoint holds a different number of parameters");
  step_ = rd.pod<std::uint64_t>();
  for (ParamRecord& r : records_) {
    const auto name_len = rd.pod<std::uint32_t>();
    if (name_len > 4096) throw DataError("implausible parameter name length");
    std::string name(name_len, '\0');
    rd.bytes(name.data(), name_len);
    if (name != r.name)
      throw ConfigError("checkpoint parameter order mismatch: expected " +
                        r.name + ", found " + name);
    if (rd.pod<std::uint8_t>() != kDtypeF64)
      throw DataError("unsupported checkpoint dtype for " + name);
    const bool trainable = rd.pod<std::uint8_t>() != 0;
    if (trainable != r.trainable)
      throw ConfigError("checkpoint trainable flag mismatch for " + name);
    if (rd.pod<std::uint8_t>() != 3)
      throw DataError("unsupported checkpoint rank for " + name);
    const ad::Shape shape{static_cast<std::int64_t>(rd.pod<std::uint64_t>()),
                          static_cast<std::int64_t>(rd.pod<std::uint64_t>()),
                          static_cast<std::int64_t>(rd.pod<std::uint64_t>())};
    if (!(shape == r.shape))
      throw ConfigError("checkpoint shape mismatch for " + name);
    rd.bytes(r.value.data(), sizeof(double) * r.value.size());
    if (r.trainable) {
      rd.bytes(r.m.data(), sizeof(double) * r.m.size());
      rd.bytes(r.v.data(), sizeof(double) * r.v.size());
    }
  }
  if (rd.more()) throw DataError("trailing bytes after checkpoint payload");
}

BoundParams::BoundParams(const ParamStore& store, ad::Tape& tape, bool training)
    : store_(&store), tape_(&tape), training_(training) {
  nodes_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamRecord& r = store.record(i);
    nodes_.push_back(
        tape.input(r.shape, r.value, training && r.trainable));
  }
}

ad::Tape::NodeId BoundParams::node(std::size_t index) const {
  if (index >= nodes_.size()) throw ConfigError("parameter index out of range");
  return nodes_[index];
}

std::vector<Eigen::VectorXd> BoundParams::gradients() const {
  std::vector<Eigen::VectorXd> out(nodes_.size());
  if (!training_) return out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (store_->record(i).trainable) out[i] = tape_->grad(nodes_[i]);
  return out;
}

}  // namespace fimesh
