// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fimesh/common.hpp"
#include "fimesh/dataset.hpp"
#include "fimesh/layers.hpp"

namespace fimesh {

// Single-producer/single-consumer hand-off queue with a fixed capacity.
// push blocks while the queue is full and returns false once the queue is
// closed; pop blocks while it is empty and returns nullopt once closed and
// drained. close() releases both sides.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("queue capacity must be positive");
  }

  bool push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    std::optional<T> item(std::move(items_.front()));
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

// A dataset directory as produced by build_dataset: dataset.json plus
// train.fisamp / test.fisamp.
struct LoadedDataset {
  int level_in = 0;
  int level_out = 0;
  std::int64_t channels = 0;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;

  static LoadedDataset load(const std::filesystem::path& dir, bool need_train,
                            bool need_test);
};

struct TrainConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  std::string model = "ssr";       // "ssr" | "transpose"
  std::string optimizer = "adam";  // "adam" | "sgd"
  int epochs = 50;
  std::int64_t batch = 64;
  double lr = 0.01;
  std::int64_t width = 64;
  std::int64_t w1 = 0;
  std::int64_t w2 = 0;
  std::uint64_t seed = 0;
  // threads > 1 moves batch assembly onto a loader thread handing batches
  // over a bounded queue; batch contents are fixed by the seed either way
  int threads = 1;
  std::int64_t queue_capacity = 4;
};

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_test_psnr = 0.0;
  double initial_test_psnr = 0.0;
  double final_train_mse = 0.0;
  double floor_psnr = 0.0;
  std::int64_t trainable_parameters = 0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metrics_path;
};

// Runs the training loop: per-epoch train MSE and test PSNR as JSON lines
// in out_dir/metrics.jsonl, best and last checkpoints beside it. epochs=0
// writes the initial checkpoint and baseline metrics only. A non-finite
// loss aborts with a NumericError naming the epoch and batch.
TrainResult train(const TrainConfig& config, std::ostream& log);

struct EvalItem {
  std::string dataset;
  std::uint64_t frame = 0;
  int face = 0;
  double mse = 0.0;
  double psnr = 0.0;
};

struct EvalDatasetSummary {
  std::string dataset;
  std::int64_t items = 0;
  double mean_psnr = 0.0;
  double floor_psnr = 0.0;
};

struct EvalConfig {
  std::vector<std::filesystem::path> dataset_dirs;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir;
  std::string model = "ssr";
  std::int64_t width = 64;
  std::int64_t w1 = 0;
  std::int64_t w2 = 0;
  std::uint64_t seed = 0;
  std::int64_t batch = 16;
  bool write_csv = false;
  bool dump_predictions = false;
};

struct EvalResult {
  std::vector<EvalItem> items;
  std::vector<EvalDatasetSummary> datasets;
  double overall_psnr = 0.0;
  std::filesystem::path metrics_path;
};

// Scores the checkpoint on the test split of every dataset dir: per-item
// PSNR, per-dataset means with a nearest-upsample floor, and the overall
// mean, written as JSON lines (plus eval.csv / predictions.fisamp when
// asked). PSNR is capped at 99 dB in aggregates.
EvalResult evaluate(const EvalConfig& config, std::ostream& log);

struct BenchConfig {
  int level_in = 7;
  int level_out = 9;
  std::int64_t channels = 3;
  std::int64_t width = 64;
  std::int64_t w1 = 0;
  std::int64_t w2 = 0;
  std::uint64_t seed = 0;
  std::int64_t batch = 16;
  int trials = 20;
  int warmup = 3;
  // at least one of the two must be set; each is benched when present
  std::filesystem::path checkpoint_ssr;
  std::filesystem::path checkpoint_transpose;
  std::filesystem::path out_dir;
};

struct BenchModelResult {
  std::string model;
  double mean_item_seconds = 0.0;
  double stdev_item_seconds = 0.0;
  double per_frame_seconds = 0.0;  // per-item mean times the 80 faces
};

struct BenchResult {
  std::vector<BenchModelResult> models;
  std::filesystem::path metrics_path;
};

// Forward-pass timing on synthetic batches: `trials` timed runs after
// `warmup` discarded ones, reported as per-item mean and sample stdev.
BenchResult bench(const BenchConfig& config, std::ostream& log);

}  // namespace fimesh
