// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fimesh/rotations.hpp"

namespace fimesh {

enum class ChannelMode : std::uint8_t { Rgb = 0, Luma = 1 };

ChannelMode channel_mode_from_name(const std::string& name);
std::string channel_mode_name(ChannelMode mode);

struct DatasetManifest {
  std::vector<std::string> frames;  // image file paths
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int level_in = 7;
  int level_out = 9;
  ChannelMode channel_mode = ChannelMode::Rgb;

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// One (frame, face) pair. Vertex counts are implied by the levels:
// focused_vertex_count(level_in) and focused_vertex_count(level_out).
struct SampleRecord {
  std::uint64_t frame = 0;
  std::uint8_t face = 0;
  std::uint8_t channels = 0;
  std::uint8_t level_in = 0;
  std::uint8_t level_out = 0;
  std::vector<float> input;
  std::vector<float> target;
};

// Frame-level split: a seeded shuffle of the frame indices with the first
// floor(n * fraction + 0.5) assigned to train. Depends only on (n, fraction,
// seed), never on frame contents.
struct SplitAssignment {
  std::vector<char> is_train;
  std::size_t train_count = 0;
};
SplitAssignment split_frames(std::size_t count, double fraction, std::uint64_t seed);

struct DatasetBuildStats {
  std::size_t train_items = 0;
  std::size_t test_items = 0;
  std::size_t skipped_frames = 0;
};

// Writes out_dir/train.fisamp, out_dir/test.fisamp and a dataset.json
// summary. Emission order is frame-major, face-minor regardless of the
// worker count. Unreadable frames are skipped with a warning on `log`;
// undecodable ones abort.
DatasetBuildStats build_dataset(const DatasetManifest& manifest,
                                const RotationTable& table,
                                const std::filesystem::path& out_dir,
                                int threads, std::ostream& log);

void write_sample_record(std::ostream& os, const SampleRecord& rec);
std::vector<SampleRecord> load_sample_records(const std::filesystem::path& path);

}  // namespace fimesh
