// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fimesh/common.hpp"
#include "fimesh/synth.hpp"

using namespace fimesh;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempCorpus {
  std::filesystem::path dir;
  DatasetManifest manifest;

  explicit TempCorpus(int frames, int width = 128) {
    dir = std::filesystem::temp_directory_path() /
          ("fimesh_ds_" + std::to_string(::getpid()) + "_" +
           std::to_string(frames));
    std::filesystem::create_directories(dir);
    for (int i = 0; i < frames; ++i) {
      const auto path = dir / ("frame_" + std::to_string(i) + ".png");
      save_image(path, synth_frame(SynthPattern::Natural, width, 3,
                                   static_cast<std::uint64_t>(i)));
      manifest.frames.push_back(path.string());
    }
    manifest.level_in = 3;
    manifest.level_out = 4;
    manifest.seed = 11;
  }
  ~TempCorpus() { std::filesystem::remove_all(dir); }
};

}  // namespace

TEST_CASE("frame split is an exact deterministic fraction") {
  const SplitAssignment s = split_frames(345, 0.8, 123);
  CHECK(s.train_count == 276);
  std::size_t trains = 0;
  for (char c : s.is_train) trains += c;
  CHECK(trains == 276);
  CHECK(s.is_train.size() == 345);

  const SplitAssignment again = split_frames(345, 0.8, 123);
  CHECK(s.is_train == again.is_train);
  const SplitAssignment other = split_frames(345, 0.8, 124);
  CHECK(s.is_train != other.is_train);

  CHECK(split_frames(10, 0.0, 1).train_count == 0);
  CHECK(split_frames(10, 1.0, 1).train_count == 10);
}

TEST_CASE("dataset build emits 80 ordered items per frame") {
  TempCorpus corpus(3);
  const RotationTable table =
      build_rotation_table(canonical_level1(), make_focused(4));

  std::ostringstream log;
  const auto out = corpus.dir / "out";
  const DatasetBuildStats stats =
      build_dataset(corpus.manifest, table, out, 1, log);

  // 3 frames, fraction 0.8 -> floor(2.4 + 0.5) = 2 train frames
  CHECK(stats.train_items == 160);
  CHECK(stats.test_items == 80);
  CHECK(stats.skipped_frames == 0);

  const auto train = load_sample_records(out / "train.fisamp");
  REQUIRE(train.size() == 160);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const SampleRecord& r = train[i];
    CHECK(r.face == i % 80);  // face-minor order
    CHECK(r.channels == 3);
    CHECK(r.level_in == 3);
    CHECK(r.level_out == 4);
    CHECK(r.input.size() == 3u * focused_vertex_count(3));
    CHECK(r.target.size() == 3u * focused_vertex_count(4));
    for (float v : r.input) CHECK((v >= 0.0f && v <= 1.0f));
  }
  // frame-major order
  CHECK(train[0].frame == train[79].frame);
  CHECK(train[0].frame != train[80].frame);
}

TEST_CASE("dataset build is bitwise deterministic and thread-invariant") {
  TempCorpus corpus(3);
  const RotationTable table =
      build_rotation_table(canonical_level1(), make_focused(4));
  std::ostringstream log;

  const auto out1 = corpus.dir / "out1";
  const auto out2 = corpus.dir / "out2";
  const auto out3 = corpus.dir / "out3";
  build_dataset(corpus.manifest, table, out1, 1, log);
  build_dataset(corpus.manifest, table, out2, 1, log);
  build_dataset(corpus.manifest, table, out3, 3, log);

  CHECK(slurp(out1 / "train.fisamp") == slurp(out2 / "train.fisamp"));
  CHECK(slurp(out1 / "test.fisamp") == slurp(out2 / "test.fisamp"));
  CHECK(slurp(out1 / "train.fisamp") == slurp(out3 / "train.fisamp"));
  CHECK(slurp(out1 / "test.fisamp") == slurp(out3 / "test.fisamp"));
}

TEST_CASE("unreadable frames are skipped, undecodable ones abort") {
  TempCorpus corpus(2);
  const RotationTable table =
      build_rotation_table(canonical_level1(), make_focused(4));

  SUBCASE("missing file") {
    corpus.manifest.frames.push_back((corpus.dir / "missing.png").string());
    std::ostringstream log;
    const DatasetBuildStats stats =
        build_dataset(corpus.manifest, table, corpus.dir / "o", 1, log);
    CHECK(stats.skipped_frames == 1);
    CHECK(log.str().find("warning: skipping frame 2") != std::string::npos);
    CHECK(stats.train_items + stats.test_items == 160);
  }
  SUBCASE("corrupt file") {
    const auto bad = corpus.dir / "bad.png";
    std::ofstream(bad) << "not a png";
    corpus.manifest.frames.push_back(bad.string());
    std::ostringstream log;
    CHECK_THROWS_AS(
        build_dataset(corpus.manifest, table, corpus.dir / "o", 1, log),
        DataError);
  }
}

TEST_CASE("luma mode emits single-channel records") {
  TempCorpus corpus(1);
  corpus.manifest.channel_mode = ChannelMode::Luma;
  const RotationTable table =
      build_rotation_table(canonical_level1(), make_focused(4));
  std::ostringstream log;
  build_dataset(corpus.manifest, table, corpus.dir / "o", 1, log);
  const auto recs = load_sample_records(corpus.dir / "o" / "test.fisamp");
  // single frame, fraction 0.8 -> floor(0.8 + 0.5) = 1 train frame
  const auto trains = load_sample_records(corpus.dir / "o" / "train.fisamp");
  CHECK(trains.size() == 80);
  CHECK(recs.empty());
  CHECK(trains[0].channels == 1);
  CHECK(trains[0].input.size() == focused_vertex_count(3));
}

TEST_CASE("manifest json round-trips") {
  DatasetManifest m;
  m.frames = {"a.png", "b.png"};
  m.train_fraction = 0.5;
  m.seed = 77;
  m.level_in = 4;
  m.level_out = 6;
  m.channel_mode = ChannelMode::Luma;
  const auto path = std::filesystem::temp_directory_path() / "fimesh_man.json";
  m.save(path);
  const DatasetManifest back = DatasetManifest::load(path);
  CHECK(back.frames == m.frames);
  CHECK(back.train_fraction == m.train_fraction);
  CHECK(back.seed == m.seed);
  CHECK(back.level_in == 4);
  CHECK(back.level_out == 6);
  CHECK(back.channel_mode == ChannelMode::Luma);
  std::filesystem::remove(path);

  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(DatasetManifest::load(path), DataError);
  std::ofstream(path, std::ios::trunc) << "{\"frames\": [\"x\"], \"level_in\": 5, \"level_out\": 5}";
  CHECK_THROWS_AS(DatasetManifest::load(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(DatasetManifest::load(path), MissingInputError);
}

TEST_CASE("sample record files reject corrupted headers") {
  SampleRecord rec;
  rec.frame = 1;
  rec.face = 90;  // invalid
  rec.channels = 1;
  rec.level_in = 3;
  rec.level_out = 4;
  rec.input.resize(focused_vertex_count(3));
  rec.target.resize(focused_vertex_count(4));
  const auto path = std::filesystem::temp_directory_path() / "fimesh_bad.fisamp";
  {
    std::ofstream os(path, std::ios::binary);
    write_sample_record(os, rec);
  }
  CHECK_THROWS_AS(load_sample_records(path), DataError);
  std::filesystem::remove(path);
}
