// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/dataset.hpp"

#include <json.hpp>

#include <condition_variable>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include "fimesh/common.hpp"
#include "fimesh/equirect.hpp"
#include "fimesh/resample.hpp"
#include "fimesh/rng.hpp"

namespace fimesh {

ChannelMode channel_mode_from_name(const std::string& name) {
  if (name == "rgb") return ChannelMode::Rgb;
  if (name == "luma") return ChannelMode::Luma;
  throw ConfigError("unknown channel mode: " + name);
}

std::string channel_mode_name(ChannelMode mode) {
  return mode == ChannelMode::Rgb ? "rgb" : "luma";
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest JSON: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    m.frames = j.at("frames").get<std::vector<std::string>>();
    m.train_fraction = j.value("train_fraction", 0.8);
    m.seed = j.value("seed", std::uint64_t{0});
    m.level_in = j.value("level_in", 7);
    m.level_out = j.value("level_out", 9);
    m.channel_mode = channel_mode_from_name(j.value("channel_mode", "rgb"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest missing fields: " + std::string(e.what()));
  }
  if (m.train_fraction < 0.0 || m.train_fraction > 1.0)
    throw ConfigError("train_fraction must be in [0,1]");
  if (m.level_in < 1 || m.level_out <= m.level_in)
    throw ConfigError("need 1 <= level_in < level_out");
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["frames"] = frames;
  j["train_fraction"] = train_fraction;
  j["seed"] = seed;
  j["level_in"] = level_in;
  j["level_out"] = level_out;
  j["channel_mode"] = channel_mode_name(channel_mode);
  std::ofstream os(path);
  if (!os) throw MissingInputError("cannot write manifest: " + path.string());
  os << j.dump(2) << "\n";
}

SplitAssignment split_frames(std::size_t count, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = i;
  auto rng = make_stream(seed, "split");
  fisher_yates(ids, rng);
  SplitAssignment s;
  s.train_count = static_cast<std::size_t>(
      std::floor(static_cast<double>(count) * fraction + 0.5));
  s.is_train.assign(count, 0);
  for (std::size_t i = 0; i < s.train_count; ++i) s.is_train[ids[i]] = 1;
  return s;
}

namespace {

constexpr char kSampMagic[9] = "FISAMP01";

struct FrameResult {
  bool skipped = false;
  std::vector<SampleRecord> records;
  std::exception_ptr error;
  std::string warning;
};

FrameResult process_frame(const DatasetManifest& man, const RotationTable& table,
                          std::shared_ptr<const TriMesh> mesh_in,
                          std::shared_ptr<const TriMesh> mesh_out,
                          int input_width, std::size_t frame_id) {
  FrameResult res;
  EquirectImage img;
  try {
    img = load_image(man.frames[frame_id]);
  } catch (const MissingInputError& e) {
    res.skipped = true;
    res.warning = e.what();
    return res;
  }
  if (img.width != 2 * img.height)
    throw DataError("frame is not 2:1 equirectangular: " + man.frames[frame_id]);
  if (img.width < input_width)
    throw DataError("frame smaller than the input resolution: " +
                    man.frames[frame_id]);
  if (man.channel_mode == ChannelMode::Luma) img = to_luminance(img);

  const EquirectImage low = downscale_equirect(img, input_width);
  res.records.reserve(80);
  for (int face = 0; face < 80; ++face) {
    const MeshSignal in = sample_to_mesh(low, table, face, mesh_in);
    const MeshSignal out = sample_to_mesh(img, table, face, mesh_out);
    SampleRecord rec;
    rec.frame = frame_id;
    rec.face = static_cast<std::uint8_t>(face);
    rec.channels = static_cast<std::uint8_t>(in.channels());
    rec.level_in = static_cast<std::uint8_t>(man.level_in);
    rec.level_out = static_cast<std::uint8_t>(man.level_out);
    rec.input.assign(in.values.data(), in.values.data() + in.values.size());
    rec.target.assign(out.values.data(), out.values.data() + out.values.size());
    res.records.push_back(std::move(rec));
  }
  return res;
}

}  // namespace

void write_sample_record(std::ostream& os, const SampleRecord& rec) {
  BinaryWriter w(os);
  w.magic(kSampMagic);
  w.pod<std::uint64_t>(rec.frame);
  w.pod<std::uint8_t>(rec.face);
  w.pod<std::uint8_t>(rec.channels);
  w.pod<std::uint8_t>(rec.level_in);
  w.pod<std::uint8_t>(rec.level_out);
  w.bytes(rec.input.data(), sizeof(float) * rec.input.size());
  w.bytes(rec.target.data(), sizeof(float) * rec.target.size());
}

std::vector<SampleRecord> load_sample_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open samples: " + path.string());
  BinaryReader r(is);
  std::vector<SampleRecord> out;
  while (r.more()) {
    r.expect_magic(kSampMagic);
    SampleRecord rec;
    rec.frame = r.pod<std::uint64_t>();
    rec.face = r.pod<std::uint8_t>();
    rec.channels = r.pod<std::uint8_t>();
    rec.level_in = r.pod<std::uint8_t>();
    rec.level_out = r.pod<std::uint8_t>();
    if (rec.face >= 80 || (rec.channels != 1 && rec.channels != 3) ||
        rec.level_in < 1 || rec.level_in >= rec.level_out || rec.level_out > 24)
      throw DataError("implausible sample record header");
    rec.input.resize(static_cast<std::size_t>(rec.channels) *
                     focused_vertex_count(rec.level_in));
    rec.target.resize(static_cast<std::size_t>(rec.channels) *
                      focused_vertex_count(rec.level_out));
    r.bytes(rec.input.data(), sizeof(float) * rec.input.size());
    r.bytes(rec.target.data(), sizeof(float) * rec.target.size());
    out.push_back(std::move(rec));
  }
  return out;
}

DatasetBuildStats build_dataset(const DatasetManifest& manifest,
                                const RotationTable& table,
                                const std::filesystem::path& out_dir,
                                int threads, std::ostream& log) {
  if (manifest.frames.empty()) throw ConfigError("manifest lists no frames");
  if (manifest.level_out != table.focused_level)
    throw ConfigError("rotation table level " +
                      std::to_string(table.focused_level) +
                      " does not match level_out " +
                      std::to_string(manifest.level_out));

  auto mesh_in = std::make_shared<const TriMesh>(make_focused(manifest.level_in));
  auto mesh_out = std::make_shared<const TriMesh>(make_focused(manifest.level_out));
  const int input_width =
      equivalent_resolution(full_vertex_count(manifest.level_in)).width;

  std::filesystem::create_directories(out_dir);
  std::ofstream train_os(out_dir / "train.fisamp", std::ios::binary);
  std::ofstream test_os(out_dir / "test.fisamp", std::ios::binary);
  if (!train_os || !test_os)
    throw MissingInputError("cannot write into " + out_dir.string());

  const SplitAssignment split =
      split_frames(manifest.frames.size(), manifest.train_fraction, manifest.seed);

  const std::size_t n = manifest.frames.size();
  std::vector<std::unique_ptr<FrameResult>> done(n);
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next_claim = 0;

  const int workers = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t id;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next_claim >= n) return;
          id = next_claim++;
        }
        auto res = std::make_unique<FrameResult>();
        try {
          *res = process_frame(manifest, table, mesh_in, mesh_out, input_width, id);
        } catch (...) {
          res->error = std::current_exception();
        }
        {
          std::lock_guard<std::mutex> lk(mu);
          done[id] = std::move(res);
        }
        cv.notify_all();
      }
    });
  }

  DatasetBuildStats stats;
  try {
    for (std::size_t id = 0; id < n; ++id) {
      std::unique_ptr<FrameResult> res;
      {
        std::unique_lock<std::mutex> lk(mu);
        cv.wait(lk, [&] { return done[id] != nullptr; });
        res = std::move(done[id]);
      }
      if (res->error) std::rethrow_exception(res->error);
      if (res->skipped) {
        ++stats.skipped_frames;
        log << "warning: skipping frame " << id << ": " << res->warning << "\n";
        continue;
      }
      std::ostream& os = split.is_train[id] ? train_os : test_os;
      for (const SampleRecord& rec : res->records) write_sample_record(os, rec);
      (split.is_train[id] ? stats.train_items : stats.test_items) +=
          res->records.size();
    }
  } catch (...) {
    {
      std::lock_guard<std::mutex> lk(mu);
      next_claim = n;  // stop idle workers
    }
    for (auto& t : pool) t.join();
    throw;
  }
  for (auto& t : pool) t.join();

  nlohmann::json j;
  j["frames"] = manifest.frames.size();
  j["train_items"] = stats.train_items;
  j["test_items"] = stats.test_items;
  j["skipped_frames"] = stats.skipped_frames;
  j["train_frames"] = split.train_count;
  j["level_in"] = manifest.level_in;
  j["level_out"] = manifest.level_out;
  j["channel_mode"] = channel_mode_name(manifest.channel_mode);
  j["seed"] = manifest.seed;
  j["input_width"] = input_width;
  std::ofstream js(out_dir / "dataset.json");
  js << j.dump(2) << "\n";

  return stats;
}

}  // namespace fimesh
