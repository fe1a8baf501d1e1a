// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fimesh/common.hpp"
#include "fimesh/dataset.hpp"
#include "fimesh/engine.hpp"
#include "fimesh/operators.hpp"
#include "fimesh/resample.hpp"
#include "fimesh/rng.hpp"
#include "fimesh/rotations.hpp"
#include "fimesh/synth.hpp"
#include "fimesh/trimesh.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "fimesh 0.1.0";

fs::path cache_dir() {
  const char* env = std::getenv("FIMESH_CACHE_DIR");
  return (env && *env) ? fs::path(env) : fs::path(".fimesh-cache");
}

fs::path table_cache_path(int level) {
  return cache_dir() / ("rotations_L" + std::to_string(level) + ".firot");
}

// Loads the rotation table for a focused level: an explicit path wins, the
// cache is tried next, and a cache miss builds the table and saves it back.
fimesh::RotationTable obtain_table(const fs::path& explicit_path, int level,
                                   std::ostream& log) {
  if (!explicit_path.empty()) {
    fimesh::RotationTable t = fimesh::load_rotation_table(explicit_path);
    if (t.vertex_count() != fimesh::focused_vertex_count(level))
      throw fimesh::ConfigError("rotation table at " + explicit_path.string() +
                                " is not focused Level-" +
                                std::to_string(level));
    return t;
  }
  const fs::path cached = table_cache_path(level);
  if (fs::exists(cached)) return fimesh::load_rotation_table(cached);
  log << "rotation table not cached, building Level-" << level << "\n";
  fimesh::RotationTable t = fimesh::build_rotation_table(
      fimesh::canonical_level1(), fimesh::make_focused(level));
  fs::create_directories(cached.parent_path());
  fimesh::save_rotation_table(cached, t);
  log << "saved " << cached.string() << "\n";
  return t;
}

// Fills flags the user left at their defaults from a previously emitted
// resolved-config JSON, so reruns reproduce a run exactly while explicit
// flags still override. Missing keys keep the built-in defaults.
class ConfigFile {
 public:
  void load(const fs::path& path, const std::string& subcommand) {
    std::ifstream is(path);
    if (!is)
      throw fimesh::MissingInputError("cannot open config: " + path.string());
    nlohmann::json doc;
    try {
      is >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw fimesh::DataError("malformed config JSON: " + std::string(e.what()));
    }
    if (doc.contains("subcommand") &&
        doc["subcommand"].get<std::string>() != subcommand)
      throw fimesh::ConfigError("config file is for subcommand '" +
                                doc["subcommand"].get<std::string>() +
                                "', not '" + subcommand + "'");
    values_ = doc.contains("config") ? doc["config"] : doc;
  }

  template <typename T>
  void fill(const CLI::Option* opt, const char* key, T& value) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!values_.contains(key)) return;
    try {
      value = values_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw fimesh::DataError(std::string("config field has wrong type: ") + key);
    }
  }

  void fill(const CLI::Option* opt, const char* key, fs::path& value) const {
    std::string s = value.string();
    fill(opt, key, s);
    value = s;
  }

 private:
  nlohmann::json values_;
};

void write_resolved_config(const fs::path& path, const std::string& subcommand,
                           const ordered_json& config) {
  ordered_json doc;
  doc["tool"] = kVersion;
  doc["subcommand"] = subcommand;
  doc["config"] = config;
  fs::create_directories(fs::absolute(path).parent_path());
  std::ofstream os(path);
  if (!os)
    throw fimesh::MissingInputError("cannot write resolved config: " +
                                    path.string());
  os << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------- gen-mesh

struct GenMeshArgs {
  std::string kind = "focused";
  int level = 0;
  fs::path out;
  fs::path config;
  bool counts_only = false;
};

int run_gen_mesh(const GenMeshArgs& a) {
  if (a.kind != "full" && a.kind != "focused")
    throw fimesh::ConfigError("kind must be full or focused");
  const fimesh::TriMesh mesh = a.kind == "full" ? fimesh::make_full(a.level)
                                                : fimesh::make_focused(a.level);
  std::cout << a.kind << " level " << a.level << ": " << mesh.vertex_count()
            << " vertices, " << mesh.face_count() << " faces\n";
  if (a.counts_only) return 0;
  if (a.out.empty()) throw fimesh::ConfigError("--out is required");
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  fimesh::save_mesh(a.out, mesh);
  ordered_json cfg;
  cfg["kind"] = a.kind;
  cfg["level"] = a.level;
  cfg["out"] = a.out.string();
  write_resolved_config(a.out.string() + ".config.json", "gen-mesh", cfg);
  return 0;
}

// ----------------------------------------------------------------- gen-ops

struct GenOpsArgs {
  fs::path mesh;
  fs::path out;
  fs::path config;
  std::string weighting = "face-area";
};

int run_gen_ops(const GenOpsArgs& a) {
  if (a.mesh.empty() || a.out.empty())
    throw fimesh::ConfigError("--mesh and --out are required");
  auto mesh = std::make_shared<const fimesh::TriMesh>(fimesh::load_mesh(a.mesh));
  fimesh::OperatorOptions options;
  if (a.weighting == "face-area")
    options.weighting = fimesh::GradientWeighting::FaceArea;
  else if (a.weighting == "uniform")
    options.weighting = fimesh::GradientWeighting::Uniform;
  else
    throw fimesh::ConfigError("weighting must be face-area or uniform");
  const fimesh::OperatorSet ops = fimesh::build_operators(mesh, options);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  fimesh::save_operator_set(a.out, ops);
  std::cout << "operators for " << mesh->vertex_count() << " vertices -> "
            << a.out.string() << "\n";
  ordered_json cfg;
  cfg["mesh"] = a.mesh.string();
  cfg["out"] = a.out.string();
  cfg["weighting"] = a.weighting;
  write_resolved_config(a.out.string() + ".config.json", "gen-ops", cfg);
  return 0;
}

// --------------------------------------------------- precompute-rotations

struct RotArgs {
  int level = 7;
  fs::path out;
  fs::path config;
};

int run_rotations(const RotArgs& a) {
  fs::path out = a.out.empty() ? table_cache_path(a.level) : a.out;
  const fimesh::RotationTable t = fimesh::build_rotation_table(
      fimesh::canonical_level1(), fimesh::make_focused(a.level));
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  fimesh::save_rotation_table(out, t);
  double worst = 0.0;
  for (const Eigen::Matrix3d& m : t.maps)
    worst = std::max(worst, fimesh::orthogonality_deviation(m));
  std::cout << "rotation table level " << a.level << ": " << t.face_count()
            << " faces, " << t.vertex_count()
            << " vertices, orthogonality deviation " << worst << " -> "
            << out.string() << "\n";
  ordered_json cfg;
  cfg["level"] = a.level;
  cfg["out"] = out.string();
  write_resolved_config(out.string() + ".config.json", "precompute-rotations",
                        cfg);
  return 0;
}

// -------------------------------------------------------------- synth-frames

struct SynthArgs {
  std::string pattern = "natural";
  int width = 360;
  int channels = 3;
  int count = 20;
  std::uint64_t seed = 0;
  fs::path out;
  fs::path manifest_out;
  int level_in = 4;
  int level_out = 6;
  double train_fraction = 0.8;
  fs::path config;
};

int run_synth_frames(const SynthArgs& a) {
  if (a.out.empty()) throw fimesh::ConfigError("--out is required");
  if (a.count <= 0) throw fimesh::ConfigError("--count must be positive");
  if (a.channels != 1 && a.channels != 3)
    throw fimesh::ConfigError("--channels must be 1 or 3");
  const fimesh::SynthPattern pattern = fimesh::synth_pattern_from_name(a.pattern);
  fs::create_directories(a.out);

  auto seeds = fimesh::make_stream(a.seed, "synth/frames");
  std::vector<std::string> paths;
  paths.reserve(a.count);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t frame_seed = seeds();
    const fimesh::EquirectImage img =
        fimesh::synth_frame(pattern, a.width, a.channels, frame_seed);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", i);
    const fs::path p = a.out / name;
    fimesh::save_image(p, img);
    paths.push_back(p.string());
  }
  std::cout << "wrote " << a.count << " " << a.pattern << " frames ("
            << a.width << "x" << a.width / 2 << ", " << a.channels
            << " channels) to " << a.out.string() << "\n";

  if (!a.manifest_out.empty()) {
    fimesh::DatasetManifest man;
    man.frames = paths;
    man.train_fraction = a.train_fraction;
    man.seed = a.seed;
    man.level_in = a.level_in;
    man.level_out = a.level_out;
    man.channel_mode =
        a.channels == 1 ? fimesh::ChannelMode::Luma : fimesh::ChannelMode::Rgb;
    if (!a.manifest_out.parent_path().empty())
      fs::create_directories(a.manifest_out.parent_path());
    man.save(a.manifest_out);
    std::cout << "manifest -> " << a.manifest_out.string() << "\n";
  }

  ordered_json cfg;
  cfg["pattern"] = a.pattern;
  cfg["width"] = a.width;
  cfg["channels"] = a.channels;
  cfg["count"] = a.count;
  cfg["seed"] = a.seed;
  cfg["out"] = a.out.string();
  cfg["manifest_out"] = a.manifest_out.string();
  cfg["level_in"] = a.level_in;
  cfg["level_out"] = a.level_out;
  cfg["train_fraction"] = a.train_fraction;
  write_resolved_config(a.out / "resolved_config.json", "synth-frames", cfg);
  return 0;
}

// ------------------------------------------------------------ build-dataset

struct BuildArgs {
  fs::path manifest;
  fs::path table;
  fs::path out;
  int threads = 1;
  fs::path config;
};

int run_build_dataset(const BuildArgs& a) {
  if (a.manifest.empty() || a.out.empty())
    throw fimesh::ConfigError("--manifest and --out are required");
  const fimesh::DatasetManifest man = fimesh::DatasetManifest::load(a.manifest);
  const fimesh::RotationTable table =
      obtain_table(a.table, man.level_out, std::cerr);
  fs::create_directories(a.out);
  const fimesh::DatasetBuildStats stats =
      fimesh::build_dataset(man, table, a.out, a.threads, std::cerr);
  std::cout << "dataset: " << stats.train_items << " train items, "
            << stats.test_items << " test items";
  if (stats.skipped_frames > 0)
    std::cout << " (" << stats.skipped_frames << " frames skipped)";
  std::cout << " -> " << a.out.string() << "\n";
  ordered_json cfg;
  cfg["manifest"] = a.manifest.string();
  cfg["table"] = a.table.string();
  cfg["out"] = a.out.string();
  cfg["threads"] = a.threads;
  write_resolved_config(a.out / "resolved_config.json", "build-dataset", cfg);
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  fimesh::TrainConfig cfg;
  fs::path config;
};

ordered_json train_config_json(const fimesh::TrainConfig& c) {
  ordered_json j;
  j["dataset"] = c.dataset_dir.string();
  j["out"] = c.out_dir.string();
  j["model"] = c.model;
  j["optimizer"] = c.optimizer;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["width"] = c.width;
  j["w1"] = c.w1;
  j["w2"] = c.w2;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["queue_capacity"] = c.queue_capacity;
  return j;
}

int run_train(const TrainArgs& a) {
  if (a.cfg.dataset_dir.empty() || a.cfg.out_dir.empty())
    throw fimesh::ConfigError("--dataset and --out are required");
  fs::create_directories(a.cfg.out_dir);
  write_resolved_config(a.cfg.out_dir / "resolved_config.json", "train",
                        train_config_json(a.cfg));
  const fimesh::TrainResult r = fimesh::train(a.cfg, std::cerr);
  std::cout << "trained " << a.cfg.model << " for " << r.epochs_run
            << " epochs: best test PSNR " << r.best_test_psnr << " dB at epoch "
            << r.best_epoch << " (floor " << r.floor_psnr << " dB, "
            << r.trainable_parameters << " parameters)\n"
            << "checkpoints: " << r.best_checkpoint.string() << ", "
            << r.last_checkpoint.string() << "\n"
            << "metrics: " << r.metrics_path.string() << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  fimesh::EvalConfig cfg;
  std::vector<std::string> datasets;
  fs::path config;
};

int run_eval(EvalArgs& a) {
  for (const std::string& d : a.datasets) a.cfg.dataset_dirs.emplace_back(d);
  if (a.cfg.dataset_dirs.empty() || a.cfg.checkpoint.empty() ||
      a.cfg.out_dir.empty())
    throw fimesh::ConfigError("--dataset, --checkpoint and --out are required");
  fs::create_directories(a.cfg.out_dir);
  ordered_json cfg;
  cfg["datasets"] = a.datasets;
  cfg["checkpoint"] = a.cfg.checkpoint.string();
  cfg["out"] = a.cfg.out_dir.string();
  cfg["model"] = a.cfg.model;
  cfg["width"] = a.cfg.width;
  cfg["w1"] = a.cfg.w1;
  cfg["w2"] = a.cfg.w2;
  cfg["seed"] = a.cfg.seed;
  cfg["batch"] = a.cfg.batch;
  cfg["csv"] = a.cfg.write_csv;
  cfg["dump_predictions"] = a.cfg.dump_predictions;
  write_resolved_config(a.cfg.out_dir / "resolved_config.json", "eval", cfg);
  const fimesh::EvalResult r = fimesh::evaluate(a.cfg, std::cerr);
  for (const fimesh::EvalDatasetSummary& d : r.datasets)
    std::cout << d.dataset << ": mean PSNR " << d.mean_psnr << " dB over "
              << d.items << " items (floor " << d.floor_psnr << " dB)\n";
  std::cout << "overall: " << r.overall_psnr << " dB\n";
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  fimesh::BenchConfig cfg;
  fs::path config;
};

int run_bench(const BenchArgs& a) {
  if (a.cfg.out_dir.empty()) throw fimesh::ConfigError("--out is required");
  fs::create_directories(a.cfg.out_dir);
  ordered_json cfg;
  cfg["level_in"] = a.cfg.level_in;
  cfg["level_out"] = a.cfg.level_out;
  cfg["channels"] = a.cfg.channels;
  cfg["width"] = a.cfg.width;
  cfg["w1"] = a.cfg.w1;
  cfg["w2"] = a.cfg.w2;
  cfg["seed"] = a.cfg.seed;
  cfg["batch"] = a.cfg.batch;
  cfg["trials"] = a.cfg.trials;
  cfg["warmup"] = a.cfg.warmup;
  cfg["checkpoint_ssr"] = a.cfg.checkpoint_ssr.string();
  cfg["checkpoint_transpose"] = a.cfg.checkpoint_transpose.string();
  cfg["out"] = a.cfg.out_dir.string();
  write_resolved_config(a.cfg.out_dir / "resolved_config.json", "bench", cfg);
  const fimesh::BenchResult r = fimesh::bench(a.cfg, std::cerr);
  for (const fimesh::BenchModelResult& m : r.models)
    std::cout << m.model << ": " << m.mean_item_seconds * 1e3 << " ms/item +- "
              << m.stdev_item_seconds * 1e3 << " ms, "
              << m.per_frame_seconds * 1e3 << " ms/frame\n";
  return 0;
}

// ------------------------------------------------------------------ render

struct RenderArgs {
  fs::path signal;
  fs::path table;
  fs::path out;
  std::string faces = "all";
  std::string field = "target";
  std::int64_t frame = -1;  // default: first frame in the file
  int width = 0;            // default: equivalent resolution of the level
  fs::path config;
};

std::vector<int> parse_faces(const std::string& spec) {
  if (spec == "all") return fimesh::all_faces();
  std::vector<int> faces;
  std::string token;
  std::istringstream is(spec);
  while (std::getline(is, token, ',')) {
    if (token.empty()) continue;
    std::size_t used = 0;
    int face = 0;
    try {
      face = std::stoi(token, &used);
    } catch (const std::exception&) {
      throw fimesh::ConfigError("bad face id: " + token);
    }
    if (used != token.size() || face < 0 || face >= 80)
      throw fimesh::ConfigError("bad face id: " + token);
    faces.push_back(face);
  }
  if (faces.empty()) throw fimesh::ConfigError("no faces requested");
  return faces;
}

int run_render(const RenderArgs& a) {
  if (a.signal.empty() || a.out.empty())
    throw fimesh::ConfigError("--signal and --out are required");
  if (a.field != "target" && a.field != "input")
    throw fimesh::ConfigError("--field must be target or input");
  const std::vector<fimesh::SampleRecord> records =
      fimesh::load_sample_records(a.signal);
  if (records.empty()) throw fimesh::DataError("signal file has no records");
  const std::uint64_t frame =
      a.frame >= 0 ? static_cast<std::uint64_t>(a.frame) : records[0].frame;
  const bool use_target = a.field == "target";
  const int level = use_target ? records[0].level_out : records[0].level_in;
  const std::int64_t vertices = fimesh::focused_vertex_count(level);
  const std::int64_t channels = records[0].channels;

  // one signal per face of the chosen frame
  std::vector<const fimesh::SampleRecord*> by_face(80, nullptr);
  for (const fimesh::SampleRecord& rec : records)
    if (rec.frame == frame && by_face[rec.face] == nullptr)
      by_face[rec.face] = &rec;

  const std::vector<int> faces = parse_faces(a.faces);
  for (int f : faces)
    if (by_face[f] == nullptr)
      throw fimesh::MissingInputError("signal file has no face " +
                                      std::to_string(f) + " for frame " +
                                      std::to_string(frame));

  const fimesh::RotationTable table = obtain_table(a.table, level, std::cerr);
  auto mesh = std::make_shared<const fimesh::TriMesh>(fimesh::make_focused(level));
  const int width =
      a.width > 0
          ? a.width
          : fimesh::equivalent_resolution(fimesh::full_vertex_count(level)).width;

  // paint all requested faces into one frame: nearest patch vertex of the
  // pixel's face, looked up in the face's own signal
  fimesh::EquirectImage img =
      fimesh::make_image(width, width / 2, static_cast<int>(channels));
  const fimesh::TriMesh& l1 = fimesh::canonical_level1();
  const fimesh::PatchLattice lattice = fimesh::PatchLattice::build(mesh);
  std::vector<char> wanted(80, 0);
  for (int f : faces) wanted[f] = 1;
  std::vector<Eigen::Matrix3d> inverse(80);
  for (int f = 0; f < 80; ++f) inverse[f] = table.maps[f].inverse();
  for (int y = 0; y < img.height; ++y) {
    const double lat = fimesh::pixel_lat(y, img.height);
    for (int x = 0; x < img.width; ++x) {
      const Eigen::Vector3d p =
          fimesh::latlon_to_unit(lat, fimesh::pixel_lon(x, img.width));
      const int f = fimesh::face_of_point(l1, p);
      if (!wanted[f]) continue;
      const std::int64_t v = lattice.nearest_vertex((inverse[f] * p).normalized());
      const std::vector<float>& flat =
          use_target ? by_face[f]->target : by_face[f]->input;
      for (std::int64_t c = 0; c < channels; ++c)
        img.at(static_cast<int>(c), x, y) =
            static_cast<double>(flat[v * channels + c]);
    }
  }
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  fimesh::save_image(a.out, img);
  std::cout << "rendered frame " << frame << " (" << faces.size()
            << " faces, level " << level << ") -> " << a.out.string() << "\n";

  ordered_json cfg;
  cfg["signal"] = a.signal.string();
  cfg["table"] = a.table.string();
  cfg["out"] = a.out.string();
  cfg["faces"] = a.faces;
  cfg["field"] = a.field;
  cfg["frame"] = a.frame;
  cfg["width"] = a.width;
  write_resolved_config(a.out.string() + ".config.json", "render", cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Focused icosahedral mesh super-resolution pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenMeshArgs gen_mesh;
  CLI::App* sub_gen_mesh = app.add_subcommand("gen-mesh", "Build and save a mesh");
  CLI::Option* gm_kind = sub_gen_mesh->add_option("--kind", gen_mesh.kind,
                                                  "full | focused");
  CLI::Option* gm_level =
      sub_gen_mesh->add_option("--level", gen_mesh.level, "subdivision level");
  CLI::Option* gm_out = sub_gen_mesh->add_option("--out", gen_mesh.out,
                                                 "output mesh file");
  sub_gen_mesh->add_flag("--counts-only", gen_mesh.counts_only,
                         "print counts without writing");
  sub_gen_mesh->add_option("--config", gen_mesh.config,
                           "resolved-config JSON to rerun");

  GenOpsArgs gen_ops;
  CLI::App* sub_gen_ops =
      app.add_subcommand("gen-ops", "Build and save the operator set of a mesh");
  CLI::Option* go_mesh =
      sub_gen_ops->add_option("--mesh", gen_ops.mesh, "mesh file");
  CLI::Option* go_out =
      sub_gen_ops->add_option("--out", gen_ops.out, "output operator file");
  CLI::Option* go_weighting = sub_gen_ops->add_option(
      "--weighting", gen_ops.weighting, "face-area | uniform");
  sub_gen_ops->add_option("--config", gen_ops.config,
                          "resolved-config JSON to rerun");

  RotArgs rot;
  CLI::App* sub_rot = app.add_subcommand("precompute-rotations",
                                         "Build and save a rotation table");
  CLI::Option* rot_level =
      sub_rot->add_option("--level", rot.level, "focused mesh level");
  CLI::Option* rot_out = sub_rot->add_option(
      "--out", rot.out, "output table file (default: cache dir)");
  sub_rot->add_option("--config", rot.config, "resolved-config JSON to rerun");

  SynthArgs synth;
  CLI::App* sub_synth =
      app.add_subcommand("synth-frames", "Generate synthetic frames");
  CLI::Option* sy_pattern = sub_synth->add_option(
      "--pattern", synth.pattern, "natural | checker | gradient");
  CLI::Option* sy_width =
      sub_synth->add_option("--width", synth.width, "frame width (2:1 aspect)");
  CLI::Option* sy_channels =
      sub_synth->add_option("--channels", synth.channels, "1 or 3");
  CLI::Option* sy_count =
      sub_synth->add_option("--count", synth.count, "number of frames");
  CLI::Option* sy_seed = sub_synth->add_option("--seed", synth.seed, "seed");
  CLI::Option* sy_out =
      sub_synth->add_option("--out", synth.out, "output directory");
  CLI::Option* sy_manifest = sub_synth->add_option(
      "--manifest-out", synth.manifest_out, "also write a dataset manifest");
  CLI::Option* sy_lin = sub_synth->add_option("--level-in", synth.level_in,
                                              "manifest input level");
  CLI::Option* sy_lout = sub_synth->add_option("--level-out", synth.level_out,
                                               "manifest output level");
  CLI::Option* sy_frac = sub_synth->add_option(
      "--train-fraction", synth.train_fraction, "manifest train fraction");
  sub_synth->add_option("--config", synth.config,
                        "resolved-config JSON to rerun");

  BuildArgs build;
  CLI::App* sub_build =
      app.add_subcommand("build-dataset", "Sample frames into a dataset");
  CLI::Option* bd_manifest =
      sub_build->add_option("--manifest", build.manifest, "manifest JSON");
  CLI::Option* bd_table = sub_build->add_option(
      "--table", build.table, "rotation table (default: cache dir)");
  CLI::Option* bd_out =
      sub_build->add_option("--out", build.out, "output directory");
  CLI::Option* bd_threads =
      sub_build->add_option("--threads", build.threads, "worker threads");
  sub_build->add_option("--config", build.config,
                        "resolved-config JSON to rerun");

  TrainArgs train;
  CLI::App* sub_train = app.add_subcommand("train", "Train a model");
  CLI::Option* tr_dataset =
      sub_train->add_option("--dataset", train.cfg.dataset_dir, "dataset dir");
  CLI::Option* tr_out =
      sub_train->add_option("--out", train.cfg.out_dir, "output directory");
  CLI::Option* tr_model =
      sub_train->add_option("--model", train.cfg.model, "ssr | transpose");
  CLI::Option* tr_optimizer = sub_train->add_option(
      "--optimizer", train.cfg.optimizer, "adam | sgd");
  CLI::Option* tr_epochs =
      sub_train->add_option("--epochs", train.cfg.epochs, "epochs");
  CLI::Option* tr_batch =
      sub_train->add_option("--batch", train.cfg.batch, "batch size");
  CLI::Option* tr_lr = sub_train->add_option("--lr", train.cfg.lr, "learning rate");
  CLI::Option* tr_width =
      sub_train->add_option("--width", train.cfg.width, "trunk channels C");
  CLI::Option* tr_w1 = sub_train->add_option(
      "--w1", train.cfg.w1, "first upsampling width (0 = max(4, C/4))");
  CLI::Option* tr_w2 = sub_train->add_option(
      "--w2", train.cfg.w2, "second upsampling width (0 = max(4, w1/4))");
  CLI::Option* tr_seed = sub_train->add_option("--seed", train.cfg.seed, "seed");
  CLI::Option* tr_threads = sub_train->add_option(
      "--threads", train.cfg.threads, "1 = fully in-line, 2 = loader thread");
  CLI::Option* tr_queue = sub_train->add_option(
      "--queue-capacity", train.cfg.queue_capacity, "loader queue capacity");
  sub_train->add_option("--config", train.config,
                        "resolved-config JSON to rerun");

  EvalArgs eval;
  CLI::App* sub_eval = app.add_subcommand("eval", "Score a checkpoint");
  CLI::Option* ev_dataset = sub_eval->add_option(
      "--dataset", eval.datasets, "dataset dir (repeatable)");
  CLI::Option* ev_checkpoint =
      sub_eval->add_option("--checkpoint", eval.cfg.checkpoint, "checkpoint");
  CLI::Option* ev_out =
      sub_eval->add_option("--out", eval.cfg.out_dir, "output directory");
  CLI::Option* ev_model =
      sub_eval->add_option("--model", eval.cfg.model, "ssr | transpose");
  CLI::Option* ev_width =
      sub_eval->add_option("--width", eval.cfg.width, "trunk channels C");
  CLI::Option* ev_w1 = sub_eval->add_option("--w1", eval.cfg.w1, "first width");
  CLI::Option* ev_w2 = sub_eval->add_option("--w2", eval.cfg.w2, "second width");
  CLI::Option* ev_seed = sub_eval->add_option("--seed", eval.cfg.seed, "seed");
  CLI::Option* ev_batch =
      sub_eval->add_option("--batch", eval.cfg.batch, "batch size");
  sub_eval->add_flag("--csv", eval.cfg.write_csv, "also write eval.csv");
  sub_eval->add_flag("--dump-predictions", eval.cfg.dump_predictions,
                     "also write predictions.fisamp");
  sub_eval->add_option("--config", eval.config, "resolved-config JSON to rerun");

  BenchArgs bench;
  CLI::App* sub_bench =
      app.add_subcommand("bench", "Time model forward passes");
  CLI::Option* bn_lin =
      sub_bench->add_option("--level-in", bench.cfg.level_in, "input level");
  CLI::Option* bn_lout =
      sub_bench->add_option("--level-out", bench.cfg.level_out, "output level");
  CLI::Option* bn_channels =
      sub_bench->add_option("--channels", bench.cfg.channels, "input channels");
  CLI::Option* bn_width =
      sub_bench->add_option("--width", bench.cfg.width, "trunk channels C");
  CLI::Option* bn_w1 = sub_bench->add_option("--w1", bench.cfg.w1, "first width");
  CLI::Option* bn_w2 = sub_bench->add_option("--w2", bench.cfg.w2, "second width");
  CLI::Option* bn_seed = sub_bench->add_option("--seed", bench.cfg.seed, "seed");
  CLI::Option* bn_batch =
      sub_bench->add_option("--batch", bench.cfg.batch, "batch size");
  CLI::Option* bn_trials =
      sub_bench->add_option("--trials", bench.cfg.trials, "timed trials");
  CLI::Option* bn_warmup =
      sub_bench->add_option("--warmup", bench.cfg.warmup, "discarded runs");
  CLI::Option* bn_ssr = sub_bench->add_option(
      "--checkpoint-ssr", bench.cfg.checkpoint_ssr, "ssr checkpoint");
  CLI::Option* bn_transpose =
      sub_bench->add_option("--checkpoint-transpose",
                            bench.cfg.checkpoint_transpose,
                            "transpose checkpoint");
  CLI::Option* bn_out =
      sub_bench->add_option("--out", bench.cfg.out_dir, "output directory");
  sub_bench->add_option("--config", bench.config,
                        "resolved-config JSON to rerun");

  RenderArgs render;
  CLI::App* sub_render =
      app.add_subcommand("render", "Render mesh signals back to a frame");
  CLI::Option* rn_signal =
      sub_render->add_option("--signal", render.signal, "sample records file");
  CLI::Option* rn_table = sub_render->add_option(
      "--table", render.table, "rotation table (default: cache dir)");
  CLI::Option* rn_out = sub_render->add_option("--out", render.out, "output image");
  CLI::Option* rn_faces =
      sub_render->add_option("--faces", render.faces, "all or i,j,k");
  CLI::Option* rn_field =
      sub_render->add_option("--field", render.field, "target | input");
  CLI::Option* rn_frame =
      sub_render->add_option("--frame", render.frame, "frame id (default: first)");
  CLI::Option* rn_width =
      sub_render->add_option("--width", render.width, "output width");
  sub_render->add_option("--config", render.config,
                         "resolved-config JSON to rerun");

  try {
    app.parse(argc, argv);

    if (sub_gen_mesh->parsed()) {
      if (!gen_mesh.config.empty()) {
        ConfigFile f;
        f.load(gen_mesh.config, "gen-mesh");
        f.fill(gm_kind, "kind", gen_mesh.kind);
        f.fill(gm_level, "level", gen_mesh.level);
        f.fill(gm_out, "out", gen_mesh.out);
      }
      return run_gen_mesh(gen_mesh);
    }
    if (sub_gen_ops->parsed()) {
      if (!gen_ops.config.empty()) {
        ConfigFile f;
        f.load(gen_ops.config, "gen-ops");
        f.fill(go_mesh, "mesh", gen_ops.mesh);
        f.fill(go_out, "out", gen_ops.out);
        f.fill(go_weighting, "weighting", gen_ops.weighting);
      }
      return run_gen_ops(gen_ops);
    }
    if (sub_rot->parsed()) {
      if (!rot.config.empty()) {
        ConfigFile f;
        f.load(rot.config, "precompute-rotations");
        f.fill(rot_level, "level", rot.level);
        f.fill(rot_out, "out", rot.out);
      }
      return run_rotations(rot);
    }
    if (sub_synth->parsed()) {
      if (!synth.config.empty()) {
        ConfigFile f;
        f.load(synth.config, "synth-frames");
        f.fill(sy_pattern, "pattern", synth.pattern);
        f.fill(sy_width, "width", synth.width);
        f.fill(sy_channels, "channels", synth.channels);
        f.fill(sy_count, "count", synth.count);
        f.fill(sy_seed, "seed", synth.seed);
        f.fill(sy_out, "out", synth.out);
        f.fill(sy_manifest, "manifest_out", synth.manifest_out);
        f.fill(sy_lin, "level_in", synth.level_in);
        f.fill(sy_lout, "level_out", synth.level_out);
        f.fill(sy_frac, "train_fraction", synth.train_fraction);
      }
      return run_synth_frames(synth);
    }
    if (sub_build->parsed()) {
      if (!build.config.empty()) {
        ConfigFile f;
        f.load(build.config, "build-dataset");
        f.fill(bd_manifest, "manifest", build.manifest);
        f.fill(bd_table, "table", build.table);
        f.fill(bd_out, "out", build.out);
        f.fill(bd_threads, "threads", build.threads);
      }
      return run_build_dataset(build);
    }
    if (sub_train->parsed()) {
      if (!train.config.empty()) {
        ConfigFile f;
        f.load(train.config, "train");
        f.fill(tr_dataset, "dataset", train.cfg.dataset_dir);
        f.fill(tr_out, "out", train.cfg.out_dir);
        f.fill(tr_model, "model", train.cfg.model);
        f.fill(tr_optimizer, "optimizer", train.cfg.optimizer);
        f.fill(tr_epochs, "epochs", train.cfg.epochs);
        f.fill(tr_batch, "batch", train.cfg.batch);
        f.fill(tr_lr, "lr", train.cfg.lr);
        f.fill(tr_width, "width", train.cfg.width);
        f.fill(tr_w1, "w1", train.cfg.w1);
        f.fill(tr_w2, "w2", train.cfg.w2);
        f.fill(tr_seed, "seed", train.cfg.seed);
        f.fill(tr_threads, "threads", train.cfg.threads);
        f.fill(tr_queue, "queue_capacity", train.cfg.queue_capacity);
      }
      return run_train(train);
    }
    if (sub_eval->parsed()) {
      if (!eval.config.empty()) {
        ConfigFile f;
        f.load(eval.config, "eval");
        f.fill(ev_dataset, "datasets", eval.datasets);
        f.fill(ev_checkpoint, "checkpoint", eval.cfg.checkpoint);
        f.fill(ev_out, "out", eval.cfg.out_dir);
        f.fill(ev_model, "model", eval.cfg.model);
        f.fill(ev_width, "width", eval.cfg.width);
        f.fill(ev_w1, "w1", eval.cfg.w1);
        f.fill(ev_w2, "w2", eval.cfg.w2);
        f.fill(ev_seed, "seed", eval.cfg.seed);
        f.fill(ev_batch, "batch", eval.cfg.batch);
      }
      return run_eval(eval);
    }
    if (sub_bench->parsed()) {
      if (!bench.config.empty()) {
        ConfigFile f;
        f.load(bench.config, "bench");
        f.fill(bn_lin, "level_in", bench.cfg.level_in);
        f.fill(bn_lout, "level_out", bench.cfg.level_out);
        f.fill(bn_channels, "channels", bench.cfg.channels);
        f.fill(bn_width, "width", bench.cfg.width);
        f.fill(bn_w1, "w1", bench.cfg.w1);
        f.fill(bn_w2, "w2", bench.cfg.w2);
        f.fill(bn_seed, "seed", bench.cfg.seed);
        f.fill(bn_batch, "batch", bench.cfg.batch);
        f.fill(bn_trials, "trials", bench.cfg.trials);
        f.fill(bn_warmup, "warmup", bench.cfg.warmup);
        f.fill(bn_ssr, "checkpoint_ssr", bench.cfg.checkpoint_ssr);
        f.fill(bn_transpose, "checkpoint_transpose",
               bench.cfg.checkpoint_transpose);
        f.fill(bn_out, "out", bench.cfg.out_dir);
      }
      return run_bench(bench);
    }
    if (sub_render->parsed()) {
      if (!render.config.empty()) {
        ConfigFile f;
        f.load(render.config, "render");
        f.fill(rn_signal, "signal", render.signal);
        f.fill(rn_table, "table", render.table);
        f.fill(rn_out, "out", render.out);
        f.fill(rn_faces, "faces", render.faces);
        f.fill(rn_field, "field", render.field);
        f.fill(rn_frame, "frame", render.frame);
        f.fill(rn_width, "width", render.width);
      }
      return run_render(render);
    }
    return 2;  // unreachable with require_subcommand(1)
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const fimesh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fimesh::MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const fimesh::DataError& e) {
    std::cerr << "bad data: " << e.what() << "\n";
    return 3;
  } catch (const fimesh::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  }
}
