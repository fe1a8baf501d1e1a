// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the installed binary end to end on a tiny corpus: subcommand
// plumbing, exit codes, metrics schema validity, resolved-config reruns
// and file idempotence. Invoke with the binary path as argv[1].

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "schema_check.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
  if (!ok) ++g_failures;
}

std::string g_binary;
fs::path g_dir;

// Runs the binary with the scratch cache dir; returns the exit code.
int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = "FIMESH_CACHE_DIR='" + (g_dir / "cache").string() + "' '" +
                    g_binary + "' " + args;
  cmd += stdout_file.empty() ? " >/dev/null" : " >'" + stdout_file + "'";
  cmd += " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b);
}

// Validates every line of a JSON-lines file against the metrics schema.
bool schema_valid(const fs::path& file, const nlohmann::json& schema) {
  std::ifstream is(file);
  if (!is) return false;
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++lines;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      std::cout << "  not JSON: " << line << "\n";
      return false;
    }
    const std::string err = schema_check::validate(schema, row);
    if (!err.empty()) {
      std::cout << "  schema violation in " << file.filename().string() << ": "
                << err << "\n";
      return false;
    }
  }
  return lines > 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_smoke <fimesh-binary>\n";
    return 1;
  }
  g_binary = argv[1];
  g_dir = fs::temp_directory_path() / "fimesh_cli_smoke";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  const fs::path d = g_dir;

  nlohmann::json schema;
  {
    std::ifstream is(fs::path(FIMESH_SCHEMA_DIR) / "metrics.schema.json");
    if (!is) {
      std::cerr << "metrics schema not found\n";
      return 1;
    }
    is >> schema;
  }

  // --- exit codes -----------------------------------------------------
  check(run("") == 2, "no subcommand exits 2");
  check(run("gen-mesh --kind bogus --level 2 --counts-only") == 2,
        "bad enum value exits 2");
  check(run("train --dataset " + (d / "nope").string() + " --out " +
            (d / "x").string()) == 3,
        "missing dataset exits 3");
  check(run("--version") == 0, "--version exits 0");
  check(run("--help") == 0, "--help exits 0");

  // --- mesh and operator files ----------------------------------------
  check(run("gen-mesh --kind full --level 3 --counts-only",
            (d / "counts.txt").string()) == 0,
        "gen-mesh counts-only runs");
  check(slurp(d / "counts.txt").find("642 vertices") != std::string::npos,
        "full level 3 reports 642 vertices");
  const fs::path mesh = d / "focused4.fimesh";
  check(run("gen-mesh --kind focused --level 4 --out " + mesh.string()) == 0,
        "gen-mesh writes a mesh");
  check(fs::exists(mesh.string() + ".config.json"), "gen-mesh resolved config");
  const fs::path ops = d / "focused4.fiops";
  check(run("gen-ops --mesh " + mesh.string() + " --out " + ops.string()) == 0,
        "gen-ops runs on the saved mesh");
  check(fs::file_size(ops) > 0, "operator file is non-empty");

  const fs::path table = d / "table4.firot";
  check(run("precompute-rotations --level 4 --out " + table.string()) == 0,
        "precompute-rotations runs");

  // --- frames and dataset ----------------------------------------------
  const fs::path frames = d / "frames";
  const fs::path manifest = d / "manifest.json";
  check(run("synth-frames --count 4 --width 360 --seed 5 --out " +
            frames.string() + " --manifest-out " + manifest.string() +
            " --level-in 4 --level-out 6") == 0,
        "synth-frames writes frames and a manifest");
  check(fs::exists(frames / "frame_0003.png"), "four frames on disk");

  const fs::path ds = d / "ds";
  check(run("build-dataset --manifest " + manifest.string() + " --out " +
            ds.string()) == 0,
        "build-dataset runs (cache-building its table)");
  check(fs::exists(d / "cache" / "rotations_L6.firot"),
        "rotation table landed in the cache dir");

  const fs::path ds2 = d / "ds2";
  check(run("build-dataset --manifest " + manifest.string() + " --out " +
            ds2.string()) == 0,
        "build-dataset reruns");
  check(same_bytes(ds / "train.fisamp", ds2 / "train.fisamp") &&
            same_bytes(ds / "test.fisamp", ds2 / "test.fisamp"),
        "dataset files are idempotent");

  // --- train, schema, rerun --------------------------------------------
  const fs::path run1 = d / "run1";
  check(run("train --dataset " + ds.string() + " --out " + run1.string() +
            " --width 8 --epochs 2 --batch 16 --lr 0.005 --seed 1") == 0,
        "train runs");
  check(schema_valid(run1 / "metrics.jsonl", schema),
        "train metrics match the schema");
  check(fs::exists(run1 / "best.ckpt") && fs::exists(run1 / "last.ckpt"),
        "train writes both checkpoints");

  const fs::path run2 = d / "run2";
  check(run("train --config " + (run1 / "resolved_config.json").string() +
            " --out " + run2.string()) == 0,
        "train reruns from its resolved config");
  check(same_bytes(run1 / "best.ckpt", run2 / "best.ckpt") &&
            same_bytes(run1 / "last.ckpt", run2 / "last.ckpt"),
        "rerun checkpoints are bit-identical");

  const fs::path run0 = d / "run0";
  check(run("train --dataset " + ds.string() + " --out " + run0.string() +
            " --model transpose --width 8 --epochs 0 --seed 1") == 0,
        "epochs=0 emits the initial checkpoint");
  check(fs::exists(run0 / "last.ckpt"), "initial checkpoint exists");

  // --- eval, predictions, render ----------------------------------------
  const fs::path ev = d / "eval";
  check(run("eval --dataset " + ds.string() + " --checkpoint " +
            (run1 / "best.ckpt").string() + " --out " + ev.string() +
            " --width 8 --csv --dump-predictions") == 0,
        "eval runs");
  check(schema_valid(ev / "eval.jsonl", schema), "eval metrics match the schema");
  check(fs::exists(ev / "eval.csv"), "eval csv written");

  const fs::path pred_png = d / "pred.png";
  check(run("render --signal " + (ev / "predictions.fisamp").string() +
            " --out " + pred_png.string() + " --faces all") == 0,
        "render paints predictions");
  check(fs::exists(pred_png) && fs::file_size(pred_png) > 0,
        "render output non-empty");
  check(run("render --signal " + (ds / "test.fisamp").string() +
            " --field input --faces 0,5,79 --out " + (d / "in.png").string()) ==
            0,
        "render paints selected input faces");
  check(run("render --signal " + (ds / "test.fisamp").string() +
            " --faces 80 --out " + (d / "bad.png").string()) == 2,
        "render rejects face ids out of range");

  // --- bench -------------------------------------------------------------
  const fs::path bench = d / "bench";
  check(run("bench --level-in 4 --level-out 6 --width 8 --trials 3 --warmup 1 "
            "--checkpoint-ssr " +
            (run1 / "best.ckpt").string() + " --checkpoint-transpose " +
            (run0 / "last.ckpt").string() + " --out " + bench.string()) == 0,
        "bench runs on both checkpoints");
  check(schema_valid(bench / "bench.jsonl", schema),
        "bench metrics match the schema");

  std::cout << (g_failures == 0 ? "ALL OK\n" : "FAILURES\n");
  return g_failures == 0 ? 0 : 1;
}
