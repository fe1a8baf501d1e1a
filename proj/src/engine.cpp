// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#include "fimesh/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <utility>

#include "fimesh/rng.hpp"

namespace fimesh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_line(std::ostream& os, const nlohmann::json& j) {
  os << j.dump() << "\n";
}

double capped_psnr(double mse) { return std::min(psnr(mse), 99.0); }

// Records store per-vertex channel tuples; tapes store per-channel vertex
// rows. One batch element occupies a contiguous channels x vertices block.
void fill_batch_element(Eigen::VectorXd& tensor, std::int64_t element,
                        const std::vector<float>& values, std::int64_t channels,
                        std::int64_t vertices) {
  double* dst = tensor.data() + element * channels * vertices;
  for (std::int64_t v = 0; v < vertices; ++v)
    for (std::int64_t c = 0; c < channels; ++c)
      dst[c * vertices + v] = static_cast<double>(values[v * channels + c]);
}

struct Batch {
  Eigen::VectorXd input;
  Eigen::VectorXd target;
  std::int64_t items = 0;
  std::size_t index = 0;
};

Batch make_batch(const std::vector<SampleRecord>& records,
                 const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t end, std::int64_t channels, std::int64_t v_in,
                 std::int64_t v_out) {
  Batch b;
  b.items = static_cast<std::int64_t>(end - begin);
  b.input.setZero(b.items * channels * v_in);
  b.target.setZero(b.items * channels * v_out);
  for (std::size_t i = begin; i < end; ++i) {
    const SampleRecord& rec = records[order[i]];
    fill_batch_element(b.input, static_cast<std::int64_t>(i - begin), rec.input,
                       channels, v_in);
    fill_batch_element(b.target, static_cast<std::int64_t>(i - begin),
                       rec.target, channels, v_out);
  }
  return b;
}

struct ModelBundle {
  MeshStack stack;
  ParamStore store;
  std::optional<SsrModel> model;
};

std::unique_ptr<ModelBundle> make_model(const ModelConfig& config) {
  auto bundle = std::make_unique<ModelBundle>();
  bundle->stack = MeshStack::build(config.level_in, config.level_out);
  bundle->model.emplace(bundle->store, bundle->stack, config);
  return bundle;
}

ModelConfig model_config_for(const std::string& model, const LoadedDataset& ds,
                             std::int64_t width, std::int64_t w1,
                             std::int64_t w2, std::uint64_t seed) {
  if (model != "ssr" && model != "transpose")
    throw ConfigError("unknown model kind: " + model);
  ModelConfig mc;
  mc.level_in = ds.level_in;
  mc.level_out = ds.level_out;
  mc.channels_in = ds.channels;
  mc.width = width;
  mc.w1 = w1;
  mc.w2 = w2;
  mc.seed = seed;
  mc.transpose_baseline = (model == "transpose");
  return mc;
}

// Per-item mean squared error under eval-mode batch norm; independent of
// the batch partition. Optionally collects predictions in record layout.
std::vector<double> model_item_mse(const SsrModel& model, ParamStore& store,
                                   const std::vector<SampleRecord>& records,
                                   std::int64_t batch, std::int64_t channels,
                                   std::int64_t v_in, std::int64_t v_out,
                                   std::vector<std::vector<float>>* predictions) {
  std::vector<double> out;
  out.reserve(records.size());
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double denom = static_cast<double>(channels * v_out);
  for (std::size_t begin = 0; begin < records.size(); begin += batch) {
    const std::size_t end =
        std::min(records.size(), begin + static_cast<std::size_t>(batch));
    Batch b = make_batch(records, order, begin, end, channels, v_in, v_out);
    ad::Tape tape;
    BoundParams bound(store, tape, false);
    const ad::Tape::NodeId x = tape.constant(
        ad::Shape{b.items, channels, v_in}, std::move(b.input));
    const ad::Tape::NodeId y = model.forward(tape, store, bound, x, false);
    const Eigen::VectorXd& pred = tape.value(y);
    for (std::int64_t e = 0; e < b.items; ++e) {
      const double* p = pred.data() + e * channels * v_out;
      const double* t = b.target.data() + e * channels * v_out;
      double sum = 0.0;
      for (std::int64_t i = 0; i < channels * v_out; ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
      }
      out.push_back(sum / denom);
      if (predictions) {
        std::vector<float> flat(static_cast<std::size_t>(channels * v_out));
        for (std::int64_t v = 0; v < v_out; ++v)
          for (std::int64_t c = 0; c < channels; ++c)
            flat[static_cast<std::size_t>(v * channels + c)] =
                static_cast<float>(p[c * v_out + v]);
        predictions->push_back(std::move(flat));
      }
    }
  }
  return out;
}

double mean_capped_psnr(const std::vector<double>& item_mse) {
  if (item_mse.empty()) return 0.0;
  double sum = 0.0;
  for (double m : item_mse) sum += capped_psnr(m);
  return sum / static_cast<double>(item_mse.size());
}

// Nearest-upsample reference: parents averaged level by level, no learning.
double floor_psnr_over(const MeshStack& stack,
                       const std::vector<SampleRecord>& records,
                       std::int64_t channels, std::int64_t v_in,
                       std::int64_t v_out) {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const SampleRecord& rec : records) {
    Eigen::MatrixXd values(channels, v_in);
    for (std::int64_t v = 0; v < v_in; ++v)
      for (std::int64_t c = 0; c < channels; ++c)
        values(c, v) = static_cast<double>(rec.input[v * channels + c]);
    for (std::size_t s = 1; s < stack.meshes.size(); ++s)
      values = interp_upsample(*stack.meshes[s], values);
    double err = 0.0;
    for (std::int64_t v = 0; v < v_out; ++v)
      for (std::int64_t c = 0; c < channels; ++c) {
        const double d =
            values(c, v) - static_cast<double>(rec.target[v * channels + c]);
        err += d * d;
      }
    sum += capped_psnr(err / static_cast<double>(channels * v_out));
  }
  return sum / static_cast<double>(records.size());
}

nlohmann::json resolved_train_config(const TrainConfig& c,
                                     const ModelConfig& mc) {
  nlohmann::json j;
  j["command"] = "train";
  j["dataset"] = c.dataset_dir.string();
  j["out"] = c.out_dir.string();
  j["model"] = c.model;
  j["optimizer"] = c.optimizer;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["width"] = c.width;
  j["w1"] = mc.resolved_w1();
  j["w2"] = mc.resolved_w2();
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["queue_capacity"] = c.queue_capacity;
  j["level_in"] = mc.level_in;
  j["level_out"] = mc.level_out;
  j["channels"] = mc.channels_in;
  return j;
}

}  // namespace

LoadedDataset LoadedDataset::load(const std::filesystem::path& dir,
                                  bool need_train, bool need_test) {
  const std::filesystem::path manifest = dir / "dataset.json";
  std::ifstream is(manifest);
  if (!is)
    throw MissingInputError("cannot open dataset summary: " + manifest.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset summary " + manifest.string() + ": " +
                    e.what());
  }
  LoadedDataset ds;
  try {
    ds.level_in = j.at("level_in").get<int>();
    ds.level_out = j.at("level_out").get<int>();
    ds.channels =
        channel_mode_from_name(j.at("channel_mode").get<std::string>()) ==
                ChannelMode::Rgb
            ? 3
            : 1;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset summary " + manifest.string() +
                    " is missing fields: " + e.what());
  }
  if (need_train) ds.train = load_sample_records(dir / "train.fisamp");
  if (need_test) ds.test = load_sample_records(dir / "test.fisamp");
  for (const std::vector<SampleRecord>* split : {&ds.train, &ds.test})
    for (const SampleRecord& rec : *split)
      if (rec.level_in != ds.level_in || rec.level_out != ds.level_out ||
          rec.channels != ds.channels)
        throw DataError("sample record disagrees with the dataset summary in " +
                        dir.string());
  return ds;
}

TrainResult train(const TrainConfig& config, std::ostream& log) {
  if (config.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (config.batch < 1) throw ConfigError("batch size must be positive");
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (config.optimizer != "adam" && config.optimizer != "sgd")
    throw ConfigError("unknown optimizer: " + config.optimizer);
  if (config.threads < 1) throw ConfigError("threads must be positive");
  if (config.queue_capacity < 1)
    throw ConfigError("queue capacity must be positive");

  const Clock::time_point run_start = Clock::now();
  const LoadedDataset ds = LoadedDataset::load(config.dataset_dir, true, true);
  if (config.epochs > 0 && ds.train.empty())
    throw ConfigError("training needs a non-empty train split");

  const ModelConfig mc = model_config_for(config.model, ds, config.width,
                                          config.w1, config.w2, config.seed);
  std::unique_ptr<ModelBundle> bundle = make_model(mc);
  ParamStore& store = bundle->store;
  const SsrModel& model = *bundle->model;
  const std::int64_t k = mc.channels_in;
  const std::int64_t v_in = bundle->stack.meshes.front()->vertex_count();
  const std::int64_t v_out = bundle->stack.meshes.back()->vertex_count();

  std::filesystem::create_directories(config.out_dir);
  TrainResult result;
  result.trainable_parameters = store.trainable_scalars();
  result.best_checkpoint = config.out_dir / "best.ckpt";
  result.last_checkpoint = config.out_dir / "last.ckpt";
  result.metrics_path = config.out_dir / "metrics.jsonl";

  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics)
    throw DataError("cannot open " + result.metrics_path.string() +
                    " for writing");

  nlohmann::json run = resolved_train_config(config, mc);
  nlohmann::json run_line;
  run_line["type"] = "run";
  run_line["config"] = run;
  run_line["train_items"] = ds.train.size();
  run_line["test_items"] = ds.test.size();
  run_line["trainable_parameters"] = result.trainable_parameters;
  write_line(metrics, run_line);

  result.floor_psnr =
      floor_psnr_over(bundle->stack, ds.test, k, v_in, v_out);
  if (!ds.test.empty())
    result.initial_test_psnr = mean_capped_psnr(model_item_mse(
        model, store, ds.test, config.batch, k, v_in, v_out, nullptr));
  nlohmann::json baseline;
  baseline["type"] = "baseline";
  baseline["floor_psnr"] = result.floor_psnr;
  if (!ds.test.empty()) baseline["test_psnr"] = result.initial_test_psnr;
  write_line(metrics, baseline);

  store.save(result.last_checkpoint);
  store.save(result.best_checkpoint);
  result.best_test_psnr = result.initial_test_psnr;
  result.best_epoch = 0;

  const AdamOptions adam{config.lr, 0.9, 0.999, 1e-8};
  const std::size_t n = ds.train.size();
  double train_mse = 0.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const Clock::time_point t0 = Clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle = make_stream(config.seed, "shuffle/" + std::to_string(epoch));
    fisher_yates(order, shuffle);

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t begin = 0; begin < n;
         begin += static_cast<std::size_t>(config.batch))
      ranges.emplace_back(
          begin, std::min(n, begin + static_cast<std::size_t>(config.batch)));

    double sum_mse = 0.0;
    auto consume = [&](Batch b) {
      ad::Tape tape;
      BoundParams bound(store, tape, true);
      const ad::Tape::NodeId x =
          tape.constant(ad::Shape{b.items, k, v_in}, std::move(b.input));
      const ad::Tape::NodeId y = model.forward(tape, store, bound, x, true);
      const ad::Tape::NodeId t =
          tape.constant(ad::Shape{b.items, k, v_out}, std::move(b.target));
      const ad::Tape::NodeId loss = tape.mse(y, t);
      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value))
        throw NumericError("training loss became non-finite at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(b.index));
      tape.backward(loss);
      if (config.optimizer == "adam")
        store.adam_step(bound.gradients(), adam);
      else
        store.sgd_step(bound.gradients(), config.lr);
      sum_mse += loss_value * static_cast<double>(b.items);
    };

    if (config.threads > 1) {
      BoundedQueue<Batch> queue(static_cast<std::size_t>(config.queue_capacity));
      std::thread producer([&] {
        for (std::size_t i = 0; i < ranges.size(); ++i) {
          Batch b = make_batch(ds.train, order, ranges[i].first,
                               ranges[i].second, k, v_in, v_out);
          b.index = i;
          if (!queue.push(std::move(b))) return;
        }
        queue.close();
      });
      try {
        while (std::optional<Batch> b = queue.pop()) consume(std::move(*b));
      } catch (...) {
        queue.close();
        producer.join();
        throw;
      }
      producer.join();
    } else {
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        Batch b = make_batch(ds.train, order, ranges[i].first, ranges[i].second,
                             k, v_in, v_out);
        b.index = i;
        consume(std::move(b));
      }
    }

    train_mse = sum_mse / static_cast<double>(n);
    double test_psnr = 0.0;
    if (!ds.test.empty())
      test_psnr = mean_capped_psnr(model_item_mse(
          model, store, ds.test, config.batch, k, v_in, v_out, nullptr));

    nlohmann::json line;
    line["type"] = "epoch";
    line["epoch"] = epoch;
    line["train_mse"] = train_mse;
    if (train_mse > 0.0) line["train_mse_db"] = 10.0 * std::log10(train_mse);
    if (!ds.test.empty()) line["test_psnr"] = test_psnr;
    line["seconds"] = seconds_since(t0);
    write_line(metrics, line);
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(1) << seconds_since(t0);
    log << "epoch " << epoch << "/" << config.epochs << "  train_mse "
        << train_mse << "  test_psnr " << test_psnr << "  (" << secs.str()
        << " s)\n";

    store.save(result.last_checkpoint);
    if (ds.test.empty() || test_psnr > result.best_test_psnr) {
      result.best_test_psnr = test_psnr;
      result.best_epoch = epoch;
      store.save(result.best_checkpoint);
    }
    result.epochs_run = epoch;
  }

  result.final_train_mse = train_mse;
  nlohmann::json summary;
  summary["type"] = "summary";
  summary["epochs"] = result.epochs_run;
  summary["best_epoch"] = result.best_epoch;
  summary["best_test_psnr"] = result.best_test_psnr;
  summary["initial_test_psnr"] = result.initial_test_psnr;
  summary["final_train_mse"] = result.final_train_mse;
  summary["floor_psnr"] = result.floor_psnr;
  summary["seconds"] = seconds_since(run_start);
  write_line(metrics, summary);
  return result;
}

EvalResult evaluate(const EvalConfig& config, std::ostream& log) {
  if (config.dataset_dirs.empty())
    throw ConfigError("eval needs at least one dataset");
  if (config.checkpoint.empty()) throw ConfigError("eval needs a checkpoint");
  if (config.batch < 1) throw ConfigError("batch size must be positive");

  const LoadedDataset first =
      LoadedDataset::load(config.dataset_dirs.front(), false, true);
  const ModelConfig mc = model_config_for(config.model, first, config.width,
                                          config.w1, config.w2, config.seed);
  std::unique_ptr<ModelBundle> bundle = make_model(mc);
  bundle->store.load(config.checkpoint);
  const std::int64_t k = mc.channels_in;
  const std::int64_t v_in = bundle->stack.meshes.front()->vertex_count();
  const std::int64_t v_out = bundle->stack.meshes.back()->vertex_count();

  std::filesystem::create_directories(config.out_dir);
  EvalResult result;
  result.metrics_path = config.out_dir / "eval.jsonl";
  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics)
    throw DataError("cannot open " + result.metrics_path.string() +
                    " for writing");

  nlohmann::json run;
  run["type"] = "run";
  nlohmann::json cfg;
  cfg["command"] = "eval";
  cfg["checkpoint"] = config.checkpoint.string();
  cfg["model"] = config.model;
  cfg["batch"] = config.batch;
  cfg["width"] = config.width;
  cfg["w1"] = mc.resolved_w1();
  cfg["w2"] = mc.resolved_w2();
  cfg["seed"] = config.seed;
  cfg["level_in"] = mc.level_in;
  cfg["level_out"] = mc.level_out;
  cfg["channels"] = k;
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : config.dataset_dirs) dirs.push_back(d.string());
  cfg["datasets"] = dirs;
  run["config"] = cfg;
  write_line(metrics, run);

  std::ofstream csv;
  if (config.write_csv) {
    csv.open(config.out_dir / "eval.csv", std::ios::trunc);
    csv << "dataset,frame,face,mse,psnr\n" << std::setprecision(17);
  }
  std::ofstream pred_os;
  if (config.dump_predictions)
    pred_os.open(config.out_dir / "predictions.fisamp",
                 std::ios::binary | std::ios::trunc);

  double psnr_sum = 0.0;
  std::int64_t item_count = 0;
  for (const std::filesystem::path& dir : config.dataset_dirs) {
    const LoadedDataset ds = LoadedDataset::load(dir, false, true);
    if (ds.level_in != mc.level_in || ds.level_out != mc.level_out ||
        ds.channels != k)
      throw ConfigError("datasets disagree on levels or channels: " +
                        dir.string());
    std::vector<std::vector<float>> predictions;
    const std::vector<double> item_mse = model_item_mse(
        *bundle->model, bundle->store, ds.test, config.batch, k, v_in, v_out,
        config.dump_predictions ? &predictions : nullptr);

    EvalDatasetSummary summary;
    summary.dataset = dir.string();
    summary.items = static_cast<std::int64_t>(item_mse.size());
    summary.floor_psnr = floor_psnr_over(bundle->stack, ds.test, k, v_in, v_out);
    for (std::size_t i = 0; i < item_mse.size(); ++i) {
      EvalItem item;
      item.dataset = dir.string();
      item.frame = ds.test[i].frame;
      item.face = ds.test[i].face;
      item.mse = item_mse[i];
      item.psnr = capped_psnr(item_mse[i]);
      summary.mean_psnr += item.psnr;
      if (config.write_csv)
        csv << item.dataset << "," << item.frame << "," << item.face << ","
            << item.mse << "," << item.psnr << "\n";
      if (config.dump_predictions) {
        SampleRecord rec = ds.test[i];
        rec.target = std::move(predictions[i]);
        write_sample_record(pred_os, rec);
      }
      result.items.push_back(std::move(item));
    }
    if (summary.items > 0)
      summary.mean_psnr /= static_cast<double>(summary.items);
    psnr_sum += summary.mean_psnr * static_cast<double>(summary.items);
    item_count += summary.items;

    nlohmann::json line;
    line["type"] = "eval";
    line["dataset"] = summary.dataset;
    line["items"] = summary.items;
    line["mean_psnr"] = summary.mean_psnr;
    line["floor_psnr"] = summary.floor_psnr;
    write_line(metrics, line);
    log << "eval " << summary.dataset << "  items " << summary.items
        << "  mean_psnr " << summary.mean_psnr << "  floor_psnr "
        << summary.floor_psnr << "\n";
    result.datasets.push_back(std::move(summary));
  }

  result.overall_psnr =
      item_count > 0 ? psnr_sum / static_cast<double>(item_count) : 0.0;
  nlohmann::json summary;
  summary["type"] = "eval_summary";
  summary["datasets"] = result.datasets.size();
  summary["items"] = item_count;
  summary["overall_psnr"] = result.overall_psnr;
  write_line(metrics, summary);
  log << "overall mean_psnr " << result.overall_psnr << " over " << item_count
      << " items\n";
  return result;
}

BenchResult bench(const BenchConfig& config, std::ostream& log) {
  if (config.trials < 2) throw ConfigError("bench needs at least two trials");
  if (config.warmup < 0) throw ConfigError("warmup must be non-negative");
  if (config.batch < 1) throw ConfigError("batch size must be positive");
  if (config.checkpoint_ssr.empty() && config.checkpoint_transpose.empty())
    throw ConfigError("bench needs at least one checkpoint");

  std::filesystem::create_directories(config.out_dir);
  BenchResult result;
  result.metrics_path = config.out_dir / "bench.jsonl";
  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics)
    throw DataError("cannot open " + result.metrics_path.string() +
                    " for writing");

  nlohmann::json run;
  run["type"] = "run";
  nlohmann::json cfg;
  cfg["command"] = "bench";
  cfg["level_in"] = config.level_in;
  cfg["level_out"] = config.level_out;
  cfg["channels"] = config.channels;
  cfg["width"] = config.width;
  cfg["batch"] = config.batch;
  cfg["trials"] = config.trials;
  cfg["warmup"] = config.warmup;
  cfg["seed"] = config.seed;
  run["config"] = cfg;
  write_line(metrics, run);

  LoadedDataset shape;
  shape.level_in = config.level_in;
  shape.level_out = config.level_out;
  shape.channels = config.channels;

  std::vector<std::pair<std::string, std::filesystem::path>> jobs;
  if (!config.checkpoint_ssr.empty()) jobs.emplace_back("ssr", config.checkpoint_ssr);
  if (!config.checkpoint_transpose.empty())
    jobs.emplace_back("transpose", config.checkpoint_transpose);

  for (const auto& [name, ckpt] : jobs) {
    const ModelConfig mc = model_config_for(name, shape, config.width,
                                            config.w1, config.w2, config.seed);
    std::unique_ptr<ModelBundle> bundle = make_model(mc);
    bundle->store.load(ckpt);
    const std::int64_t v_in = bundle->stack.meshes.front()->vertex_count();

    auto rng = make_stream(config.seed, "bench");
    const ad::Shape xs{config.batch, config.channels, v_in};
    Eigen::VectorXd values(xs.size());
    for (std::int64_t i = 0; i < xs.size(); ++i) values[i] = uniform_unit(rng);

    auto run_once = [&] {
      ad::Tape tape;
      BoundParams bound(bundle->store, tape, false);
      const ad::Tape::NodeId x = tape.constant(xs, values);
      const ad::Tape::NodeId y =
          bundle->model->forward(tape, bundle->store, bound, x, false);
      return tape.value(y)[0];
    };

    double sink = 0.0;
    for (int i = 0; i < config.warmup; ++i) sink += run_once();
    std::vector<double> item_seconds(static_cast<std::size_t>(config.trials));
    for (int t = 0; t < config.trials; ++t) {
      const Clock::time_point t0 = Clock::now();
      sink += run_once();
      item_seconds[static_cast<std::size_t>(t)] =
          seconds_since(t0) / static_cast<double>(config.batch);
    }
    if (!std::isfinite(sink))
      throw NumericError("bench forward produced non-finite values");

    BenchModelResult r;
    r.model = name;
    for (double s : item_seconds) r.mean_item_seconds += s;
    r.mean_item_seconds /= static_cast<double>(config.trials);
    double var = 0.0;
    for (double s : item_seconds) {
      const double d = s - r.mean_item_seconds;
      var += d * d;
    }
    r.stdev_item_seconds =
        std::sqrt(var / static_cast<double>(config.trials - 1));
    r.per_frame_seconds = r.mean_item_seconds * 80.0;

    nlohmann::json line;
    line["type"] = "bench";
    line["model"] = r.model;
    line["batch"] = config.batch;
    line["trials"] = config.trials;
    line["warmup"] = config.warmup;
    line["mean_item_seconds"] = r.mean_item_seconds;
    line["stdev_item_seconds"] = r.stdev_item_seconds;
    line["per_frame_seconds"] = r.per_frame_seconds;
    write_line(metrics, line);
    log << "bench " << r.model << "  item " << r.mean_item_seconds * 1e3
        << " ms +- " << r.stdev_item_seconds * 1e3 << " ms  frame "
        << r.per_frame_seconds * 1e3 << " ms\n";
    result.models.push_back(r);
  }
  return result;
}

}  // namespace fimesh
