// Command-line driver: gen-data, train, eval, gradcheck, infer.
//
// Exit codes: 0 success, 1 internal error, 2 configuration or usage error,
// 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "psc/errors.hpp"
#include "psc/experiment.hpp"
#include "psc/format.hpp"
#include "psc/gradcheck_suite.hpp"
#include "psc/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace psc;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string split = "test";
  std::string checkpoint;
  std::string detections;
  std::string subsets;
  double tolerance = 1e-4;
};

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

// Config file (or `fallback` when no --config was given), then --set
// overrides, then --seed.
ExperimentConfig resolve_config(const Options& o, const fs::path& fallback = {}) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_experiment_config(o.config);
  } else if (!fallback.empty()) {
    cfg = load_experiment_config(fallback);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.subsets.empty()) cfg.set("eval.subsets", o.subsets);
  cfg.finalize();
  return cfg;
}

std::map<std::string, std::string> report_extra(const ExperimentConfig& cfg) {
  return {{"seed", std::to_string(cfg.seed)},
          {"use_intra", cfg.detector.psc.use_intra ? "true" : "false"},
          {"use_inter", cfg.detector.psc.use_inter ? "true" : "false"},
          {"smoothing_sign", std::string(to_string(cfg.detector.psc.smoothing))},
          {"proposal_mode", std::string(to_string(cfg.detector.mode))},
          {"nms_iou", format_number(cfg.nms_iou)},
          {"score_thresh", format_number(cfg.score_thresh)}};
}

std::string manifest_for(const std::string& split, const Dataset& ds) {
  std::ostringstream os;
  std::size_t empty = 0;
  for (const auto& s : ds.scenes) empty += s.annotations.empty() ? 1 : 0;
  os << split << ".images = " << ds.scenes.size() << '\n';
  os << split << ".pedestrians = " << ds.pedestrian_count() << '\n';
  os << split << ".images_without_pedestrians = " << empty << '\n';
  for (auto s : {Subset::Reasonable, Subset::HeavyOcclusion, Subset::ReasonableAndHeavy}) {
    os << split << ".subset." << subset_name(s) << " = " << subset(ds, s).size() << '\n';
  }
  return os.str();
}

std::string subset_lines(const std::string& split, const Dataset& ds) {
  std::ostringstream os;
  for (auto s : {Subset::Reasonable, Subset::HeavyOcclusion, Subset::ReasonableAndHeavy}) {
    for (const auto& ref : subset(ds, s)) {
      os << split << ' ' << subset_name(s) << ' ' << ds.scenes[ref.scene].id << ' ' << ref.annotation << '\n';
    }
  }
  return os.str();
}

int cmd_gen_data(const Options& o) {
  require(o.out, "--out");
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path out(o.out);
  ensure_dir(out);
  const Dataset train = generate_train_split(cfg);
  const Dataset test = generate_test_split(cfg);
  save_split(out / "train", train);
  save_split(out / "test", test);
  write_text(out / "config.txt", cfg.to_text());
  std::string manifest = "seed = " + std::to_string(cfg.seed) + "\n";
  manifest += manifest_for("train", train) + manifest_for("test", test);
  write_text(out / "manifest.txt", manifest);
  write_text(out / "subsets.txt", subset_lines("train", train) + subset_lines("test", test));
  std::printf("wrote %zu train and %zu test images (%zu + %zu pedestrians) to %s\n", train.scenes.size(),
              test.scenes.size(), train.pedestrian_count(), test.pedestrian_count(), out.string().c_str());
  return 0;
}

void save_checkpoint(const fs::path& dir, const DetectorParams& params, const ExperimentConfig& cfg) {
  save_tensors(dir / "model.tsr", params.named());
  write_text(dir / "model.cfg", cfg.to_text());
}

int cmd_train(const Options& o) {
  require(o.data, "--data");
  require(o.out, "--out");
  // Without --config, train with the settings the data was generated from.
  const fs::path data_config = fs::path(o.data) / "config.txt";
  const ExperimentConfig cfg = resolve_config(o, fs::exists(data_config) ? data_config : fs::path{});
  const fs::path out(o.out);
  ensure_dir(out);
  const Dataset train_set = load_split(fs::path(o.data) / "train");
  std::ofstream log(out / "loss.log", std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot write " + (out / "loss.log").string());
  const std::size_t per_epoch = steps_per_epoch(train_set.scenes.size(), cfg.train);
  try {
    TrainResult result = train(train_set, cfg.detector, cfg.train,
                               [&](std::size_t step, const LossReport& r, const DetectorParams&) {
                                 log << format_loss_line(step, r) << '\n';
                                 if (step % per_epoch == 0) {
                                   std::fprintf(stderr, "epoch %zu/%zu  %s\n", step / per_epoch, cfg.train.epochs,
                                                format_loss_line(step, r).c_str());
                                 }
                               });
    log.close();
    save_checkpoint(out, result.params, cfg);
    std::printf("trained %zu steps; checkpoint %s\n", result.log.size(), (out / "model.tsr").string().c_str());
  } catch (const TrainingDiverged& e) {
    log.close();
    save_checkpoint(out, e.partial.params, cfg);
    std::fprintf(stderr, "training aborted: %s\nlast good checkpoint after %zu steps: %s\n", e.what(),
                 e.partial.log.size(), (out / "model.tsr").string().c_str());
    return kExitNumeric;
  }
  return 0;
}

fs::path checkpoint_config(const fs::path& checkpoint) { return checkpoint.parent_path() / "model.cfg"; }

DetectorParams load_checkpoint(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  Rng rng(0);
  DetectorParams params = DetectorParams::init(rng, cfg.detector);
  params.load(load_tensors(checkpoint));
  return params;
}

int cmd_eval(const Options& o) {
  require(o.data, "--data");
  require(o.out, "--out");
  if (o.checkpoint.empty() && o.detections.empty()) throw ConfigError("eval needs --checkpoint or --detections");
  const fs::path fallback = o.checkpoint.empty() ? fs::path{} : checkpoint_config(o.checkpoint);
  const ExperimentConfig cfg = resolve_config(o, fallback);
  const fs::path out(o.out);
  ensure_dir(out);
  const Dataset test_set = load_split(fs::path(o.data) / o.split);
  std::vector<std::vector<Detection>> dets;
  if (!o.detections.empty()) {
    dets = load_detections(o.detections, test_set);
  } else {
    dets = detect_all(load_checkpoint(o.checkpoint, cfg), cfg, test_set);
  }
  const EvalReport report = evaluate(test_set, dets, cfg.subsets, cfg.iou_thresh);
  save_detections(out / "detections.txt", test_set, dets);
  write_text(out / "report.json", report_json(report, report_extra(cfg)));
  write_text(out / "summary.txt", report_summary(report) + "\n");
  write_text(out / "config.txt", cfg.to_text());
  std::printf("%s\n", report_summary(report).c_str());
  return 0;
}

int cmd_infer(const Options& o) {
  require(o.data, "--data");
  require(o.checkpoint, "--checkpoint");
  require(o.out, "--out");
  const ExperimentConfig cfg = resolve_config(o, checkpoint_config(o.checkpoint));
  const Dataset ds = load_split(fs::path(o.data) / o.split);
  const auto dets = detect_all(load_checkpoint(o.checkpoint, cfg), cfg, ds);
  save_detections(o.out, ds, dets);
  std::size_t total = 0;
  for (const auto& d : dets) total += d.size();
  std::printf("wrote %zu detections for %zu images to %s\n", total, ds.scenes.size(), o.out.c_str());
  return 0;
}

int cmd_gradcheck(const Options& o) {
  if (!(o.tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
  const auto outcomes = run_gradcheck_suite(o.tolerance, 10.0 * o.tolerance);
  std::ostringstream os;
  std::size_t failed = 0;
  for (const auto& r : outcomes) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << " max_rel_error=" << format_number(r.max_error)
       << " tolerance=" << format_number(r.tolerance) << '\n';
    failed += r.passed ? 0 : 1;
  }
  os << outcomes.size() - failed << "/" << outcomes.size() << " passed\n";
  std::fputs(os.str().c_str(), stdout);
  if (!o.out.empty()) write_text(o.out, os.str());
  return failed == 0 ? 0 : kExitNumeric;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
}

void add_config_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config file (key = value lines)");
  cmd->add_option("--set", o.overrides, "Override one config key, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part spatial co-occurrence detector: data, training, evaluation and gradient checks"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic train and test splits");
  add_config_flags(gen, o);
  gen->add_option("--out", o.out, "Output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "Train a detector on <data>/train");
  add_config_flags(tr, o);
  tr->add_option("--data", o.data, "Dataset directory written by gen-data (its config.txt is the default config)")->required();
  tr->add_option("--out", o.out, "Output directory for model.tsr, model.cfg and loss.log")->required();

  auto* ev = app.add_subcommand("eval", "Detect on a split and write the miss-rate report");
  add_config_flags(ev, o);
  ev->add_option("--data", o.data, "Dataset directory written by gen-data")->required();
  ev->add_option("--split", o.split, "Split to evaluate (default test)");
  ev->add_option("--checkpoint", o.checkpoint, "model.tsr from train (its model.cfg is the default config)");
  ev->add_option("--detections", o.detections, "Evaluate this detections file instead of running the model");
  ev->add_option("--subset", o.subsets, "Comma-separated subsets, e.g. R,HO,R+HO");
  ev->add_option("--out", o.out, "Output directory")->required();

  auto* inf = app.add_subcommand("infer", "Write detections for a split");
  add_config_flags(inf, o);
  inf->add_option("--data", o.data, "Dataset directory written by gen-data")->required();
  inf->add_option("--split", o.split, "Split to run on (default test)");
  inf->add_option("--checkpoint", o.checkpoint, "model.tsr from train")->required();
  inf->add_option("--out", o.out, "Detections file to write")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every registered operation");
  gc->add_option("--tolerance", o.tolerance, "Max relative error for single ops (pipelines get 10x)");
  gc->add_option("--out", o.out, "Also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*gen) return guarded([&] { return cmd_gen_data(o); });
  if (*tr) return guarded([&] { return cmd_train(o); });
  if (*ev) return guarded([&] { return cmd_eval(o); });
  if (*inf) return guarded([&] { return cmd_infer(o); });
  if (*gc) return guarded([&] { return cmd_gradcheck(o); });
  return kExitConfig;
}
