// Acceptance checks; prints one PASS/FAIL line per criterion.
//
//   acceptance --group fast    criteria 1, 2, 3, 5, 6
//   acceptance --group trend   criterion 4 (ablation ordering, up to an hour)
//   acceptance --group all

#include <CLI11.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "psc/experiment.hpp"
#include "psc/format.hpp"
#include "psc/gradcheck_suite.hpp"
#include "psc/inter_part.hpp"
#include "psc/intra_part.hpp"
#include "psc/psc_module.hpp"

namespace fs = std::filesystem;
using namespace psc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int criterion, const std::string& title, const Verdict& v) {
  std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", criterion, title.c_str(), v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

// Runs `body`, turning an escaped exception into a failure.
void criterion(int n, const std::string& title, const std::function<Verdict()>& body) {
  try {
    report(n, title, body());
  } catch (const std::exception& e) {
    report(n, title, {false, std::string("exception: ") + e.what()});
  }
}

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Random weights and biases so adjacency checks see non-trivial inputs.
void randomize(NamedTensors tensors, Rng& rng) {
  for (auto& [name, t] : tensors) {
    Tensor alias = t;
    for (auto& v : alias.data()) v = rng.normal(0.0, 0.5);
  }
}

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  const auto outcomes = run_gradcheck_suite(1e-4, 1e-3, 10);
  const double elapsed = seconds_since(t0);
  Verdict v;
  double worst_op = 0.0, worst_pipeline = 0.0;
  std::set<std::string> names;
  for (const auto& o : outcomes) {
    names.insert(o.name);
    if (!o.passed) {
      v.pass = false;
      v.detail += o.name + " error " + format_number(o.max_error) + "; ";
    }
    (o.tolerance > 1e-4 ? worst_pipeline : worst_op) = std::max(o.tolerance > 1e-4 ? worst_pipeline : worst_op, o.max_error);
  }
  // The PSC paths and the detection objective must be among the checked cases.
  for (const char* required : {"intra_adjacency", "intra_forward", "inter_adjacency", "inter_forward", "psc_module",
                               "detector_loss"}) {
    if (!names.count(required)) {
      v.pass = false;
      v.detail += std::string("missing case ") + required + "; ";
    }
  }
  if (elapsed >= 120.0) v.pass = false;
  std::ostringstream os;
  os << outcomes.size() << " cases x 10 points, worst op error " << format_number(worst_op) << " (< 1e-4), worst pipeline error "
     << format_number(worst_pipeline) << " (< 1e-3), " << format_number(std::round(elapsed * 10) / 10) << " s (< 120 s)";
  v.detail = os.str() + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict adjacency_invariants() {
  Rng rng(2718);
  Tape tape = Tape::inference();
  const std::size_t pooled = 7, channels = 16, d = 24;
  double worst_row_sum = 0.0, worst_norm = 0.0;
  double min_att = 1.0, max_att = 0.0;
  std::size_t pattern_mismatches = 0;
  const PartGraph& graph = adjacency_template();
  for (int trial = 0; trial < 100; ++trial) {
    IntraPartParams intra = IntraPartParams::init(rng, channels, pooled, d);
    NamedTensors intra_named;
    intra.collect(intra_named, "intra");
    randomize(intra_named, rng);
    const Tensor a_s = spatial_adjacency(tape, random_tensor(rng, {pooled, pooled, channels}), intra);
    const std::size_t n = pooled * pooled;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a_s[i * n + j];
      worst_row_sum = std::max(worst_row_sum, std::abs(s - 1.0));
    }

    InterPartParams inter = InterPartParams::init(rng, d);
    NamedTensors inter_named;
    inter.collect(inter_named, "inter");
    randomize(inter_named, rng);
    const Tensor f = random_tensor(rng, {kNumRegions, d}, 2.0);
    const Tensor a_p = build_adjacency(tape, f, graph, inter);
    for (std::size_t i = 0; i < kNumRegions; ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < kNumRegions; ++j) {
        const double v = a_p[i * kNumRegions + j];
        const bool edge = graph.edge(static_cast<PartKind>(i), static_cast<PartKind>(j));
        if (edge != (v != 0.0)) ++pattern_mismatches;
        norm += v * v;
        if (edge) {
          const Tensor att = edge_attention(tape, reshape(tape, slice(tape, f, i, 1), {d}),
                                            reshape(tape, slice(tape, f, j, 1), {d}), inter);
          min_att = std::min(min_att, att[0]);
          max_att = std::max(max_att, att[0]);
        }
      }
      if (graph.degree(static_cast<PartKind>(i)) > 0) worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm) - 1.0));
    }
  }
  Verdict v;
  v.pass = worst_row_sum <= 1e-9 && worst_norm <= 1e-9 && pattern_mismatches == 0 && min_att > 0.0 && max_att < 1.0;
  std::ostringstream os;
  os << "100 inputs: intra row-sum error " << format_number(worst_row_sum) << ", inter zero-pattern mismatches "
     << pattern_mismatches << ", row-norm error " << format_number(worst_norm) << ", attention in ["
     << format_number(min_att) << ", " << format_number(max_att) << "]";
  v.detail = os.str();
  return v;
}

Verdict structural_constants() {
  const PscConfig cfg;
  Verdict v;
  std::ostringstream os;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) v.pass = false;
    os << what << (ok ? "" : " WRONG") << "; ";
  };
  expect(kNumRegions == 6 && adjacency_template().ordered_edges().size() > 0, "nodes=" + std::to_string(kNumRegions));
  expect(cfg.embed_dim == 1024, "d=" + std::to_string(cfg.embed_dim));
  expect(cfg.part_channels == 64 && cfg.full_channels == 256,
         "channels=" + std::to_string(cfg.part_channels) + "/" + std::to_string(cfg.full_channels));

  // A forward pass at the default widths yields 6 x 1024 node features and a 1024-d output.
  Rng rng(161);
  ExperimentConfig defaults;
  defaults.finalize();
  const PscParams params = PscParams::init(rng, cfg);
  FeatureMap map{random_tensor(rng, {12, 16, cfg.feature_channels}), 8.0};
  const std::vector<Box> boxes = {{20, 8, 30, 72}};
  Tape tape = Tape::inference();
  const Tensor out = psc_features(tape, map, boxes, params, cfg);
  expect(out.shape() == Shape{1, 1024}, "psc output 1x" + std::to_string(out.dim(out.rank() - 1)));
  const PartFeatures parts = extract_part_features(tape, map, boxes[0], cfg.pooled, params.roi);
  const Tensor nodes = intra_all_parts(tape, parts, params.intra);
  expect(nodes.shape() == Shape{6, 1024}, "intra nodes " + std::to_string(nodes.dim(0)) + "x" + std::to_string(nodes.dim(1)));

  // The objective is exactly the sum of its four terms.
  DetectorConfig dc = defaults.detector;
  dc.psc.part_channels = 4;
  dc.psc.full_channels = 6;
  dc.psc.embed_dim = 8;
  dc.psc.pooled = 3;
  dc.psc.feature_channels = 5;
  dc.backbone_channels = {4, 4, 5, 5};
  dc.anchor_heights = {24.0, 36.0};
  const DetectorParams dp = DetectorParams::init(rng, dc);
  Scene scene;
  scene.image = random_tensor(rng, {40, 48, 3}, 0.3);
  Annotation a;
  a.full = {10, 4, 12, 30};
  a.visible = a.full;
  a.height = 30;
  scene.annotations.push_back(a);
  Tape inf = Tape::inference();
  Rng sample(5);
  const LossReport r = detector_loss(inf, dp, dc, scene, sample).report();
  const bool sums = r.total == ((r.rpn_cls + r.rpn_reg) + r.rcnn_cls) + r.rcnn_reg;
  const bool all_terms = r.rpn_cls > 0 && r.rpn_reg > 0 && r.rcnn_cls > 0 && r.rcnn_reg > 0;
  expect(sums && all_terms, "loss = rpn_cls " + format_number(r.rpn_cls) + " + rpn_reg " + format_number(r.rpn_reg) +
                                " + rcnn_cls " + format_number(r.rcnn_cls) + " + rcnn_reg " + format_number(r.rcnn_reg));
  v.detail = os.str();
  v.detail.resize(v.detail.size() - 2);
  return v;
}

double median3(std::array<double, 3> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

Verdict trend(const fs::path& config_path) {
  struct Variant {
    const char* name;
    bool intra, inter;
  };
  const std::array<Variant, 4> variants = {{{"baseline", false, false},
                                            {"intra-only", true, false},
                                            {"inter-only", false, true},
                                            {"full", true, true}}};
  const auto t0 = Clock::now();
  std::array<std::array<double, 3>, 4> mr{};
  const std::array<std::uint64_t, 3> seeds = {1, 2, 3};
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    cfg.seed = seeds[s];
    cfg.train_images = 300;
    cfg.test_images = 100;
    cfg.detector.mode = ProposalMode::OracleJitter;
    cfg.subsets = {Subset::HeavyOcclusion};
    cfg.finalize();
    const Dataset train_set = generate_train_split(cfg), test_set = generate_test_split(cfg);
    for (std::size_t k = 0; k < variants.size(); ++k) {
      ExperimentConfig vc = cfg;
      vc.detector.psc.use_intra = variants[k].intra;
      vc.detector.psc.use_inter = variants[k].inter;
      const auto ts = Clock::now();
      mr[k][s] = run_experiment(vc, train_set, test_set).report.subsets[0].log_average_miss_rate;
      std::printf("  seed %llu %-10s HO MR %.4f (%.0f s)\n", static_cast<unsigned long long>(seeds[s]), variants[k].name,
                  mr[k][s], seconds_since(ts));
      std::fflush(stdout);
    }
  }
  const double elapsed = seconds_since(t0);
  const double base = median3(mr[0]), intra = median3(mr[1]), inter = median3(mr[2]), full = median3(mr[3]);
  Verdict v;
  std::vector<std::string> broken;
  if (!(full < intra)) broken.push_back("full >= intra-only");
  if (!(full < inter)) broken.push_back("full >= inter-only");
  if (!(intra <= base + 0.01)) broken.push_back("intra-only > baseline + 0.01");
  if (!(inter <= base + 0.01)) broken.push_back("inter-only > baseline + 0.01");
  if (!(elapsed < 3600.0)) broken.push_back("over 60 min");
  v.pass = broken.empty();
  std::ostringstream os;
  os << "median HO MR over 3 seeds: baseline " << format_number(base) << ", intra-only " << format_number(intra)
     << ", inter-only " << format_number(inter) << ", full " << format_number(full) << "; "
     << format_number(std::round(elapsed)) << " s (< 3600 s)";
  for (const auto& b : broken) os << "; " << b;
  v.detail = os.str();
  return v;
}

// Greedy matching written out independently for the comparison.
std::vector<int> brute_force_match(const std::vector<Detection>& dets, const std::vector<Box>& gts) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = dets[a];
    const auto& y = dets[b];
    if (x.score != y.score) return x.score > y.score;
    return std::array{x.box.x, x.box.y, x.box.w, x.box.h} < std::array{y.box.x, y.box.y, y.box.w, y.box.h};
  });
  std::vector<int> matched(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t d : order) {
    double best = 0.5;
    int pick = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const Box& a = dets[d].box;
      const Box& b = gts[g];
      const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
      const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
      const double v = ix * iy / (a.w * a.h + b.w * b.h - ix * iy);
      if (!used[g] && (v > best || (v == best && pick < 0))) best = v, pick = static_cast<int>(g);
    }
    if (pick >= 0) used[static_cast<std::size_t>(pick)] = true;
    matched[d] = pick;
  }
  return matched;
}

Verdict evaluator_correctness() {
  Verdict v;
  std::ostringstream os;
  Rng rng(505);
  std::size_t agree = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Box> gts;
    std::vector<Detection> dets;
    const auto ng = rng.uniform_int(1, 5), nd = rng.uniform_int(1, 5);
    for (std::int64_t i = 0; i < ng; ++i) gts.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(10, 30), rng.uniform(20, 50)});
    for (std::int64_t i = 0; i < nd; ++i) {
      const Box& g = gts[static_cast<std::size_t>(rng.uniform_int(0, ng - 1))];
      dets.push_back({{g.x + rng.uniform(-6, 6), g.y + rng.uniform(-6, 6), g.w * rng.uniform(0.8, 1.2), g.h * rng.uniform(0.8, 1.2)},
                      std::round(rng.uniform(0, 1) * 4.0) / 4.0});
    }
    if (match(dets, gts).matched_gt == brute_force_match(dets, gts)) ++agree;
  }
  os << "matcher " << agree << "/20 vs brute force";
  if (agree != 20) v.pass = false;

  const std::vector<CurvePoint> a = {{0.9, 0.005, 0.9}, {0.8, 0.02, 0.7}, {0.7, 0.09, 0.5}, {0.6, 0.5, 0.3}, {0.5, 2.0, 0.1}};
  const std::vector<CurvePoint> b = {{0.9, 0.05, 0.6}, {0.4, 0.4, 0.0}};
  const double want_a = std::exp((2 * std::log(0.9) + 2 * std::log(0.7) + 3 * std::log(0.5) + 2 * std::log(0.3)) / 9.0);
  const double want_b = std::exp((4 * std::log(0.6) + 2 * std::log(1e-6)) / 9.0);
  const double err = std::max(std::abs(log_average_miss_rate(a) - want_a), std::abs(log_average_miss_rate(b) - want_b));
  os << "; 9-point MR error " << format_number(err);
  if (!(err < 1e-9)) v.pass = false;

  struct Boundary {
    double height, visibility;
    bool r, ho;
  };
  const std::array<Boundary, 3> cases = {{{60, 0.9, true, false}, {60, 0.5, false, true}, {40, 0.9, false, false}}};
  std::size_t subset_ok = 0;
  for (const auto& c : cases) {
    Annotation ann;
    ann.full = {0, 0, 0.41 * c.height, c.height};
    ann.height = c.height;
    ann.visibility = c.visibility;
    const bool both = in_subset(ann, Subset::ReasonableAndHeavy);
    if (in_subset(ann, Subset::Reasonable) == c.r && in_subset(ann, Subset::HeavyOcclusion) == c.ho && both == (c.r || c.ho)) {
      ++subset_ok;
    }
  }
  os << "; subset boundaries " << subset_ok << "/3";
  if (subset_ok != 3) v.pass = false;
  v.detail = os.str();
  return v;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism(const fs::path& workdir) {
  const fs::path cfg = workdir / "determinism.cfg";
  fs::create_directories(workdir);
  std::ofstream(cfg) << "seed = 11\n"
                        "data.train_images = 12\n"
                        "data.test_images = 8\n"
                        "model.part_channels = 8\n"
                        "model.full_channels = 16\n"
                        "model.embed_dim = 32\n"
                        "train.epochs = 2\n"
                        "train.lr = 0.001\n";
  const std::string cli = PSC_CLI_PATH;
  for (const char* name : {"run1", "run2"}) {
    const fs::path dir = workdir / name;
    fs::remove_all(dir);
    const std::string quiet = " > " + (workdir / (std::string(name) + ".log")).string() + " 2>&1";
    if (run(cli + " gen-data --config " + cfg.string() + " --out " + (dir / "data").string() + quiet) != 0 ||
        run(cli + " train --data " + (dir / "data").string() + " --out " + (dir / "model").string() + quiet) != 0 ||
        run(cli + " eval --data " + (dir / "data").string() + " --checkpoint " + (dir / "model/model.tsr").string() +
            " --out " + (dir / "eval").string() + quiet) != 0) {
      return {false, std::string("CLI pipeline failed in ") + name};
    }
  }
  Verdict v;
  std::ostringstream os;
  for (const char* f : {"model/model.tsr", "model/loss.log", "eval/report.json", "eval/detections.txt",
                        "data/test/annotations.txt"}) {
    const std::string a = read_file(workdir / "run1" / f), b = read_file(workdir / "run2" / f);
    const bool same = !a.empty() && a == b;
    if (!same) v.pass = false;
    os << f << (same ? " identical" : " DIFFERS") << " (" << a.size() << " B); ";
  }
  v.detail = os.str();
  v.detail.resize(v.detail.size() - 2);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string group = "all";
  std::string workdir = (fs::temp_directory_path() / "psc_acceptance").string();
  std::string trend_config = PSC_TREND_CONFIG;
  app.add_option("--group", group, "fast, trend or all")->check(CLI::IsMember({"fast", "trend", "all"}));
  app.add_option("--workdir", workdir, "Scratch directory for the CLI runs");
  app.add_option("--trend-config", trend_config, "Experiment config for the ablation trend");
  CLI11_PARSE(app, argc, argv);

  const bool fast = group != "trend", slow = group != "fast";
  if (fast) {
    criterion(1, "gradient correctness", gradient_correctness);
    criterion(2, "adjacency invariants", adjacency_invariants);
    criterion(3, "structural constants", structural_constants);
  }
  if (slow) criterion(4, "ablation trend", [&] { return trend(trend_config); });
  if (fast) {
    criterion(5, "evaluator correctness", evaluator_correctness);
    criterion(6, "determinism", [&] { return determinism(workdir); });
  }
  return failures == 0 ? 0 : 1;
}
