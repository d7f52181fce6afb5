#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "psc/dataset.hpp"
#include "psc/eval.hpp"
#include "psc/experiment_config.hpp"
#include "psc/format.hpp"
#include "psc/gradcheck_suite.hpp"

namespace fs = std::filesystem;
using namespace psc;

namespace {

const fs::path kWork = fs::temp_directory_path() / "psc_cli_test";

// Small enough that gen-data, train and eval take a few seconds.
const char* kMicroConfig =
    "seed = 3\n"
    "data.train_images = 6\n"
    "data.test_images = 8\n"
    "scene.image_height = 96\n"
    "scene.image_width = 128\n"
    "scene.min_pedestrians = 2\n"
    "scene.max_pedestrians = 3\n"
    "scene.min_height = 56\n"
    "scene.max_height = 86\n"
    "scene.max_occluders = 2\n"
    "scene.min_visibility = 0.3\n"
    "model.pooled = 3\n"
    "model.feature_channels = 5\n"
    "model.part_channels = 4\n"
    "model.full_channels = 6\n"
    "model.embed_dim = 6\n"
    "model.backbone_channels = 4,4,5,5\n"
    "model.anchor_heights = 48,80\n"
    "model.rpn_batch = 8\n"
    "model.jitter_per_gt = 2\n"
    "model.random_negatives = 2\n"
    "train.epochs = 2\n"
    "train.lr = 0.001\n";

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const fs::path log = kWork / "last_output.txt";
  const std::string cmd = std::string(PSC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(log);
  return r;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

std::map<std::string, std::string> read_keyvals(const fs::path& p) {
  std::map<std::string, std::string> out;
  std::istringstream is(read_file(p));
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

// gen-data into `name` once per test process.
fs::path dataset(const std::string& name) {
  const fs::path dir = kWork / name;
  if (!fs::exists(dir / "manifest.txt")) {
    write_file(kWork / "micro.cfg", kMicroConfig);
    const RunResult r = run_cli("gen-data --config " + (kWork / "micro.cfg").string() + " --out " + dir.string());
    REQUIRE_MESSAGE(r.code == 0, r.out);
  }
  return dir;
}

fs::path trained(const std::string& data_name, const std::string& run_name) {
  const fs::path run = kWork / run_name;
  if (!fs::exists(run / "model.tsr")) {
    const RunResult r = run_cli("train --data " + dataset(data_name).string() + " --out " + run.string());
    REQUIRE_MESSAGE(r.code == 0, r.out);
  }
  return run;
}

}  // namespace

TEST_CASE("gen-data is reproducible and the manifest counts match the files") {
  fs::remove_all(kWork);
  const fs::path a = dataset("data_a"), b = dataset("data_b");
  for (const char* f : {"train/annotations.txt", "test/annotations.txt", "test/images.txt", "manifest.txt",
                        "subsets.txt", "config.txt"}) {
    CAPTURE(f);
    CHECK(read_file(a / f) == read_file(b / f));
  }
  CHECK(read_file(a / "test/images/0.tsr") == read_file(b / "test/images/0.tsr"));
  auto m = read_keyvals(a / "manifest.txt");
  CHECK(m["seed"] == "3");
  CHECK(m["train.images"] == "6");
  CHECK(m["test.images"] == "8");
  CHECK(std::stoul(m["train.pedestrians"]) == count_lines(read_file(a / "train/annotations.txt")));
  CHECK(std::stoul(m["test.pedestrians"]) == count_lines(read_file(a / "test/annotations.txt")));
  CHECK(std::stoul(m["test.subset.HO"]) > 0);
  CHECK(std::stoul(m["test.subset.R"]) > 0);

  const RunResult other = run_cli("gen-data --config " + (kWork / "micro.cfg").string() + " --seed 4 --out " +
                                  (kWork / "data_seed4").string());
  REQUIRE(other.code == 0);
  CHECK(read_file(kWork / "data_seed4/test/annotations.txt") != read_file(a / "test/annotations.txt"));
  CHECK(read_keyvals(kWork / "data_seed4/manifest.txt")["seed"] == "4");
}

TEST_CASE("configuration and data problems map to distinct exit codes") {
  fs::create_directories(kWork);
  CHECK(run_cli("gen-data --config " + (kWork / "absent.cfg").string() + " --out " + (kWork / "x").string()).code == 2);
  CHECK(run_cli("gen-data --out " + (kWork / "x").string() + " --set model.nonsense=1").code == 2);
  CHECK(run_cli("gen-data --out " + (kWork / "x").string() + " --set seed").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("train --out " + (kWork / "x").string()).code == 2);
  CHECK(run_cli("train --data " + (kWork / "no_such_data").string() + " --out " + (kWork / "x").string()).code == 3);
  CHECK(run_cli("gradcheck --tolerance 0").code == 2);
}

TEST_CASE("train writes one loss line per step and a loadable checkpoint") {
  const fs::path run = trained("data_a", "run_a");
  const ExperimentConfig cfg = parse_experiment_config(kMicroConfig);
  const std::size_t steps = cfg.train.epochs * steps_per_epoch(6, cfg.train);
  const std::string log = read_file(run / "loss.log");
  CHECK(count_lines(log) == steps);
  CHECK(log.rfind("1,", 0) == 0);
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) CHECK(std::count(line.begin(), line.end(), ',') == 5);
  CHECK(fs::file_size(run / "model.tsr") > 0);
  CHECK(parse_experiment_config(read_file(run / "model.cfg")).to_text() == read_file(run / "model.cfg"));

  const fs::path run2 = trained("data_a", "run_a2");
  CHECK(read_file(run / "model.tsr") == read_file(run2 / "model.tsr"));
  CHECK(read_file(run / "loss.log") == read_file(run2 / "loss.log"));
}

TEST_CASE("evaluating the ground truth as detections reaches the miss-rate floor") {
  const fs::path data = dataset("data_a");
  const Dataset test = load_split(data / "test");
  std::vector<std::vector<Detection>> perfect;
  for (const auto& s : test.scenes) {
    std::vector<Detection> d;
    for (const auto& a : s.annotations) d.push_back({a.full, 1.0});
    perfect.push_back(d);
  }
  save_detections(kWork / "perfect.txt", test, perfect);
  const RunResult r = run_cli("eval --data " + data.string() + " --detections " + (kWork / "perfect.txt").string() +
                              " --out " + (kWork / "eval_perfect").string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const auto j = nlohmann::json::parse(read_file(kWork / "eval_perfect/report.json"));
  for (const char* s : {"R", "HO", "R+HO"}) {
    CAPTURE(s);
    CHECK(j["log_average_miss_rate"][s].get<double>() == doctest::Approx(kMissRateFloor).epsilon(1e-9));
  }
  CHECK(j["config"]["smoothing_sign"] == "minus");
}

TEST_CASE("eval of a checkpoint agrees with the library on the same files") {
  const fs::path data = dataset("data_a");
  const fs::path run = trained("data_a", "run_a");
  const fs::path out = kWork / "eval_model";
  const RunResult r =
      run_cli("eval --data " + data.string() + " --checkpoint " + (run / "model.tsr").string() + " --out " + out.string());
  REQUIRE_MESSAGE(r.code == 0, r.out);

  const Dataset test = load_split(data / "test");
  const auto dets = load_detections(out / "detections.txt", test);
  const ExperimentConfig cfg = parse_experiment_config(read_file(run / "model.cfg"));
  const EvalReport lib = evaluate(test, dets, cfg.subsets, cfg.iou_thresh);
  CHECK(read_file(out / "summary.txt") == report_summary(lib) + "\n");
  const auto j = nlohmann::json::parse(read_file(out / "report.json"));
  for (const auto& s : lib.subsets) CHECK(j["log_average_miss_rate"][s.name].get<double>() == s.log_average_miss_rate);
  CHECK(r.out.find(report_summary(lib)) != std::string::npos);

  // infer writes the same detections eval scored.
  const RunResult inf = run_cli("infer --data " + data.string() + " --checkpoint " + (run / "model.tsr").string() +
                                " --out " + (kWork / "infer.txt").string());
  REQUIRE(inf.code == 0);
  CHECK(read_file(kWork / "infer.txt") == read_file(out / "detections.txt"));

  // Byte-identical report on a rerun.
  const RunResult again = run_cli("eval --data " + data.string() + " --checkpoint " + (run / "model.tsr").string() +
                                  " --out " + (kWork / "eval_model2").string());
  REQUIRE(again.code == 0);
  CHECK(read_file(out / "report.json") == read_file(kWork / "eval_model2/report.json"));
}

TEST_CASE("eval reports one miss rate per requested subset") {
  const fs::path data = dataset("data_a");
  const fs::path run = trained("data_a", "run_a");
  const RunResult r = run_cli("eval --data " + data.string() + " --checkpoint " + (run / "model.tsr").string() +
                              " --subset HO --out " + (kWork / "eval_ho").string());
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const auto j = nlohmann::json::parse(read_file(kWork / "eval_ho/report.json"));
  CHECK(j["log_average_miss_rate"].size() == 1);
  CHECK(j["log_average_miss_rate"].contains("HO"));
  CHECK(read_file(kWork / "eval_ho/summary.txt").rfind("HO=", 0) == 0);
  CHECK(run_cli("eval --data " + data.string() + " --checkpoint " + (run / "model.tsr").string() +
                " --subset far --out " + (kWork / "eval_bad").string())
            .code == 2);
}

TEST_CASE("gradcheck lists every operation once and fails an unreachable tolerance") {
  fs::create_directories(kWork);
  const RunResult ok = run_cli("gradcheck");
  CHECK(ok.code == 0);
  const RunResult strict = run_cli("gradcheck --tolerance 1e-12 --out " + (kWork / "gc.txt").string());
  CHECK(strict.code == 4);
  CHECK(strict.out.find("FAIL ") != std::string::npos);
  CHECK(read_file(kWork / "gc.txt") == strict.out);

  std::multiset<std::string> listed;
  std::istringstream is(ok.out);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("PASS ", 0) == 0 || line.rfind("FAIL ", 0) == 0) listed.insert(line.substr(5, line.find(' ', 5) - 5));
  }
  const auto suite = gradcheck_suite();
  CHECK(listed.size() == suite.size());
  for (const auto& c : suite) CHECK(listed.count(c.name) == 1);
}
