#include "psc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "psc/errors.hpp"
#include "psc/format.hpp"

namespace psc {

std::vector<std::size_t> detection_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Detection& da = dets[a];
    const Detection& db = dets[b];
    if (da.score != db.score) return da.score > db.score;
    return std::tie(da.box.x, da.box.y, da.box.w, da.box.h) < std::tie(db.box.x, db.box.y, db.box.w, db.box.h);
  });
  return order;
}

ImageMatch match(std::span<const Detection> dets, std::span<const Box> gts, std::span<const bool> ignore,
                 double iou_thresh) {
  if (!ignore.empty() && ignore.size() != gts.size()) throw DimensionError("match: ignore flags do not match gts");
  auto ignored = [&](std::size_t g) { return !ignore.empty() && ignore[g]; };
  ImageMatch m;
  m.kind.assign(dets.size(), MatchKind::FalsePositive);
  m.matched_gt.assign(dets.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : detection_order(dets)) {
    double best = -1.0;
    std::size_t arg = gts.size();
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(dets[d].box, gts[g]);
      if (v < iou_thresh) continue;
      if (ignored(g)) {
        hits_ignored = true;
        continue;
      }
      if (!taken[g] && v > best) best = v, arg = g;
    }
    if (arg < gts.size()) {
      taken[arg] = true;
      m.kind[d] = MatchKind::TruePositive;
      m.matched_gt[d] = static_cast<int>(arg);
      ++m.true_positives;
    } else if (hits_ignored) {
      m.kind[d] = MatchKind::Ignored;
    } else {
      ++m.false_positives;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!taken[g] && !ignored(g)) ++m.misses;
  }
  return m;
}

std::vector<CurvePoint> curve(std::vector<ScoredOutcome> outcomes, std::size_t gt_count, std::size_t image_count) {
  if (gt_count == 0) throw DataError("miss rate undefined: no ground truths");
  if (image_count == 0) throw DataError("FPPI undefined: no images");
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score > b.score; });
  std::vector<CurvePoint> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    (outcomes[i].true_positive ? tp : fp) += 1;
    if (i + 1 < outcomes.size() && outcomes[i + 1].score == outcomes[i].score) continue;
    out.push_back({outcomes[i].score, static_cast<double>(fp) / static_cast<double>(image_count),
                   1.0 - static_cast<double>(tp) / static_cast<double>(gt_count)});
  }
  return out;
}

std::array<double, kMissRateReferences> miss_rate_references() {
  std::array<double, kMissRateReferences> refs{};
  for (std::size_t i = 0; i < kMissRateReferences; ++i) {
    refs[i] = std::pow(10.0, -2.0 + 2.0 * static_cast<double>(i) / static_cast<double>(kMissRateReferences - 1));
  }
  return refs;
}

double log_average_miss_rate(std::span<const CurvePoint> points) {
  double acc = 0.0;
  for (double ref : miss_rate_references()) {
    double mr = 1.0;
    double best_fppi = -1.0;
    for (const auto& p : points) {
      if (p.fppi <= ref && p.fppi >= best_fppi) best_fppi = p.fppi, mr = p.miss_rate;
    }
    acc += std::log(std::max(mr, kMissRateFloor));
  }
  return std::exp(acc / static_cast<double>(kMissRateReferences));
}

EvalReport evaluate(const Dataset& dataset, const std::vector<std::vector<Detection>>& detections,
                    std::span<const Subset> subsets, double iou_thresh) {
  if (detections.size() != dataset.scenes.size()) {
    throw DataError("evaluate: " + std::to_string(detections.size()) + " detection lists for " +
                    std::to_string(dataset.scenes.size()) + " images");
  }
  EvalReport report;
  report.iou_thresh = iou_thresh;
  report.image_count = dataset.scenes.size();
  for (Subset s : subsets) {
    SubsetReport sr;
    sr.name = std::string(subset_name(s));
    std::vector<ScoredOutcome> outcomes;
    for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
      const auto& anns = dataset.scenes[i].annotations;
      std::vector<Box> gts;
      std::unique_ptr<bool[]> flags(new bool[anns.size() + 1]);
      for (std::size_t g = 0; g < anns.size(); ++g) {
        gts.push_back(anns[g].full);
        flags[g] = !in_subset(anns[g], s);
        if (!flags[g]) ++sr.gt_count;
      }
      const ImageMatch m = match(detections[i], gts, std::span<const bool>(flags.get(), anns.size()), iou_thresh);
      for (std::size_t d = 0; d < detections[i].size(); ++d) {
        if (m.kind[d] == MatchKind::Ignored) continue;
        outcomes.push_back({detections[i][d].score, m.kind[d] == MatchKind::TruePositive});
      }
    }
    if (sr.gt_count == 0) throw DataError("subset " + sr.name + " has no ground truths");
    sr.curve = curve(std::move(outcomes), sr.gt_count, report.image_count);
    sr.log_average_miss_rate = log_average_miss_rate(sr.curve);
    report.subsets.push_back(std::move(sr));
  }
  return report;
}

std::string report_json(const EvalReport& report, const std::map<std::string, std::string>& extra) {
  nlohmann::ordered_json j;
  j["image_count"] = report.image_count;
  j["iou_thresh"] = report.iou_thresh;
  if (!extra.empty()) {
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : extra) cfg[k] = v;
    j["config"] = cfg;
  }
  nlohmann::ordered_json mr = nlohmann::ordered_json::object();
  for (const auto& s : report.subsets) mr[s.name] = s.log_average_miss_rate;
  j["log_average_miss_rate"] = mr;
  nlohmann::ordered_json subsets = nlohmann::ordered_json::array();
  for (const auto& s : report.subsets) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["gt_count"] = s.gt_count;
    e["log_average_miss_rate"] = s.log_average_miss_rate;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& p : s.curve) pts.push_back({{"threshold", p.threshold}, {"fppi", p.fppi}, {"miss_rate", p.miss_rate}});
    e["curve"] = pts;
    subsets.push_back(e);
  }
  j["subsets"] = subsets;
  return j.dump(2) + "\n";
}

std::string report_summary(const EvalReport& report) {
  std::string out;
  for (const auto& s : report.subsets) {
    if (!out.empty()) out += ' ';
    out += s.name + "=" + format_number(s.log_average_miss_rate);
  }
  return out;
}

void save_detections(const std::filesystem::path& path, const Dataset& dataset,
                     const std::vector<std::vector<Detection>>& detections) {
  if (detections.size() != dataset.scenes.size()) throw DataError("save_detections: lists do not match images");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (const auto& d : detections[i]) {
      os << dataset.scenes[i].id << ' ' << format_number(d.box.x) << ' ' << format_number(d.box.y) << ' '
         << format_number(d.box.w) << ' ' << format_number(d.box.h) << ' ' << format_number(d.score) << '\n';
    }
  }
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<std::vector<Detection>> load_detections(const std::filesystem::path& path, const Dataset& dataset) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read detections " + path.string());
  std::map<std::size_t, std::size_t> index;
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) index[dataset.scenes[i].id] = i;
  std::vector<std::vector<Detection>> out(dataset.scenes.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    Detection d;
    if (!(ls >> id >> d.box.x >> d.box.y >> d.box.w >> d.box.h >> d.score)) {
      throw DataError("malformed detection at " + path.string() + ":" + std::to_string(line_no));
    }
    auto it = index.find(id);
    if (it == index.end()) throw DataError("detection references unknown image " + std::to_string(id));
    out[it->second].push_back(d);
  }
  return out;
}

}  // namespace psc
