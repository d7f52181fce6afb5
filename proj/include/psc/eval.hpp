#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psc/dataset.hpp"
#include "psc/detector.hpp"

namespace psc {

// Outcome of one detection after matching.
enum class MatchKind { TruePositive, FalsePositive, Ignored };

struct ImageMatch {
  // Indexed like the input detections.
  std::vector<MatchKind> kind;
  std::vector<int> matched_gt;  // -1 when unmatched
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t misses = 0;  // unmatched non-ignored ground truths
};

// Greedy matching in descending score, ties by box coordinates
// lexicographically. Each detection takes the highest-IoU unmatched ground
// truth with IoU >= iou_thresh, ties to the earlier ground truth. A detection
// left unmatched that overlaps an ignored ground truth by iou_thresh counts
// as neither hit nor false positive. `ignore` may be empty.
ImageMatch match(std::span<const Detection> detections, std::span<const Box> gts, std::span<const bool> ignore = {},
                 double iou_thresh = 0.5);

// Descending-score processing order used by match().
std::vector<std::size_t> detection_order(std::span<const Detection> detections);

struct CurvePoint {
  double threshold = 0.0;
  double fppi = 0.0;
  double miss_rate = 1.0;
};

struct ScoredOutcome {
  double score = 0.0;
  bool true_positive = false;
};

// One point per distinct score, swept from the highest score down; a
// detection counts at threshold s when its score >= s. DataError when
// gt_count is zero or image_count is zero.
std::vector<CurvePoint> curve(std::vector<ScoredOutcome> outcomes, std::size_t gt_count, std::size_t image_count);

inline constexpr std::size_t kMissRateReferences = 9;
inline constexpr double kMissRateFloor = 1e-6;

// Geometric mean of the miss rate at 9 log-spaced FPPI references in
// [1e-2, 1]; each takes the point with the largest FPPI <= reference (the
// last such point in sweep order), or 1.0 when there is none.
double log_average_miss_rate(std::span<const CurvePoint> curve);
std::array<double, kMissRateReferences> miss_rate_references();

struct SubsetReport {
  std::string name;
  std::size_t gt_count = 0;
  double log_average_miss_rate = 1.0;
  std::vector<CurvePoint> curve;
};

struct EvalReport {
  std::vector<SubsetReport> subsets;
  double iou_thresh = 0.5;
  std::size_t image_count = 0;
};

// detections[i] belongs to dataset.scenes[i]. Ground truths outside the
// subset are ignored for that subset. DataError when a subset has no
// ground truths or the detection lists do not line up with the scenes.
EvalReport evaluate(const Dataset& dataset, const std::vector<std::vector<Detection>>& detections,
                    std::span<const Subset> subsets, double iou_thresh = 0.5);

// Pretty-printed JSON with the curves and per-subset values; `extra` keys
// (strings) are copied into a "config" object.
std::string report_json(const EvalReport& report, const std::map<std::string, std::string>& extra = {});
// "R=<mr> HO=<mr> R+HO=<mr>" over the evaluated subsets, in order.
std::string report_summary(const EvalReport& report);

// Detections file: "image_id x y w h score" per detection.
void save_detections(const std::filesystem::path& path, const Dataset& dataset,
                     const std::vector<std::vector<Detection>>& detections);
// Lists aligned with dataset.scenes; DataError on unknown image ids or malformed lines.
std::vector<std::vector<Detection>> load_detections(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace psc
