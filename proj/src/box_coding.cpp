#include "psc/box_coding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psc/errors.hpp"

namespace psc {

namespace {

void require_extent(const Box& b, const char* what) {
  if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw DegenerateBoxError(std::string(what) + " box needs positive extents");
  }
}

// Keeps exp() finite for wild early-training regressions.
constexpr double kMaxLogRatio = 4.135166556742356;  // ln(1000 / 16)

}  // namespace

Deltas encode_deltas(const Box& reference, const Box& target) {
  require_extent(reference, "reference");
  require_extent(target, "target");
  return {(target.center_x() - reference.center_x()) / reference.w,
          (target.center_y() - reference.center_y()) / reference.h, std::log(target.w / reference.w),
          std::log(target.h / reference.h)};
}

Box decode_deltas(const Box& reference, const Deltas& d) {
  require_extent(reference, "reference");
  const double cx = reference.center_x() + d[0] * reference.w;
  const double cy = reference.center_y() + d[1] * reference.h;
  const double w = reference.w * std::exp(std::min(d[2], kMaxLogRatio));
  const double h = reference.h * std::exp(std::min(d[3], kMaxLogRatio));
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores, double iou_thresh) {
  if (boxes.size() != scores.size()) throw DimensionError("nms: boxes and scores differ in length");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> keep;
  std::vector<bool> dead(boxes.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!dead[j] && iou(boxes[i], boxes[j]) > iou_thresh) dead[j] = true;
    }
  }
  return keep;
}

}  // namespace psc
