#pragma once

#include <array>
#include <span>
#include <vector>

#include "psc/part_geometry.hpp"

namespace psc {

using Deltas = std::array<double, 4>;

// (dx, dy) = centre offset over the reference extent, (dw, dh) = log size
// ratios. DegenerateBoxError on non-positive extents.
Deltas encode_deltas(const Box& reference, const Box& target);
Box decode_deltas(const Box& reference, const Deltas& deltas);

// Greedy suppression in descending score (ties by index). Returns kept
// indices in that order.
std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores, double iou_thresh);

}  // namespace psc
