#include "psc/part_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psc/errors.hpp"

namespace psc {

bool Box::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 && h > 0.0;
}

double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::string_view part_name(PartKind k) {
  switch (k) {
    case PartKind::Head: return "head";
    case PartKind::Left: return "left";
    case PartKind::Mid: return "mid";
    case PartKind::Right: return "right";
    case PartKind::Foot: return "foot";
    case PartKind::FullBody: return "full";
  }
  return "?";
}

PartSet partition(const Box& full) {
  if (!full.valid() || full.w < kMinPartitionWidth || full.h < kMinPartitionHeight) {
    std::ostringstream os;
    os << "partition: box (" << full.x << ", " << full.y << ", " << full.w << ", " << full.h
       << ") is below the minimum " << kMinPartitionWidth << " x " << kMinPartitionHeight;
    throw DegenerateBoxError(os.str());
  }
  // Band edges first, extents by difference, so the pieces tile exactly.
  const double y0 = full.y;
  const double y1 = full.y + PartRatios::kHeadBand * full.h;
  const double y2 = full.y + (1.0 - PartRatios::kFootBand) * full.h;
  const double y3 = full.bottom();
  const double x0 = full.x;
  const double x1 = full.x + PartRatios::kLeftSplit * full.w;
  const double x2 = full.x + PartRatios::kRightSplit * full.w;
  const double x3 = full.right();

  PartSet set;
  set.boxes[index_of(PartKind::Head)] = {x0, y0, full.w, y1 - y0};
  set.boxes[index_of(PartKind::Left)] = {x0, y1, x1 - x0, y2 - y1};
  set.boxes[index_of(PartKind::Mid)] = {x1, y1, x2 - x1, y2 - y1};
  set.boxes[index_of(PartKind::Right)] = {x2, y1, x3 - x2, y2 - y1};
  set.boxes[index_of(PartKind::Foot)] = {x0, y2, full.w, y3 - y2};
  set.boxes[index_of(PartKind::FullBody)] = full;
  return set;
}

void PartGraph::connect(PartKind a, PartKind b) {
  if (a == b) return;
  adj_[index_of(a)][index_of(b)] = true;
  adj_[index_of(b)][index_of(a)] = true;
}

std::size_t PartGraph::degree(PartKind k) const {
  const auto& row = adj_[index_of(k)];
  return static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
}

std::vector<std::pair<PartKind, PartKind>> PartGraph::ordered_edges() const {
  std::vector<std::pair<PartKind, PartKind>> out;
  for (auto a : kAllRegions) {
    for (auto b : kAllRegions) {
      if (edge(a, b)) out.emplace_back(a, b);
    }
  }
  return out;
}

std::size_t PartGraph::edge_count() const { return ordered_edges().size() / 2; }

const PartGraph& adjacency_template() {
  static const PartGraph graph = [] {
    PartGraph g;
    using K = PartKind;
    g.connect(K::Head, K::Left);
    g.connect(K::Head, K::Mid);
    g.connect(K::Head, K::Right);
    g.connect(K::Left, K::Mid);
    g.connect(K::Mid, K::Right);
    g.connect(K::Foot, K::Left);
    g.connect(K::Foot, K::Mid);
    g.connect(K::Foot, K::Right);
    for (std::size_t i = 0; i < kNumBodyParts; ++i) g.connect(K::FullBody, kAllRegions[i]);
    return g;
  }();
  return graph;
}

double visibility_ratio(const Box& full, const Box& visible) {
  if (!full.valid()) throw DegenerateBoxError("visibility_ratio: full box has no area");
  if (!visible.valid()) return 0.0;
  return std::clamp(intersection_area(full, visible) / full.area(), 0.0, 1.0);
}

}  // namespace psc
