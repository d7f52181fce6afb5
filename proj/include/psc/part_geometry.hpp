#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace psc {

// Axis-aligned box in continuous pixel coordinates: top-left corner plus extent.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

enum class PartKind : std::uint8_t { Head = 0, Left = 1, Mid = 2, Right = 3, Foot = 4, FullBody = 5 };

inline constexpr std::size_t kNumRegions = 6;
inline constexpr std::size_t kNumBodyParts = 5;
inline constexpr std::array<PartKind, kNumRegions> kAllRegions = {
    PartKind::Head, PartKind::Left, PartKind::Mid, PartKind::Right, PartKind::Foot, PartKind::FullBody};

constexpr std::size_t index_of(PartKind k) { return static_cast<std::size_t>(k); }
std::string_view part_name(PartKind k);

// Region boxes indexed by PartKind.
struct PartSet {
  std::array<Box, kNumRegions> boxes;
  const Box& operator[](PartKind k) const { return boxes[index_of(k)]; }
};

// Band fractions of the full-body height and width split of the middle band.
struct PartRatios {
  static constexpr double kHeadBand = 0.2;
  static constexpr double kFootBand = 0.2;
  static constexpr double kLeftSplit = 1.0 / 3.0;
  static constexpr double kRightSplit = 2.0 / 3.0;
};

inline constexpr double kMinPartitionWidth = 6.0;
inline constexpr double kMinPartitionHeight = 10.0;

// Head = top 20% full width; left/mid/right = width thirds of the middle
// 60%; foot = bottom 20% full width; FullBody = the input. Throws
// DegenerateBoxError below 6 x 10 pixels.
PartSet partition(const Box& full);

// Undirected graph over the six regions without self-loops.
class PartGraph {
 public:
  void connect(PartKind a, PartKind b);
  bool edge(PartKind a, PartKind b) const { return adj_[index_of(a)][index_of(b)]; }
  std::size_t degree(PartKind k) const;
  // Ordered pairs (i, j) with an edge, row-major.
  std::vector<std::pair<PartKind, PartKind>> ordered_edges() const;
  std::size_t edge_count() const;  // undirected

 private:
  std::array<std::array<bool, kNumRegions>, kNumRegions> adj_{};
};

// Parts sharing a boundary under the ratio table, plus FullBody to all.
const PartGraph& adjacency_template();

// area(visible ∩ full) / area(full)
double visibility_ratio(const Box& full, const Box& visible);

}  // namespace psc
