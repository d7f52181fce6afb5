#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "psc/part_geometry.hpp"
#include "psc/tensor.hpp"

namespace psc {

struct Annotation {
  Box full;
  Box visible;
  double visibility = 1.0;
  double height = 0.0;  // full-body height in pixels
};

struct Scene {
  std::size_t id = 0;
  Tensor image;  // H x W x 3, values roughly in [0, 1]
  std::vector<Annotation> annotations;
  std::vector<Box> occluders;  // as drawn, for verification
  std::vector<Box> decoys;     // unannotated look-alike figures, as drawn
};

struct Dataset {
  std::vector<Scene> scenes;

  std::size_t pedestrian_count() const;
};

// Evaluation subsets: R (visibility > 0.65), HO (0.20 <= visibility <= 0.65),
// both restricted to height > 50 px, and their union.
enum class Subset { Reasonable, HeavyOcclusion, ReasonableAndHeavy };

inline constexpr double kSubsetMinHeight = 50.0;
inline constexpr double kReasonableMinVisibility = 0.65;
inline constexpr double kHeavyMinVisibility = 0.20;

Subset parse_subset(std::string_view name);  // "R", "HO", "R+HO"; ConfigError otherwise
std::string_view subset_name(Subset s);
bool in_subset(const Annotation& a, Subset s);

struct AnnotationRef {
  std::size_t scene = 0;
  std::size_t annotation = 0;
  friend bool operator==(const AnnotationRef&, const AnnotationRef&) = default;
};

std::vector<AnnotationRef> subset(const Dataset& dataset, Subset s);
std::vector<AnnotationRef> subset(const Dataset& dataset, std::string_view name);

// On-disk split layout:
//   <dir>/images/<id>.tsr     tensor container holding "image"
//   <dir>/annotations.txt     "image_id x y w h vx vy vw vh visibility" per pedestrian
//   <dir>/images.txt          one image id per line (images without pedestrians included)
//   <dir>/decoys.txt          "image_id x y w h" per decoy figure; optional on load
void save_split(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_split(const std::filesystem::path& dir);

// Annotation lines alone, in file order.
std::string format_annotation_line(std::size_t image_id, const Annotation& a);

}  // namespace psc
