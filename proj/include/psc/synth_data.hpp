#pragma once

#include <array>
#include <cstdint>

#include "psc/dataset.hpp"

namespace psc {

struct SceneConfig {
  std::size_t image_height = 128;
  std::size_t image_width = 256;
  std::size_t min_pedestrians = 1;
  std::size_t max_pedestrians = 4;
  double min_height = 40.0;
  double max_height = 112.0;
  double aspect_ratio = 0.41;  // width / height
  // Occluders per image; each is assigned to a distinct pedestrian.
  std::size_t min_occluders = 0;
  std::size_t max_occluders = 2;
  // Target visibility of an occluded pedestrian ~ U[min, max].
  double min_visibility = 0.2;
  double max_visibility = 0.9;
  double background_noise = 0.05;
  double texture_noise = 0.04;
  std::size_t clutter = 6;  // distractor rectangles per image
  std::size_t decoys = 0;   // unannotated figures with shuffled part bands
  std::uint64_t seed = 1;

  void validate() const;  // ConfigError on degenerate ranges
};

// Mean colour of each body region; pedestrians jitter around these.
const std::array<std::array<double, 3>, kNumBodyParts>& part_signatures();

// Per-image generator; `split_tag` separates train and test streams.
Scene generate_scene(const SceneConfig& config, std::size_t image_id, std::uint64_t split_tag);

Dataset generate(const SceneConfig& config, std::size_t image_count, std::uint64_t split_tag = 0);

}  // namespace psc
