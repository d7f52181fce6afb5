#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "psc/dataset.hpp"
#include "psc/detector.hpp"
#include "psc/synth_data.hpp"

namespace psc {

// Everything one experiment needs. Text form is one "key = value" per line,
// '#' starts a comment, lists are comma-separated. Unknown keys and
// malformed values raise ConfigError.
struct ExperimentConfig {
  std::uint64_t seed = 1;  // data generation, initialisation and sampling

  SceneConfig scene;
  std::size_t train_images = 300;
  std::size_t test_images = 100;

  DetectorConfig detector;
  TrainConfig train;

  double iou_thresh = 0.5;
  double nms_iou = 0.5;
  double score_thresh = 0.0;
  std::vector<Subset> subsets = {Subset::Reasonable, Subset::HeavyOcclusion, Subset::ReasonableAndHeavy};

  // Pushes the shared seed into the scene and training configs and checks
  // every section.
  void finalize();

  // Applies one assignment; ConfigError on unknown key or bad value.
  void set(std::string_view key, std::string_view value);

  // All keys with their current values, fixed order; parses back to an
  // identical config.
  std::string to_text() const;
};

ExperimentConfig parse_experiment_config(std::string_view text);
// ConfigError naming the path when it cannot be read.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace psc
