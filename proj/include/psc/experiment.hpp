#pragma once

#include "psc/eval.hpp"
#include "psc/experiment_config.hpp"

namespace psc {

inline constexpr std::uint64_t kTrainSplitTag = 1;
inline constexpr std::uint64_t kTestSplitTag = 2;

Dataset generate_train_split(const ExperimentConfig& config);
Dataset generate_test_split(const ExperimentConfig& config);

// Inference over every scene, aligned with dataset.scenes.
std::vector<std::vector<Detection>> detect_all(const DetectorParams& params, const ExperimentConfig& config,
                                               const Dataset& dataset);

struct ExperimentResult {
  TrainResult trained;
  std::vector<std::vector<Detection>> detections;
  EvalReport report;
};

// train -> infer on `test` -> evaluate the configured subsets.
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& train_set, const Dataset& test_set,
                                const StepCallback& on_step = {});

}  // namespace psc
