#include "psc/experiment.hpp"

namespace psc {

Dataset generate_train_split(const ExperimentConfig& config) {
  return generate(config.scene, config.train_images, kTrainSplitTag);
}

Dataset generate_test_split(const ExperimentConfig& config) {
  return generate(config.scene, config.test_images, kTestSplitTag);
}

std::vector<std::vector<Detection>> detect_all(const DetectorParams& params, const ExperimentConfig& config,
                                               const Dataset& dataset) {
  InferOptions opt;
  opt.nms_iou = config.nms_iou;
  opt.score_thresh = config.score_thresh;
  opt.seed = config.seed;
  std::vector<std::vector<Detection>> out;
  out.reserve(dataset.scenes.size());
  for (const auto& scene : dataset.scenes) out.push_back(infer(params, config.detector, scene, opt));
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& train_set, const Dataset& test_set,
                                const StepCallback& on_step) {
  ExperimentResult r{train(train_set, config.detector, config.train, on_step), {}, {}};
  r.detections = detect_all(r.trained.params, config, test_set);
  r.report = evaluate(test_set, r.detections, config.subsets, config.iou_thresh);
  return r;
}

}  // namespace psc
