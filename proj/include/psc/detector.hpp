#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "psc/box_coding.hpp"
#include "psc/dataset.hpp"
#include "psc/errors.hpp"
#include "psc/psc_module.hpp"

namespace psc {

enum class ProposalMode { OracleJitter, Rpn };

std::string_view to_string(ProposalMode m);
ProposalMode proposal_mode_from_string(std::string_view s);  // "oracle-jitter" | "rpn"

struct Proposal {
  Box box;
  double score = 1.0;
  ProposalMode source = ProposalMode::OracleJitter;
};

struct Detection {
  Box box;
  double score = 0.0;  // pedestrian-class probability
};

// The four terms of the detection objective; total is their sum.
struct LossReport {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double rcnn_cls = 0.0;
  double rcnn_reg = 0.0;
  double total = 0.0;
};

struct DetectorConfig {
  PscConfig psc;
  // Widths of the four 3x3 backbone layers (strides 2, 2, 2, 1). The last
  // one must equal psc.feature_channels.
  std::array<std::size_t, 4> backbone_channels = {8, 16, 32, 32};

  std::vector<double> anchor_heights = {40.0, 64.0, 100.0};
  double anchor_aspect = 0.41;  // width / height
  std::size_t rpn_batch = 64;   // anchors sampled per image, at most half positive
  std::size_t rpn_top_n = 64;
  double rpn_nms = 0.7;

  ProposalMode mode = ProposalMode::OracleJitter;
  std::size_t jitter_per_gt = 8;
  std::size_t random_negatives = 8;
  // Extra negatives per ground truth that partially overlap it
  // (0 < IoU < neg_iou), standing in for the near misses an RPN emits.
  std::size_t hard_negatives = 0;
  // Jittered copies of each decoy figure, labelled negative, standing in
  // for the look-alikes an RPN would also propose.
  std::size_t decoy_proposals = 0;
  double center_jitter = 0.15;  // fraction of the box extent
  double scale_min = 0.8;
  double scale_max = 1.25;

  double pos_iou = 0.5;  // proposal / anchor labelling
  double neg_iou = 0.3;

  void validate() const;  // ConfigError
};

// Regression targets are divided by these before the loss.
inline constexpr Deltas kDeltaStds = {0.1, 0.1, 0.2, 0.2};
inline constexpr std::size_t kBackboneStride = 8;

struct DetectorParams {
  std::array<Linear, 4> backbone;  // (9 * Cin) x Cout conv weights
  Linear rpn_conv;                 // 3x3, C_f -> C_f
  Linear rpn_cls;                  // 1x1, C_f -> 2 per anchor
  Linear rpn_reg;                  // 1x1, C_f -> 4 per anchor
  PscParams psc;
  Linear head_fc;  // d -> d
  Linear cls;      // d -> 2
  Linear reg;      // d -> 4

  static DetectorParams init(Rng& rng, const DetectorConfig& config);
  // Every learnable tensor under a stable name, in a stable order.
  NamedTensors named() const;
  std::vector<Tensor> parameters() const;
  // Copies values from a checkpoint; DataError on missing names or shapes.
  void load(const NamedTensors& tensors);
};

// Image H x W x 3 -> stride-8 feature map.
FeatureMap backbone_forward(Tape& tape, const DetectorParams& params, const Tensor& image);

// Anchors in (row, column, size) order, centred on stride-8 cells.
std::vector<Box> make_anchors(const DetectorConfig& config, std::size_t feat_h, std::size_t feat_w);

struct RpnOutput {
  Tensor logits;  // M x 2, M = feat_h * feat_w * anchors per cell
  Tensor deltas;  // M x 4
  std::vector<Box> anchors;
};

RpnOutput rpn_forward(Tape& tape, const DetectorParams& params, const DetectorConfig& config, const FeatureMap& map);

// Oracle mode: jitter_per_gt jittered copies of each ground truth, then
// hard_negatives shifted copies per ground truth, then random_negatives
// boxes, then decoy_proposals jittered copies of each decoy. Every negative
// has IoU < neg_iou to every ground truth (best effort for the shifted and
// random ones; decoy copies that fail are dropped). Every box is clipped to
// the image and valid for partition.
std::vector<Proposal> propose_oracle(const DetectorConfig& config, std::span<const Box> gts, std::size_t image_h,
                                     std::size_t image_w, Rng& rng, std::span<const Box> decoys = {});

// RPN mode: decoded anchors, objectness NMS, top rpn_top_n.
std::vector<Proposal> propose_rpn(const DetectorConfig& config, const RpnOutput& rpn, std::size_t image_h,
                                  std::size_t image_w);

std::vector<Proposal> propose(const DetectorConfig& config, const FeatureMap& map, const RpnOutput* rpn,
                              std::span<const Box> gts, std::size_t image_h, std::size_t image_w, Rng& rng,
                              std::span<const Box> decoys = {});

struct HeadOutput {
  Tensor logits;  // N x 2
  Tensor deltas;  // N x 4
};

HeadOutput head_forward(Tape& tape, const FeatureMap& map, std::span<const Box> proposals,
                        const DetectorParams& params, const DetectorConfig& config);

struct LossTerms {
  Tensor rpn_cls, rpn_reg, rcnn_cls, rcnn_reg, total;
  LossReport report() const;
};

// Full objective for one image. The rng drives anchor sampling and oracle
// proposals.
LossTerms detector_loss(Tape& tape, const DetectorParams& params, const DetectorConfig& config, const Scene& scene,
                        Rng& rng);

struct TrainConfig {
  std::size_t epochs = 8;
  double lr = 1e-4;
  double decay_fraction = 0.7;  // lr x decay_factor from this fraction of epochs on
  double decay_factor = 0.1;
  std::size_t batch_images = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

std::size_t steps_per_epoch(std::size_t images, const TrainConfig& config);

struct TrainResult {
  DetectorParams params;
  std::vector<LossReport> log;  // one entry per step
};

// Thrown by train() on a non-finite loss or gradient. `partial` holds the
// parameters before the offending update and the log up to that step.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainResult partial_result)
      : NumericError(what), partial(std::move(partial_result)) {}
  TrainResult partial;
};

// Called after every step; the training loop owns `params`.
using StepCallback = std::function<void(std::size_t step, const LossReport&, const DetectorParams& params)>;

// Deterministic given the seed; DataError on an empty dataset.
TrainResult train(const Dataset& dataset, const DetectorConfig& config, const TrainConfig& train_config,
                  const StepCallback& on_step = {});

// "step,rpn_cls,rpn_reg,rcnn_cls,rcnn_reg,total" with the step counted from 1.
std::string format_loss_line(std::size_t step, const LossReport& r);

struct InferOptions {
  double score_thresh = 0.0;
  double nms_iou = 0.5;
  std::uint64_t seed = 1;  // oracle proposal stream
};

// Sorted by descending score. Oracle mode uses `gts` as the proposal oracle.
std::vector<Detection> infer(const DetectorParams& params, const DetectorConfig& config, const Scene& scene,
                             const InferOptions& options);

// Proposal stream of one image, shared by training and evaluation.
Rng image_rng(std::uint64_t seed, std::uint64_t stream, std::size_t image_id);

}  // namespace psc
