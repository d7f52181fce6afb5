#include "psc/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psc/format.hpp"
#include "psc/losses.hpp"
#include "psc/optimizer.hpp"

namespace psc {

std::string_view to_string(ProposalMode m) { return m == ProposalMode::OracleJitter ? "oracle-jitter" : "rpn"; }

ProposalMode proposal_mode_from_string(std::string_view s) {
  if (s == "oracle-jitter") return ProposalMode::OracleJitter;
  if (s == "rpn") return ProposalMode::Rpn;
  throw ConfigError("proposal mode must be 'oracle-jitter' or 'rpn', got '" + std::string(s) + "'");
}

void DetectorConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("detector config: " + what); };
  if (backbone_channels.back() != psc.feature_channels) fail("last backbone width must equal feature_channels");
  for (auto c : backbone_channels) {
    if (c == 0) fail("backbone widths must be positive");
  }
  if (psc.pooled == 0 || psc.part_channels == 0 || psc.full_channels == 0 || psc.embed_dim == 0) {
    fail("PSC widths must be positive");
  }
  if (anchor_heights.empty()) fail("need at least one anchor height");
  for (double h : anchor_heights) {
    if (!(h > 0.0)) fail("anchor heights must be positive");
  }
  if (!(anchor_aspect > 0.0)) fail("anchor_aspect must be positive");
  if (rpn_batch < 2 || rpn_top_n == 0) fail("rpn_batch >= 2 and rpn_top_n >= 1 required");
  if (!(center_jitter >= 0.0) || !(scale_min > 0.0) || !(scale_min <= scale_max)) fail("invalid jitter ranges");
  if (!(neg_iou > 0.0 && neg_iou <= pos_iou && pos_iou <= 1.0)) fail("need 0 < neg_iou <= pos_iou <= 1");
  if (!(rpn_nms > 0.0 && rpn_nms <= 1.0)) fail("rpn_nms must be in (0, 1]");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train config: epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("train config: lr must be positive");
  if (!(decay_fraction >= 0.0 && decay_fraction <= 1.0)) throw ConfigError("train config: decay_fraction in [0, 1]");
  if (!(decay_factor > 0.0)) throw ConfigError("train config: decay_factor must be positive");
  if (batch_images == 0) throw ConfigError("train config: batch_images must be positive");
}

Rng image_rng(std::uint64_t seed, std::uint64_t stream, std::size_t image_id) {
  return Rng(mix_seed(mix_seed(seed, stream), image_id));
}

// ---------------------------------------------------------------- parameters

DetectorParams DetectorParams::init(Rng& rng, const DetectorConfig& config) {
  config.validate();
  DetectorParams p;
  std::size_t cin = 3;
  for (std::size_t l = 0; l < 4; ++l) {
    p.backbone[l] = Linear::he(rng, 9 * cin, config.backbone_channels[l]);
    cin = config.backbone_channels[l];
  }
  const std::size_t cf = config.psc.feature_channels;
  const std::size_t anchors = config.anchor_heights.size();
  p.rpn_conv = Linear::he(rng, 9 * cf, cf);
  p.rpn_cls = Linear::he(rng, cf, 2 * anchors, 0.1);
  p.rpn_reg = Linear::he(rng, cf, 4 * anchors, 0.1);
  p.psc = PscParams::init(rng, config.psc);
  const std::size_t d = config.psc.embed_dim;
  p.head_fc = Linear::he(rng, d, d);
  p.cls = Linear::he(rng, d, 2, 0.1);
  p.reg = Linear::he(rng, d, 4, 0.1);
  return p;
}

NamedTensors DetectorParams::named() const {
  NamedTensors out;
  for (std::size_t l = 0; l < backbone.size(); ++l) backbone[l].collect(out, "backbone." + std::to_string(l));
  rpn_conv.collect(out, "rpn.conv");
  rpn_cls.collect(out, "rpn.cls");
  rpn_reg.collect(out, "rpn.reg");
  psc.collect(out, "psc");
  head_fc.collect(out, "head.fc");
  cls.collect(out, "head.cls");
  reg.collect(out, "head.reg");
  return out;
}

std::vector<Tensor> DetectorParams::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

void DetectorParams::load(const NamedTensors& tensors) {
  for (auto& [name, t] : named()) {
    const Tensor& src = find_tensor(tensors, name);
    if (src.shape() != t.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_to_string(src.shape()) + ", expected " +
                      shape_to_string(t.shape()));
    }
    Tensor dst = t;
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    dst.zero_grad();
  }
}

// ------------------------------------------------------------------ forward

FeatureMap backbone_forward(Tape& tape, const DetectorParams& params, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("backbone expects an H x W x 3 image, got " + shape_to_string(image.shape()));
  }
  Tensor x(image.shape());
  for (std::size_t i = 0; i < image.numel(); ++i) x[i] = image[i] - 0.5;
  for (std::size_t l = 0; l < params.backbone.size(); ++l) {
    const std::size_t stride = l + 1 < params.backbone.size() ? 2 : 1;
    x = relu(tape, conv2d(tape, x, params.backbone[l].weight, params.backbone[l].bias, 3, stride, 1));
  }
  return FeatureMap{x, static_cast<double>(kBackboneStride)};
}

std::vector<Box> make_anchors(const DetectorConfig& config, std::size_t feat_h, std::size_t feat_w) {
  std::vector<Box> out;
  out.reserve(feat_h * feat_w * config.anchor_heights.size());
  const double s = static_cast<double>(kBackboneStride);
  for (std::size_t i = 0; i < feat_h; ++i) {
    for (std::size_t j = 0; j < feat_w; ++j) {
      const double cx = (static_cast<double>(j) + 0.5) * s;
      const double cy = (static_cast<double>(i) + 0.5) * s;
      for (double h : config.anchor_heights) {
        const double w = config.anchor_aspect * h;
        out.push_back({cx - 0.5 * w, cy - 0.5 * h, w, h});
      }
    }
  }
  return out;
}

RpnOutput rpn_forward(Tape& tape, const DetectorParams& params, const DetectorConfig& config, const FeatureMap& map) {
  Tensor h = relu(tape, conv2d(tape, map.values, params.rpn_conv.weight, params.rpn_conv.bias, 3, 1, 1));
  const std::size_t m = map.height() * map.width() * config.anchor_heights.size();
  RpnOutput out;
  out.logits = reshape(tape, conv1x1(tape, h, params.rpn_cls.weight, params.rpn_cls.bias), {m, 2});
  out.deltas = reshape(tape, conv1x1(tape, h, params.rpn_reg.weight, params.rpn_reg.bias), {m, 4});
  out.anchors = make_anchors(config, map.height(), map.width());
  return out;
}

HeadOutput head_forward(Tape& tape, const FeatureMap& map, std::span<const Box> proposals,
                        const DetectorParams& params, const DetectorConfig& config) {
  Tensor f = psc_features(tape, map, proposals, params.psc, config.psc);
  Tensor h = relu(tape, params.head_fc(tape, f));
  return {params.cls(tape, h), params.reg(tape, h)};
}

// ---------------------------------------------------------------- proposals

namespace {

bool clip_to_image(Box& b, std::size_t image_h, std::size_t image_w) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(image_w));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(image_h));
  const double x1 = std::clamp(b.right(), 0.0, static_cast<double>(image_w));
  const double y1 = std::clamp(b.bottom(), 0.0, static_cast<double>(image_h));
  b = {x0, y0, x1 - x0, y1 - y0};
  return b.w >= kMinPartitionWidth && b.h >= kMinPartitionHeight && std::isfinite(b.w) && std::isfinite(b.h);
}

double max_iou(const Box& b, std::span<const Box> gts, std::size_t* arg = nullptr) {
  double best = 0.0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const double v = iou(b, gts[g]);
    if (v > best) {
      best = v;
      if (arg) *arg = g;
    }
  }
  return best;
}

double positive_probability(const Tensor& logits, std::size_t row) {
  const double z0 = logits[row * 2], z1 = logits[row * 2 + 1];
  return 1.0 / (1.0 + std::exp(z0 - z1));
}

Tensor delta_targets(std::span<const Box> refs, std::span<const Box> targets) {
  Tensor t({refs.size(), 4});
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Deltas d = encode_deltas(refs[i], targets[i]);
    for (std::size_t k = 0; k < 4; ++k) t[i * 4 + k] = d[k] / kDeltaStds[k];
  }
  return t;
}

}  // namespace

namespace {

// Scale and centre jitter of one oracle copy; falls back to `g` when no
// draw survives clipping.
Box jittered_copy(const DetectorConfig& config, const Box& g, std::size_t image_h, std::size_t image_w, Rng& rng) {
  const double log_lo = std::log(config.scale_min), log_hi = std::log(config.scale_max);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double dx = config.center_jitter > 0 ? rng.uniform(-config.center_jitter, config.center_jitter) : 0.0;
    const double dy = config.center_jitter > 0 ? rng.uniform(-config.center_jitter, config.center_jitter) : 0.0;
    const double s = log_hi > log_lo ? std::exp(rng.uniform(log_lo, log_hi)) : config.scale_min;
    const double w = g.w * s, h = g.h * s;
    Box b = {g.center_x() + dx * g.w - 0.5 * w, g.center_y() + dy * g.h - 0.5 * h, w, h};
    if (clip_to_image(b, image_h, image_w)) return b;
  }
  Box b = g;
  clip_to_image(b, image_h, image_w);
  return b;
}

}  // namespace

std::vector<Proposal> propose_oracle(const DetectorConfig& config, std::span<const Box> gts, std::size_t image_h,
                                     std::size_t image_w, Rng& rng, std::span<const Box> decoys) {
  std::vector<Proposal> out;
  out.reserve(gts.size() * (config.jitter_per_gt + config.hard_negatives) + config.random_negatives +
              decoys.size() * config.decoy_proposals);
  const double log_lo = std::log(config.scale_min), log_hi = std::log(config.scale_max);
  for (const Box& g : gts) {
    for (std::size_t k = 0; k < config.jitter_per_gt; ++k) {
      out.push_back({jittered_copy(config, g, image_h, image_w, rng), 1.0, ProposalMode::OracleJitter});
    }
  }
  for (const Box& g : gts) {
    for (std::size_t k = 0; k < config.hard_negatives; ++k) {
      Box b = g;
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double s = std::exp(rng.uniform(log_lo, log_hi));
        const double w = g.w * s, h = g.h * s;
        // Shift far enough along one axis to leave the positive range.
        const bool vertical = rng.bernoulli(0.5);
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double dx = vertical ? rng.uniform(-0.3, 0.3) : sign * rng.uniform(0.55, 0.9);
        const double dy = vertical ? sign * rng.uniform(0.4, 0.75) : rng.uniform(-0.15, 0.15);
        b = {g.center_x() + dx * g.w - 0.5 * w, g.center_y() + dy * g.h - 0.5 * h, w, h};
        if (clip_to_image(b, image_h, image_w) && max_iou(b, gts) < config.neg_iou && iou(b, g) > 0.0) break;
        b = Box{};
      }
      if (b.valid()) out.push_back({b, 0.0, ProposalMode::OracleJitter});
    }
  }
  const double hmin = std::max(kMinPartitionHeight + 1.0, 0.3 * static_cast<double>(image_h));
  const double hmax = std::max(hmin, 0.9 * static_cast<double>(image_h));
  for (std::size_t k = 0; k < config.random_negatives; ++k) {
    Box b{};
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double h = rng.uniform(hmin, hmax);
      const double w = std::clamp(config.anchor_aspect * h * rng.uniform(0.8, 1.25), kMinPartitionWidth + 1.0,
                                  static_cast<double>(image_w));
      b = {rng.uniform(0.0, static_cast<double>(image_w) - w), rng.uniform(0.0, static_cast<double>(image_h) - h), w, h};
      if (max_iou(b, gts) < config.neg_iou) break;
    }
    if (!clip_to_image(b, image_h, image_w)) {
      throw DegenerateBoxError("image too small for oracle negatives");
    }
    out.push_back({b, 0.0, ProposalMode::OracleJitter});
  }
  for (const Box& d : decoys) {
    for (std::size_t k = 0; k < config.decoy_proposals; ++k) {
      const Box b = jittered_copy(config, d, image_h, image_w, rng);
      if (b.valid() && max_iou(b, gts) < config.neg_iou) out.push_back({b, 0.0, ProposalMode::OracleJitter});
    }
  }
  return out;
}

std::vector<Proposal> propose_rpn(const DetectorConfig& config, const RpnOutput& rpn, std::size_t image_h,
                                  std::size_t image_w) {
  std::vector<Box> boxes;
  std::vector<double> scores;
  for (std::size_t a = 0; a < rpn.anchors.size(); ++a) {
    Deltas d{};
    for (std::size_t k = 0; k < 4; ++k) d[k] = rpn.deltas[a * 4 + k] * kDeltaStds[k];
    Box b = decode_deltas(rpn.anchors[a], d);
    if (!clip_to_image(b, image_h, image_w)) continue;
    boxes.push_back(b);
    scores.push_back(positive_probability(rpn.logits, a));
  }
  std::vector<Proposal> out;
  for (std::size_t i : nms(boxes, scores, config.rpn_nms)) {
    if (out.size() == config.rpn_top_n) break;
    out.push_back({boxes[i], scores[i], ProposalMode::Rpn});
  }
  return out;
}

std::vector<Proposal> propose(const DetectorConfig& config, const FeatureMap& map, const RpnOutput* rpn,
                              std::span<const Box> gts, std::size_t image_h, std::size_t image_w, Rng& rng,
                              std::span<const Box> decoys) {
  if (!map.values.defined() || map.values.numel() == 0) throw DimensionError("propose: empty image features");
  if (config.mode == ProposalMode::OracleJitter) return propose_oracle(config, gts, image_h, image_w, rng, decoys);
  if (!rpn) throw DimensionError("propose: rpn mode needs RPN outputs");
  return propose_rpn(config, *rpn, image_h, image_w);
}

// --------------------------------------------------------------------- loss

LossReport LossTerms::report() const {
  LossReport r;
  r.rpn_cls = rpn_cls.item();
  r.rpn_reg = rpn_reg.item();
  r.rcnn_cls = rcnn_cls.item();
  r.rcnn_reg = rcnn_reg.item();
  r.total = total.item();
  return r;
}

LossTerms detector_loss(Tape& tape, const DetectorParams& params, const DetectorConfig& config, const Scene& scene,
                        Rng& rng) {
  const std::size_t image_h = scene.image.dim(0), image_w = scene.image.dim(1);
  std::vector<Box> gts;
  for (const auto& a : scene.annotations) gts.push_back(a.full);

  FeatureMap map = backbone_forward(tape, params, scene.image);
  RpnOutput rpn = rpn_forward(tape, params, config, map);
  LossTerms t;

  // Anchor labels: best anchor per ground truth and IoU >= pos_iou are
  // positive, IoU < neg_iou negative, the rest ignored.
  const std::size_t m = rpn.anchors.size();
  std::vector<int> label(m, -1);
  std::vector<std::size_t> match(m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    const double v = max_iou(rpn.anchors[a], gts, &match[a]);
    if (v >= config.pos_iou) label[a] = 1;
    else if (v < config.neg_iou) label[a] = 0;
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    double best = 0.0;
    std::size_t arg = m;
    for (std::size_t a = 0; a < m; ++a) {
      const double v = iou(rpn.anchors[a], gts[g]);
      if (v > best) best = v, arg = a;
    }
    if (arg < m) label[arg] = 1, match[arg] = g;
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t a = 0; a < m; ++a) {
    if (label[a] == 1) pos.push_back(a);
    else if (label[a] == 0) neg.push_back(a);
  }
  std::shuffle(pos.begin(), pos.end(), rng.engine());
  std::shuffle(neg.begin(), neg.end(), rng.engine());
  pos.resize(std::min(pos.size(), config.rpn_batch / 2));
  neg.resize(std::min(neg.size(), config.rpn_batch - pos.size()));
  std::vector<std::size_t> sampled(pos), labels(pos.size(), 1);
  sampled.insert(sampled.end(), neg.begin(), neg.end());
  labels.resize(sampled.size(), 0);
  t.rpn_cls = sampled.empty() ? Tensor::scalar(0.0)
                              : cross_entropy(tape, gather_rows(tape, rpn.logits, sampled), labels);
  if (pos.empty()) {
    t.rpn_reg = Tensor::scalar(0.0);
  } else {
    std::vector<Box> refs, tgts;
    for (std::size_t a : pos) refs.push_back(rpn.anchors[a]), tgts.push_back(gts[match[a]]);
    t.rpn_reg = smooth_l1(tape, gather_rows(tape, rpn.deltas, pos), delta_targets(refs, tgts));
  }

  // Proposal labels with the same thresholds; ignored proposals never reach the head.
  std::vector<Proposal> props = propose(config, map, &rpn, gts, image_h, image_w, rng, scene.decoys);
  if (config.mode == ProposalMode::Rpn) {
    for (const Box& g : gts) props.push_back({g, 1.0, ProposalMode::Rpn});
  }
  std::vector<Box> boxes, pos_refs, pos_tgts;
  std::vector<std::size_t> head_labels, head_pos;
  for (const auto& p : props) {
    std::size_t g = 0;
    const double v = max_iou(p.box, gts, &g);
    if (v >= config.pos_iou) {
      head_pos.push_back(boxes.size());
      pos_refs.push_back(p.box);
      pos_tgts.push_back(gts[g]);
      head_labels.push_back(1);
    } else if (v < config.neg_iou) {
      head_labels.push_back(0);
    } else {
      continue;
    }
    boxes.push_back(p.box);
  }
  if (boxes.empty()) {
    t.rcnn_cls = Tensor::scalar(0.0);
    t.rcnn_reg = Tensor::scalar(0.0);
  } else {
    HeadOutput head = head_forward(tape, map, boxes, params, config);
    t.rcnn_cls = cross_entropy(tape, head.logits, head_labels);
    t.rcnn_reg = head_pos.empty() ? Tensor::scalar(0.0)
                                  : smooth_l1(tape, gather_rows(tape, head.deltas, head_pos),
                                              delta_targets(pos_refs, pos_tgts));
  }
  t.total = add(tape, add(tape, add(tape, t.rpn_cls, t.rpn_reg), t.rcnn_cls), t.rcnn_reg);
  return t;
}

// ---------------------------------------------------------------- training

std::size_t steps_per_epoch(std::size_t images, const TrainConfig& config) {
  return (images + config.batch_images - 1) / config.batch_images;
}

std::string format_loss_line(std::size_t step, const LossReport& r) {
  return std::to_string(step) + "," + format_number(r.rpn_cls) + "," + format_number(r.rpn_reg) + "," +
         format_number(r.rcnn_cls) + "," + format_number(r.rcnn_reg) + "," + format_number(r.total);
}

namespace {

bool finite(const LossReport& r) {
  return std::isfinite(r.rpn_cls) && std::isfinite(r.rpn_reg) && std::isfinite(r.rcnn_cls) &&
         std::isfinite(r.rcnn_reg) && std::isfinite(r.total);
}

std::string describe(const LossReport& r) {
  return "rpn_cls=" + format_number(r.rpn_cls) + " rpn_reg=" + format_number(r.rpn_reg) +
         " rcnn_cls=" + format_number(r.rcnn_cls) + " rcnn_reg=" + format_number(r.rcnn_reg) +
         " total=" + format_number(r.total);
}

}  // namespace

TrainResult train(const Dataset& dataset, const DetectorConfig& config, const TrainConfig& tc,
                  const StepCallback& on_step) {
  config.validate();
  tc.validate();
  if (dataset.scenes.empty()) throw DataError("train: empty dataset");
  Rng init_rng(mix_seed(tc.seed, 0x1417));
  TrainResult result{DetectorParams::init(init_rng, config), {}};
  const std::vector<Tensor> params = result.params.parameters();
  Adam opt(params, tc.lr);
  Rng order_rng(mix_seed(tc.seed, 0x0de5));

  const std::size_t n = dataset.scenes.size();
  const auto decay_epoch =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tc.decay_fraction * static_cast<double>(tc.epochs))));
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    opt.set_lr(epoch >= decay_epoch ? tc.lr * tc.decay_factor : tc.lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng.engine());
    for (std::size_t begin = 0; begin < n; begin += tc.batch_images) {
      const std::size_t end = std::min(n, begin + tc.batch_images);
      const double inv = 1.0 / static_cast<double>(end - begin);
      LossReport r;
      for (std::size_t b = begin; b < end; ++b) {
        const Scene& scene = dataset.scenes[order[b]];
        Rng rng = image_rng(tc.seed, 1 + epoch, scene.id);
        Tape tape;
        LossTerms terms = detector_loss(tape, result.params, config, scene, rng);
        const LossReport one = terms.report();
        r.rpn_cls += inv * one.rpn_cls;
        r.rpn_reg += inv * one.rpn_reg;
        r.rcnn_cls += inv * one.rcnn_cls;
        r.rcnn_reg += inv * one.rcnn_reg;
        if (!finite(one)) break;
        if (terms.total.requires_grad()) tape.backward(scale(tape, terms.total, inv));
      }
      r.total = ((r.rpn_cls + r.rpn_reg) + r.rcnn_cls) + r.rcnn_reg;
      ++step;
      bool ok = finite(r);
      for (const auto& p : params) {
        if (!ok) break;
        for (double g : p.grad()) {
          if (!std::isfinite(g)) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) {
        opt.zero_grad();
        throw TrainingDiverged("non-finite loss or gradient at step " + std::to_string(step) + " (epoch " +
                                   std::to_string(epoch + 1) + "): " + describe(r),
                               std::move(result));
      }
      opt.step();
      result.log.push_back(r);
      if (on_step) on_step(step, r, result.params);
    }
  }
  return result;
}

// --------------------------------------------------------------- inference

std::vector<Detection> infer(const DetectorParams& params, const DetectorConfig& config, const Scene& scene,
                             const InferOptions& options) {
  Tape tape = Tape::inference();
  const std::size_t image_h = scene.image.dim(0), image_w = scene.image.dim(1);
  std::vector<Box> gts;
  for (const auto& a : scene.annotations) gts.push_back(a.full);
  FeatureMap map = backbone_forward(tape, params, scene.image);
  RpnOutput rpn;
  if (config.mode == ProposalMode::Rpn) rpn = rpn_forward(tape, params, config, map);
  Rng rng = image_rng(options.seed, 0, scene.id);
  std::vector<Proposal> props = propose(config, map, &rpn, gts, image_h, image_w, rng, scene.decoys);
  if (props.empty()) return {};
  std::vector<Box> boxes;
  for (const auto& p : props) boxes.push_back(p.box);
  HeadOutput head = head_forward(tape, map, boxes, params, config);

  std::vector<Box> out_boxes;
  std::vector<double> scores;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Deltas d{};
    for (std::size_t k = 0; k < 4; ++k) d[k] = head.deltas[i * 4 + k] * kDeltaStds[k];
    Box b = decode_deltas(boxes[i], d);
    const double s = positive_probability(head.logits, i);
    if (!clip_to_image(b, image_h, image_w) || !std::isfinite(s)) continue;
    out_boxes.push_back(b);
    scores.push_back(s);
  }
  std::vector<Detection> dets;
  for (std::size_t i : nms(out_boxes, scores, options.nms_iou)) {
    if (scores[i] >= options.score_thresh) dets.push_back({out_boxes[i], scores[i]});
  }
  return dets;
}

}  // namespace psc
