#include "psc/roi_features.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "psc/errors.hpp"

namespace psc {

namespace {

struct Tap {
  std::size_t cell;
  double weight;
};

constexpr std::size_t kTapsPerBin = 16;  // 2 x 2 samples, 4 corners each

// Centre-aligned bilinear weights for one sample at feature coordinate (fy, fx).
void sample_taps(double fy, double fx, std::size_t h, std::size_t w, double share, Tap* out) {
  const double cy = std::clamp(fy - 0.5, 0.0, static_cast<double>(h - 1));
  const double cx = std::clamp(fx - 0.5, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(cy));
  const auto x0 = static_cast<std::size_t>(std::floor(cx));
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const double ly = cy - static_cast<double>(y0);
  const double lx = cx - static_cast<double>(x0);
  out[0] = {y0 * w + x0, share * (1.0 - ly) * (1.0 - lx)};
  out[1] = {y0 * w + x1, share * (1.0 - ly) * lx};
  out[2] = {y1 * w + x0, share * ly * (1.0 - lx)};
  out[3] = {y1 * w + x1, share * ly * lx};
}

std::string describe(const Box& b) {
  std::ostringstream os;
  os << '(' << b.x << ", " << b.y << ", " << b.w << ", " << b.h << ')';
  return os.str();
}

}  // namespace

Tensor roi_align(Tape& tape, const FeatureMap& map, std::span<const Box> regions, std::size_t pooled) {
  if (!map.values.defined() || map.values.rank() != 3) throw DimensionError("roi_align: feature map must be H x W x C");
  if (pooled == 0) throw DimensionError("roi_align: pooled resolution must be positive");
  if (regions.empty()) throw DimensionError("roi_align: no regions");
  if (map.stride < 1.0) throw DimensionError("roi_align: stride must be >= 1");
  const std::size_t h = map.height(), w = map.width(), c = map.channels();
  const std::size_t bins = pooled * pooled;
  const std::size_t n = regions.size();

  auto taps = std::make_shared<std::vector<Tap>>(n * bins * kTapsPerBin);
  for (std::size_t r = 0; r < n; ++r) {
    const Box& b = regions[r];
    if (!b.valid()) throw DegenerateBoxError("roi_align: region " + describe(b) + " has no positive extent");
    const double fx0 = std::clamp(b.x / map.stride, 0.0, static_cast<double>(w));
    const double fx1 = std::clamp(b.right() / map.stride, 0.0, static_cast<double>(w));
    const double fy0 = std::clamp(b.y / map.stride, 0.0, static_cast<double>(h));
    const double fy1 = std::clamp(b.bottom() / map.stride, 0.0, static_cast<double>(h));
    if (fx1 <= fx0 || fy1 <= fy0) {
      throw OutOfBoundsError("roi_align: region " + describe(b) + " lies outside the " + std::to_string(h) + " x " +
                             std::to_string(w) + " feature map");
    }
    const double bin_h = (fy1 - fy0) / static_cast<double>(pooled);
    const double bin_w = (fx1 - fx0) / static_cast<double>(pooled);
    for (std::size_t py = 0; py < pooled; ++py) {
      for (std::size_t px = 0; px < pooled; ++px) {
        Tap* t = taps->data() + ((r * bins) + py * pooled + px) * kTapsPerBin;
        int s = 0;
        for (double sy : {0.25, 0.75}) {
          for (double sx : {0.25, 0.75}) {
            sample_taps(fy0 + (static_cast<double>(py) + sy) * bin_h, fx0 + (static_cast<double>(px) + sx) * bin_w,
                        h, w, 0.25, t + 4 * s);
            ++s;
          }
        }
      }
    }
  }

  Tensor out({n, pooled, pooled, c});
  const double* src = map.values.ptr();
  double* dst = out.ptr();
  for (std::size_t bin = 0; bin < n * bins; ++bin) {
    double* o = dst + bin * c;
    const Tap* t = taps->data() + bin * kTapsPerBin;
    for (std::size_t k = 0; k < kTapsPerBin; ++k) {
      if (t[k].weight == 0.0) continue;
      const double* in = src + t[k].cell * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] += t[k].weight * in[ch];
    }
  }

  if (tape.wants_grad({&map.values})) {
    detail::TensorImpl* mi = map.values.impl();
    detail::TensorImpl* oi = out.impl();
    tape.record(out, {map.values}, [=] {
      if (!mi->requires_grad) return;
      double* g = mi->ensure_grad().data();
      const double* go = oi->grad.data();
      for (std::size_t bin = 0; bin < n * bins; ++bin) {
        const double* gb = go + bin * c;
        const Tap* t = taps->data() + bin * kTapsPerBin;
        for (std::size_t k = 0; k < kTapsPerBin; ++k) {
          if (t[k].weight == 0.0) continue;
          double* gi = g + t[k].cell * c;
          for (std::size_t ch = 0; ch < c; ++ch) gi[ch] += t[k].weight * gb[ch];
        }
      }
    });
  }
  return out;
}

Tensor roi_align(Tape& tape, const FeatureMap& map, const Box& region, std::size_t pooled) {
  Tensor batched = roi_align(tape, map, std::span<const Box>(&region, 1), pooled);
  return reshape(tape, batched, {pooled, pooled, map.channels()});
}

Tensor reduce_channels(Tape& tape, const Tensor& x, const Linear& params) {
  if (x.shape().back() != params.in_features()) {
    throw DimensionError("reduce_channels: input " + shape_to_string(x.shape()) + " does not match weight " +
                         shape_to_string(params.weight.shape()));
  }
  return relu(tape, params(tape, x));
}

RoiReduceParams RoiReduceParams::init(Rng& rng, const PscConfig& config) {
  RoiReduceParams p;
  for (auto k : kAllRegions) {
    p.regions[index_of(k)] = Linear::he(rng, config.feature_channels, config.channels_for(k));
  }
  return p;
}

void RoiReduceParams::collect(NamedTensors& out, const std::string& prefix) const {
  for (auto k : kAllRegions) regions[index_of(k)].collect(out, prefix + "." + std::string(part_name(k)));
}

std::size_t PartFeatures::total_channels() const {
  std::size_t total = 0;
  for (const auto& t : regions) total += t.shape().back();
  return total;
}

PartFeatures extract_part_features(Tape& tape, const FeatureMap& map, std::span<const Box> proposals,
                                   std::size_t pooled, const RoiReduceParams& params) {
  std::array<std::vector<Box>, kNumRegions> boxes;
  for (const Box& p : proposals) {
    const PartSet parts = partition(p);
    for (auto k : kAllRegions) boxes[index_of(k)].push_back(parts[k]);
  }
  PartFeatures out;
  for (auto k : kAllRegions) {
    Tensor pooled_k = roi_align(tape, map, boxes[index_of(k)], pooled);
    out.regions[index_of(k)] = reduce_channels(tape, pooled_k, params.regions[index_of(k)]);
  }
  return out;
}

PartFeatures extract_part_features(Tape& tape, const FeatureMap& map, const Box& proposal, std::size_t pooled,
                                   const RoiReduceParams& params) {
  const PartSet parts = partition(proposal);
  PartFeatures out;
  for (auto k : kAllRegions) {
    Tensor pooled_k = roi_align(tape, map, parts[k], pooled);
    out.regions[index_of(k)] = reduce_channels(tape, pooled_k, params.regions[index_of(k)]);
  }
  return out;
}

}  // namespace psc
