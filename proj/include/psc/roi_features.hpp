#pragma once

#include <array>
#include <span>

#include "psc/layers.hpp"
#include "psc/part_geometry.hpp"
#include "psc/psc_config.hpp"

namespace psc {

// Backbone output (H_f x W_f x C_f) and its stride in input pixels per cell.
struct FeatureMap {
  Tensor values;
  double stride = 1.0;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }
};

// Each of the P x P bins averages 2 x 2 bilinear samples at the bin's
// quarter points. Feature cell (i, j) is centred at ((j + 0.5), (i + 0.5))
// in feature coordinates. A region partially outside the map is clipped to
// it; a region with no overlap throws OutOfBoundsError.
Tensor roi_align(Tape& tape, const FeatureMap& map, const Box& region, std::size_t pooled);

// Batched form: N regions -> N x P x P x C_f.
Tensor roi_align(Tape& tape, const FeatureMap& map, std::span<const Box> regions, std::size_t pooled);

// 1x1 convolution to `target` channels followed by relu; works on any
// tensor whose last axis is C_f.
Tensor reduce_channels(Tape& tape, const Tensor& x, const Linear& params);

// Per-region 1x1 reductions (C_f -> 64 for parts, C_f -> 256 full body).
struct RoiReduceParams {
  std::array<Linear, kNumRegions> regions;

  static RoiReduceParams init(Rng& rng, const PscConfig& config);
  void collect(NamedTensors& out, const std::string& prefix) const;
};

// Six pooled, reduced features indexed by PartKind. Single-proposal form is
// P x P x C_k; batched form is N x P x P x C_k.
struct PartFeatures {
  std::array<Tensor, kNumRegions> regions;
  const Tensor& operator[](PartKind k) const { return regions[index_of(k)]; }
  std::size_t total_channels() const;
};

PartFeatures extract_part_features(Tape& tape, const FeatureMap& map, const Box& proposal, std::size_t pooled,
                                   const RoiReduceParams& params);

PartFeatures extract_part_features(Tape& tape, const FeatureMap& map, std::span<const Box> proposals,
                                   std::size_t pooled, const RoiReduceParams& params);

}  // namespace psc
