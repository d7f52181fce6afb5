#pragma once

#include <array>

#include "psc/layers.hpp"
#include "psc/psc_config.hpp"
#include "psc/roi_features.hpp"

namespace psc {

// Parameters of the pixel-level graph convolution for one region.
struct IntraPartParams {
  Linear theta;         // C x C' affinity branch
  Linear phi;           // C x C' affinity branch
  Tensor graph_weight;  // W_s, C x C
  Linear projection;    // (P*P*C) x d

  // He fan-in everywhere, W_s additionally scaled by 0.1, biases zero.
  static IntraPartParams init(Rng& rng, std::size_t channels, std::size_t pooled, std::size_t embed_dim);
  std::size_t channels() const { return graph_weight.dim(0); }
  void collect(NamedTensors& out, const std::string& prefix) const;
};

// One untied parameter set per region, indexed by PartKind.
struct IntraParams {
  std::array<IntraPartParams, kNumRegions> regions;

  static IntraParams init(Rng& rng, const PscConfig& config);
  const IntraPartParams& operator[](PartKind k) const { return regions[index_of(k)]; }
  void collect(NamedTensors& out, const std::string& prefix) const;
};

// A_s = softmax_rows(relu(theta(F)) . relu(phi(F))^T).
// P x P x C input -> (P*P) x (P*P); N x P x P x C -> N x (P*P) x (P*P).
// Rows index the output pixel, columns the attended pixel.
Tensor spatial_adjacency(Tape& tape, const Tensor& features, const IntraPartParams& params);

// out = projection(flatten(relu(A_s . F . W_s) + F)). With use_affinity off
// the graph term is dropped and only the residual path is projected.
// P x P x C -> d; N x P x P x C -> N x d.
Tensor intra_forward(Tape& tape, const Tensor& features, const IntraPartParams& params, bool use_affinity = true);

// Stacks the six region embeddings in PartKind order: 6 x d for a single
// proposal, N x 6 x d batched.
Tensor intra_all_parts(Tape& tape, const PartFeatures& parts, const IntraParams& params, bool use_affinity = true);

}  // namespace psc
