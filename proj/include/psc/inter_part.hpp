#pragma once

#include "psc/layers.hpp"
#include "psc/part_geometry.hpp"
#include "psc/psc_config.hpp"

namespace psc {

struct InterPartParams {
  Linear attention;     // 2d x 1 edge scorer over concat(f_i, f_j)
  Tensor graph_weight;  // W_p, d x d
  Linear merge;         // (6*d) x d

  // attention and merge He fan-in, W_p = 0.1 * He fan-in, biases zero.
  static InterPartParams init(Rng& rng, std::size_t embed_dim);
  std::size_t embed_dim() const { return graph_weight.dim(0); }
  void collect(NamedTensors& out, const std::string& prefix) const;
};

// a_ij = sigmoid(attention(concat(f_i, f_j))), a 1-element tensor.
// Directed: a_ij and a_ji differ in general.
Tensor edge_attention(Tape& tape, const Tensor& f_i, const Tensor& f_j, const InterPartParams& params);

// Row-wise L2 normalisation of the masked attention matrix: entry (i, j) is
// a_ij when the graph has edge (i, j), zero otherwise (diagonal included).
// Single proposal, 6 x d -> 6 x 6, evaluated edge by edge.
Tensor build_adjacency(Tape& tape, const Tensor& node_features, const PartGraph& graph,
                       const InterPartParams& params);

// Same matrix for N x 6 x d -> N x 6 x 6, factoring the edge scorer into
// per-node halves (w_i . f_i + w_j . f_j + b).
Tensor build_adjacency_batched(Tape& tape, const Tensor& node_features, const PartGraph& graph,
                               const InterPartParams& params);

// relu((I -/+ A) . F . W_p) for N x 6 x d features and N x 6 x 6 adjacency.
Tensor graph_propagate(Tape& tape, const Tensor& node_features, const Tensor& adjacency, const Tensor& graph_weight,
                       SmoothingSign sign);

// merge(flatten(relu((I - A_p) F_e W_p))). With use_graph off the
// propagation is skipped and merge sees F_e directly.
// 6 x d -> d; N x 6 x d -> N x d.
Tensor inter_forward(Tape& tape, const Tensor& node_features, const PartGraph& graph, const InterPartParams& params,
                     SmoothingSign sign = SmoothingSign::Minus, bool use_graph = true);

}  // namespace psc
