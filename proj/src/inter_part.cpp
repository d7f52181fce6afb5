#include "psc/inter_part.hpp"

#include "psc/errors.hpp"

namespace psc {

namespace {

Tensor edge_mask(const PartGraph& graph, std::size_t batch) {
  Tensor mask({batch, kNumRegions, kNumRegions});
  for (std::size_t n = 0; n < batch; ++n) {
    for (auto a : kAllRegions) {
      for (auto b : kAllRegions) {
        if (graph.edge(a, b)) mask[(n * kNumRegions + index_of(a)) * kNumRegions + index_of(b)] = 1.0;
      }
    }
  }
  return mask;
}

Tensor as_batched_nodes(Tape& tape, const Tensor& node_features, std::size_t embed_dim) {
  if (node_features.rank() == 2 && node_features.dim(0) == kNumRegions && node_features.dim(1) == embed_dim) {
    return reshape(tape, node_features, {1, kNumRegions, embed_dim});
  }
  if (node_features.rank() == 3 && node_features.dim(1) == kNumRegions && node_features.dim(2) == embed_dim) {
    return node_features;
  }
  throw DimensionError("inter-part: expected 6 x " + std::to_string(embed_dim) + " node features, got " +
                       shape_to_string(node_features.shape()));
}

}  // namespace

InterPartParams InterPartParams::init(Rng& rng, std::size_t embed_dim) {
  InterPartParams p;
  p.attention = Linear::he(rng, 2 * embed_dim, 1);
  p.graph_weight = he_normal(rng, {embed_dim, embed_dim}, embed_dim, 0.1);
  p.merge = Linear::he(rng, kNumRegions * embed_dim, embed_dim);
  return p;
}

void InterPartParams::collect(NamedTensors& out, const std::string& prefix) const {
  attention.collect(out, prefix + ".attention");
  out.emplace_back(prefix + ".graph_weight", graph_weight);
  merge.collect(out, prefix + ".merge");
}

Tensor edge_attention(Tape& tape, const Tensor& f_i, const Tensor& f_j, const InterPartParams& params) {
  const std::size_t d = params.embed_dim();
  if (f_i.rank() != 1 || f_j.rank() != 1 || f_i.dim(0) != d || f_j.dim(0) != d) {
    throw DimensionError("edge_attention: node features " + shape_to_string(f_i.shape()) + " and " +
                         shape_to_string(f_j.shape()) + " must both have length " + std::to_string(d));
  }
  return sigmoid(tape, params.attention(tape, concat(tape, {f_i, f_j})));
}

Tensor build_adjacency(Tape& tape, const Tensor& node_features, const PartGraph& graph,
                       const InterPartParams& params) {
  const std::size_t d = params.embed_dim();
  if (node_features.rank() != 2 || node_features.dim(0) != kNumRegions || node_features.dim(1) != d) {
    throw DimensionError("build_adjacency: expected 6 x " + std::to_string(d) + " node features, got " +
                         shape_to_string(node_features.shape()));
  }
  std::vector<Tensor> nodes;
  for (std::size_t i = 0; i < kNumRegions; ++i) nodes.push_back(reshape(tape, slice(tape, node_features, i, 1), {d}));
  std::vector<Tensor> entries;
  entries.reserve(kNumRegions * kNumRegions);
  for (auto a : kAllRegions) {
    for (auto b : kAllRegions) {
      if (graph.edge(a, b)) {
        entries.push_back(edge_attention(tape, nodes[index_of(a)], nodes[index_of(b)], params));
      } else {
        entries.push_back(Tensor::scalar(0.0));
      }
    }
  }
  Tensor raw = reshape(tape, concat(tape, entries), {kNumRegions, kNumRegions});
  return l2_normalize_rows(tape, raw);
}

Tensor build_adjacency_batched(Tape& tape, const Tensor& node_features, const PartGraph& graph,
                               const InterPartParams& params) {
  const std::size_t d = params.embed_dim();
  Tensor nodes = as_batched_nodes(tape, node_features, d);
  const std::size_t n = nodes.dim(0);
  Tensor w_src = slice(tape, params.attention.weight, 0, d);
  Tensor w_dst = slice(tape, params.attention.weight, d, d);
  Tensor u = reshape(tape, fully_connected(tape, nodes, w_src, Tensor{}), {n, kNumRegions});
  Tensor v = reshape(tape, fully_connected(tape, nodes, w_dst, Tensor{}), {n, kNumRegions});
  Tensor scores = sigmoid(tape, outer_sum(tape, u, v, params.attention.bias));
  Tensor masked = mul(tape, scores, edge_mask(graph, n));
  return l2_normalize_rows(tape, masked);
}

Tensor graph_propagate(Tape& tape, const Tensor& node_features, const Tensor& adjacency, const Tensor& graph_weight,
                       SmoothingSign sign) {
  Tensor neighbours = batched_matmul(tape, adjacency, node_features);
  Tensor smoothed = sign == SmoothingSign::Minus ? sub(tape, node_features, neighbours)
                                                 : add(tape, node_features, neighbours);
  return relu(tape, fully_connected(tape, smoothed, graph_weight, Tensor{}));
}

Tensor inter_forward(Tape& tape, const Tensor& node_features, const PartGraph& graph, const InterPartParams& params,
                     SmoothingSign sign, bool use_graph) {
  const std::size_t d = params.embed_dim();
  Tensor nodes = as_batched_nodes(tape, node_features, d);
  const std::size_t n = nodes.dim(0);
  Tensor propagated = nodes;
  if (use_graph) {
    Tensor adjacency = build_adjacency_batched(tape, nodes, graph, params);
    propagated = graph_propagate(tape, nodes, adjacency, params.graph_weight, sign);
  }
  Tensor out = params.merge(tape, reshape(tape, propagated, {n, kNumRegions * d}));
  if (node_features.rank() == 2) return reshape(tape, out, {d});
  return out;
}

}  // namespace psc
