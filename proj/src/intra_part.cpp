#include "psc/intra_part.hpp"

#include "psc/errors.hpp"

namespace psc {

namespace {

// View a P x P x C or N x P x P x C feature as N x (P*P) x C.
Tensor as_pixel_rows(Tape& tape, const Tensor& features) {
  if (features.rank() == 3) {
    return reshape(tape, features, {1, features.dim(0) * features.dim(1), features.dim(2)});
  }
  if (features.rank() == 4) {
    return reshape(tape, features, {features.dim(0), features.dim(1) * features.dim(2), features.dim(3)});
  }
  throw DimensionError("intra-part: expected P x P x C or N x P x P x C features, got " +
                       shape_to_string(features.shape()));
}

Tensor adjacency_from_rows(Tape& tape, const Tensor& rows, const IntraPartParams& params) {
  Tensor t = relu(tape, params.theta(tape, rows));
  Tensor p = relu(tape, params.phi(tape, rows));
  return softmax_rows(tape, batched_matmul(tape, t, p, /*transpose_b=*/true));
}

}  // namespace

IntraPartParams IntraPartParams::init(Rng& rng, std::size_t channels, std::size_t pooled, std::size_t embed_dim) {
  IntraPartParams p;
  const std::size_t reduced = PscConfig::affinity_channels(channels);
  p.theta = Linear::he(rng, channels, reduced);
  p.phi = Linear::he(rng, channels, reduced);
  p.graph_weight = he_normal(rng, {channels, channels}, channels, 0.1);
  p.projection = Linear::he(rng, pooled * pooled * channels, embed_dim);
  return p;
}

void IntraPartParams::collect(NamedTensors& out, const std::string& prefix) const {
  theta.collect(out, prefix + ".theta");
  phi.collect(out, prefix + ".phi");
  out.emplace_back(prefix + ".graph_weight", graph_weight);
  projection.collect(out, prefix + ".projection");
}

IntraParams IntraParams::init(Rng& rng, const PscConfig& config) {
  IntraParams p;
  for (auto k : kAllRegions) {
    p.regions[index_of(k)] = IntraPartParams::init(rng, config.channels_for(k), config.pooled, config.embed_dim);
  }
  return p;
}

void IntraParams::collect(NamedTensors& out, const std::string& prefix) const {
  for (auto k : kAllRegions) regions[index_of(k)].collect(out, prefix + "." + std::string(part_name(k)));
}

Tensor spatial_adjacency(Tape& tape, const Tensor& features, const IntraPartParams& params) {
  Tensor rows = as_pixel_rows(tape, features);
  Tensor a = adjacency_from_rows(tape, rows, params);
  if (features.rank() == 3) return reshape(tape, a, {a.dim(1), a.dim(2)});
  return a;
}

Tensor intra_forward(Tape& tape, const Tensor& features, const IntraPartParams& params, bool use_affinity) {
  Tensor rows = as_pixel_rows(tape, features);
  const std::size_t n = rows.dim(0), cells = rows.dim(1), c = rows.dim(2);
  if (c != params.channels() || cells * c != params.projection.in_features()) {
    throw DimensionError("intra_forward: features " + shape_to_string(features.shape()) +
                         " do not match projection " + shape_to_string(params.projection.weight.shape()));
  }
  Tensor merged = rows;
  if (use_affinity) {
    Tensor a = adjacency_from_rows(tape, rows, params);
    Tensor mixed = batched_matmul(tape, a, rows);
    Tensor enhanced = relu(tape, fully_connected(tape, mixed, params.graph_weight, Tensor{}));
    merged = add(tape, enhanced, rows);
  }
  Tensor out = params.projection(tape, reshape(tape, merged, {n, cells * c}));
  if (features.rank() == 3) return reshape(tape, out, {out.dim(1)});
  return out;
}

Tensor intra_all_parts(Tape& tape, const PartFeatures& parts, const IntraParams& params, bool use_affinity) {
  std::vector<Tensor> embeddings;
  embeddings.reserve(kNumRegions);
  for (auto k : kAllRegions) embeddings.push_back(intra_forward(tape, parts[k], params[k], use_affinity));
  // Single proposal: six d-vectors -> 6 x d. Batched: six N x d -> N x 6 x d.
  const std::size_t axis = embeddings.front().rank() == 1 ? 0 : 1;
  return stack(tape, embeddings, axis);
}

}  // namespace psc
