#include "psc/psc_module.hpp"

#include "psc/errors.hpp"

namespace psc {

std::string_view to_string(SmoothingSign s) { return s == SmoothingSign::Minus ? "minus" : "plus"; }

SmoothingSign smoothing_sign_from_string(std::string_view s) {
  if (s == "minus") return SmoothingSign::Minus;
  if (s == "plus") return SmoothingSign::Plus;
  throw ConfigError("smoothing sign must be 'minus' or 'plus', got '" + std::string(s) + "'");
}

PscParams PscParams::init(Rng& rng, const PscConfig& config) {
  PscParams p;
  p.roi = RoiReduceParams::init(rng, config);
  p.intra = IntraParams::init(rng, config);
  p.inter = InterPartParams::init(rng, config.embed_dim);
  return p;
}

void PscParams::collect(NamedTensors& out, const std::string& prefix) const {
  roi.collect(out, prefix + ".roi");
  intra.collect(out, prefix + ".intra");
  inter.collect(out, prefix + ".inter");
}

Tensor psc_features(Tape& tape, const FeatureMap& map, std::span<const Box> proposals, const PscParams& params,
                    const PscConfig& config) {
  if (proposals.empty()) throw DimensionError("psc_features: no proposals");
  if (!config.use_intra && !config.use_inter) {
    std::vector<Box> full(proposals.begin(), proposals.end());
    for (const Box& b : full) (void)partition(b);  // same validity contract as the part path
    const auto k = index_of(PartKind::FullBody);
    Tensor pooled = roi_align(tape, map, full, config.pooled);
    Tensor reduced = reduce_channels(tape, pooled, params.roi.regions[k]);
    return intra_forward(tape, reduced, params.intra.regions[k], /*use_affinity=*/false);
  }
  PartFeatures parts = extract_part_features(tape, map, proposals, config.pooled, params.roi);
  Tensor nodes = intra_all_parts(tape, parts, params.intra, config.use_intra);
  return inter_forward(tape, nodes, adjacency_template(), params.inter, config.smoothing, config.use_inter);
}

}  // namespace psc
