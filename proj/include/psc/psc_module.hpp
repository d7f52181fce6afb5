#pragma once

#include <span>

#include "psc/inter_part.hpp"
#include "psc/intra_part.hpp"
#include "psc/roi_features.hpp"

namespace psc {

// Every learnable tensor of the part spatial co-occurrence stack.
struct PscParams {
  RoiReduceParams roi;
  IntraParams intra;
  InterPartParams inter;

  static PscParams init(Rng& rng, const PscConfig& config);
  void collect(NamedTensors& out, const std::string& prefix) const;
};

// Enriched d-dimensional feature per proposal, N x d.
//
//   use_intra  use_inter
//   off        off        projection of the full-body RoI feature only
//   on         off        merge(intra embeddings of all six regions)
//   off        on         inter propagation over residual-only embeddings
//   on         on         full stack
Tensor psc_features(Tape& tape, const FeatureMap& map, std::span<const Box> proposals, const PscParams& params,
                    const PscConfig& config);

}  // namespace psc
