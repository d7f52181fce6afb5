#pragma once

#include <algorithm>
#include <cstddef>
#include <string_view>

#include "psc/part_geometry.hpp"

namespace psc {

// Sign of the adjacency term in (I -/+ A_p) for the inter-part propagation.
enum class SmoothingSign { Minus, Plus };

std::string_view to_string(SmoothingSign s);
SmoothingSign smoothing_sign_from_string(std::string_view s);

// Widths and switches of the part spatial co-occurrence stack.
struct PscConfig {
  std::size_t pooled = 7;             // RoI resolution P
  std::size_t feature_channels = 32;  // backbone output C_f
  std::size_t part_channels = 64;     // reduced channels of each body part
  std::size_t full_channels = 256;    // reduced channels of the full body
  std::size_t embed_dim = 1024;       // node width d
  bool use_intra = true;
  bool use_inter = true;
  SmoothingSign smoothing = SmoothingSign::Minus;

  std::size_t channels_for(PartKind k) const { return k == PartKind::FullBody ? full_channels : part_channels; }
  std::size_t pooled_cells() const { return pooled * pooled; }
  std::size_t total_reduced_channels() const { return kNumBodyParts * part_channels + full_channels; }

  // Width C' of the two affinity branches for a region with c channels.
  static std::size_t affinity_channels(std::size_t c) { return std::max<std::size_t>(c / 2, 8); }
};

}  // namespace psc
