#include "psc/layers.hpp"

namespace psc {

Linear Linear::he(Rng& rng, std::size_t din, std::size_t dout, double gain, bool with_bias) {
  Linear l;
  l.weight = he_normal(rng, {din, dout}, din, gain);
  if (with_bias) l.bias = zero_param({dout});
  return l;
}

void Linear::collect(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

}  // namespace psc
