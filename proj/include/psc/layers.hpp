#pragma once

#include <string>

#include "psc/ops.hpp"
#include "psc/random.hpp"
#include "psc/tensor_io.hpp"

namespace psc {

// Affine map over the last axis; bias may be undefined.
struct Linear {
  Tensor weight;  // din x dout
  Tensor bias;    // dout

  static Linear he(Rng& rng, std::size_t din, std::size_t dout, double gain = 1.0, bool with_bias = true);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor operator()(Tape& tape, const Tensor& x) const { return fully_connected(tape, x, weight, bias); }

  void collect(NamedTensors& out, const std::string& prefix) const;
};

}  // namespace psc
