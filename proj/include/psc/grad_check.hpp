#pragma once

#include <cstdint>
#include <functional>

#include "psc/tensor.hpp"

namespace psc {

// f builds a scalar on the given tape from `x` (and possibly other captured
// tensors). The same f is re-evaluated on non-recording tapes for the
// central differences, so it must be a pure function of the tensor values.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

// max over checked coordinates of
//   |analytic - numeric| / max(1, |analytic|, |numeric|)
// using central differences. x must require gradients; its gradient buffer
// is cleared before and after the check.
double grad_check(const ScalarFn& f, Tensor x, const GradCheckOptions& options = {});

inline double grad_check(const ScalarFn& f, Tensor x, double step) {
  return grad_check(f, std::move(x), GradCheckOptions{step, 0, 0});
}

}  // namespace psc
