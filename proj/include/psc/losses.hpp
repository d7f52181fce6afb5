#pragma once

#include <span>

#include "psc/tensor.hpp"

namespace psc {

// Mean over all coordinates of 0.5 t^2 (|t| < 1) or |t| - 0.5, t = pred - target.
// target is treated as a constant.
Tensor smooth_l1(Tape& tape, const Tensor& pred, const Tensor& target);

// Mean over rows of -log softmax(logits)[label]. logits is N x C (or a single
// C-vector with one label); OutOfBoundsError on a label >= C.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace psc
