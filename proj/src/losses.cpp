#include "psc/losses.hpp"

#include <algorithm>
#include <cmath>

#include "psc/errors.hpp"

namespace psc {

Tensor smooth_l1(Tape& tape, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("smooth_l1: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                         shape_to_string(target.shape()));
  }
  const std::size_t n = pred.numel();
  const double inv = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::abs(pred[i] - target[i]);
    total += t < 1.0 ? 0.5 * t * t : t - 0.5;
  }
  Tensor out = Tensor::scalar(total * inv);
  if (tape.wants_grad({&pred})) {
    auto* pi = pred.impl();
    auto* oi = out.impl();
    Tensor tgt = target;
    tape.record(out, {pred}, [pi, oi, tgt, n, inv] {
      auto& g = pi->ensure_grad();
      const double s = oi->grad[0] * inv;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = pi->data[i] - tgt[i];
        g[i] += s * std::clamp(t, -1.0, 1.0);
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw DimensionError("cross_entropy: logits must be C or N x C, got " + shape_to_string(logits.shape()));
  }
  const std::size_t rows = logits.rank() == 1 ? 1 : logits.dim(0);
  const std::size_t classes = logits.shape().back();
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                         " rows");
  }
  std::vector<double> prob(logits.numel());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= classes) {
      throw OutOfBoundsError("cross_entropy: label " + std::to_string(labels[r]) + " with " +
                             std::to_string(classes) + " classes");
    }
    const double* z = logits.ptr() + r * classes;
    const double m = *std::max_element(z, z + classes);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < classes; ++c) prob[r * classes + c] = std::exp(z[c] - lse);
    total += lse - z[labels[r]];
  }
  const double inv = 1.0 / static_cast<double>(rows);
  Tensor out = Tensor::scalar(total * inv);
  if (tape.wants_grad({&logits})) {
    auto* li = logits.impl();
    auto* oi = out.impl();
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    tape.record(out, {logits}, [li, oi, prob = std::move(prob), lab = std::move(lab), classes, inv] {
      auto& g = li->ensure_grad();
      const double s = oi->grad[0] * inv;
      for (std::size_t r = 0; r < lab.size(); ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
          g[r * classes + c] += s * (prob[r * classes + c] - (c == lab[r] ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

}  // namespace psc
