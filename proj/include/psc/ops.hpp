#pragma once

#include <span>
#include <vector>

#include "psc/tensor.hpp"

// Differentiable operations. Every op takes the tape it records onto; on a
// non-recording tape (or when no input requires a gradient) nothing is
// recorded and the op is a plain forward computation.
namespace psc {

// [M x K] . [K x N]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// [B x M x K] . [B x K x N], or [B x M x K] . [B x N x K]^T when transpose_b.
Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b = false);

// Affine map over the last axis, batched over the leading ones. `bias` may be
// an undefined Tensor for a bias-free projection.
Tensor fully_connected(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Per-pixel channel map of an H x W x Cin tensor.
Tensor conv1x1(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Square-kernel convolution of an H x W x Cin tensor with zero padding.
// weight is (k*k*Cin) x Cout with rows ordered (ky, kx, cin).
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel,
              std::size_t stride, std::size_t pad);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);

// Row-wise ops over the last axis; leading axes are flattened into rows.
Tensor softmax_rows(Tape& tape, const Tensor& x);
inline constexpr double kL2NormEpsilon = 1e-12;
Tensor l2_normalize_rows(Tape& tape, const Tensor& x);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
// New axis inserted at `axis`; all inputs must share one shape.
Tensor stack(Tape& tape, const std::vector<Tensor>& xs, std::size_t axis);
// Concatenation along the last axis; leading shapes must agree.
Tensor concat(Tape& tape, const std::vector<Tensor>& xs);
// Rows [begin, begin + count) of axis 0.
Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count);

// Rows of an R x C tensor picked by index (repeats allowed) -> K x C.
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> rows);

// out[n, i, j] = u[n, i] + v[n, j] + bias
Tensor outer_sum(Tape& tape, const Tensor& u, const Tensor& v, const Tensor& bias);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

}  // namespace psc
