#include "psc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "eigen_util.hpp"
#include "psc/errors.hpp"

namespace psc {

using detail::as_matrix;
using detail::TensorImpl;

namespace {

// Gradient buffer of an input, or nullptr when it does not take gradients.
double* grad_of(TensorImpl* t) { return t->requires_grad ? t->ensure_grad().data() : nullptr; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

std::size_t last_dim(const Tensor& x) { return x.shape().back(); }

template <typename Fwd, typename Bwd>
Tensor unary(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor out(x.shape());
  const double* xp = x.ptr();
  double* op = out.ptr();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) op[i] = fwd(xp[i]);
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [xi, oi, n, bwd] {
      double* gx = grad_of(xi);
      if (!gx) return;
      const double* g = oi->grad.data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += bwd(xi->data[i], oi->data[i]) * g[i];
    });
  }
  return out;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out({a.dim(0), b.dim(1)});
  as_matrix(out.ptr(), m, n).noalias() = as_matrix(a.ptr(), m, k) * as_matrix(b.ptr(), k, n);
  if (tape.wants_grad({&a, &b})) {
    TensorImpl* ai = a.impl();
    TensorImpl* bi = b.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {a, b}, [ai, bi, oi, m, k, n] {
      auto g = as_matrix(static_cast<const double*>(oi->grad.data()), m, n);
      if (double* ga = grad_of(ai)) {
        as_matrix(ga, m, k).noalias() += g * as_matrix(static_cast<const double*>(bi->data.data()), k, n).transpose();
      }
      if (double* gb = grad_of(bi)) {
        as_matrix(gb, k, n).noalias() += as_matrix(static_cast<const double*>(ai->data.data()), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor batched_matmul(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b) {
  const bool ok_rank = a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0);
  const std::size_t inner_b = transpose_b ? (ok_rank ? b.dim(2) : 0) : (ok_rank ? b.dim(1) : 0);
  if (!ok_rank || a.dim(2) != inner_b) {
    throw DimensionError("batched_matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  const auto m = static_cast<Eigen::Index>(a.dim(1));
  const auto k = static_cast<Eigen::Index>(a.dim(2));
  const auto n = static_cast<Eigen::Index>(transpose_b ? b.dim(1) : b.dim(2));
  const std::size_t sa = static_cast<std::size_t>(m * k);
  const std::size_t sb = static_cast<std::size_t>(k * n);
  const std::size_t so = static_cast<std::size_t>(m * n);
  Tensor out({batch, static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  for (std::size_t i = 0; i < batch; ++i) {
    auto am = as_matrix(a.ptr() + i * sa, m, k);
    auto om = as_matrix(out.ptr() + i * so, m, n);
    if (transpose_b) {
      om.noalias() = am * as_matrix(b.ptr() + i * sb, n, k).transpose();
    } else {
      om.noalias() = am * as_matrix(b.ptr() + i * sb, k, n);
    }
  }
  if (tape.wants_grad({&a, &b})) {
    TensorImpl* ai = a.impl();
    TensorImpl* bi = b.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {a, b}, [=] {
      double* ga = grad_of(ai);
      double* gb = grad_of(bi);
      const double* ap = ai->data.data();
      const double* bp = bi->data.data();
      for (std::size_t i = 0; i < batch; ++i) {
        auto g = as_matrix(static_cast<const double*>(oi->grad.data()) + i * so, m, n);
        auto am = as_matrix(ap + i * sa, m, k);
        if (transpose_b) {
          auto bm = as_matrix(bp + i * sb, n, k);
          if (ga) as_matrix(ga + i * sa, m, k).noalias() += g * bm;
          if (gb) as_matrix(gb + i * sb, n, k).noalias() += g.transpose() * am;
        } else {
          auto bm = as_matrix(bp + i * sb, k, n);
          if (ga) as_matrix(ga + i * sa, m, k).noalias() += g * bm.transpose();
          if (gb) as_matrix(gb + i * sb, k, n).noalias() += am.transpose() * g;
        }
      }
    });
  }
  return out;
}

Tensor fully_connected(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || last_dim(x) != weight.dim(0)) {
    throw DimensionError("fully_connected: input " + shape_to_string(x.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != weight.dim(1))) {
    throw DimensionError("fully_connected: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const auto din = static_cast<Eigen::Index>(weight.dim(0));
  const auto dout = static_cast<Eigen::Index>(weight.dim(1));
  const auto rows = static_cast<Eigen::Index>(x.numel() / weight.dim(0));
  Shape out_shape = x.shape();
  out_shape.back() = weight.dim(1);
  Tensor out(out_shape);
  auto om = as_matrix(out.ptr(), rows, dout);
  om.noalias() = as_matrix(x.ptr(), rows, din) * as_matrix(weight.ptr(), din, dout);
  if (has_bias) om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.ptr(), dout);

  if (tape.wants_grad({&x, &weight, has_bias ? &bias : nullptr})) {
    TensorImpl* xi = x.impl();
    TensorImpl* wi = weight.impl();
    TensorImpl* bi = has_bias ? bias.impl() : nullptr;
    TensorImpl* oi = out.impl();
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    tape.record(out, std::move(inputs), [=] {
      auto g = as_matrix(static_cast<const double*>(oi->grad.data()), rows, dout);
      if (double* gx = grad_of(xi)) {
        as_matrix(gx, rows, din).noalias() +=
            g * as_matrix(static_cast<const double*>(wi->data.data()), din, dout).transpose();
      }
      if (double* gw = grad_of(wi)) {
        as_matrix(gw, din, dout).noalias() +=
            as_matrix(static_cast<const double*>(xi->data.data()), rows, din).transpose() * g;
      }
      if (bi) {
        if (double* gb = grad_of(bi)) Eigen::Map<Eigen::RowVectorXd>(gb, dout) += g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor conv1x1(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3) throw DimensionError("conv1x1: expected H x W x C input, got " + shape_to_string(x.shape()));
  return fully_connected(tape, x, weight, bias);
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel,
              std::size_t stride, std::size_t pad) {
  if (x.rank() != 3) throw DimensionError("conv2d: expected H x W x C input, got " + shape_to_string(x.shape()));
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const std::size_t patch = kernel * kernel * cin;
  if (weight.rank() != 2 || weight.dim(0) != patch) {
    throw DimensionError("conv2d: weight " + shape_to_string(weight.shape()) + " does not match input " +
                         shape_to_string(x.shape()) + " with kernel " + std::to_string(kernel));
  }
  if (stride == 0 || h + 2 * pad < kernel || w + 2 * pad < kernel) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_to_string(x.shape()));
  }
  const std::size_t ho = (h + 2 * pad - kernel) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kernel) / stride + 1;
  const std::size_t cout = weight.dim(1);

  Tensor col_tensor({ho * wo, patch});
  double* cols = col_tensor.ptr();
  const double* xp = x.ptr();
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double* row = cols + (oy * wo + ox) * patch;
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          std::copy_n(xp + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin, cin,
                      row + (ky * kernel + kx) * cin);
        }
      }
    }
  }
  Tensor out({ho, wo, cout});
  {
    auto om = as_matrix(out.ptr(), static_cast<Eigen::Index>(ho * wo), static_cast<Eigen::Index>(cout));
    om.noalias() = as_matrix(static_cast<const double*>(cols), static_cast<Eigen::Index>(ho * wo),
                             static_cast<Eigen::Index>(patch)) *
                   as_matrix(weight.ptr(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(cout));
    if (bias.defined()) {
      if (bias.numel() != cout) throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " mismatch");
      om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.ptr(), static_cast<Eigen::Index>(cout));
    }
  }

  if (tape.wants_grad({&x, &weight, bias.defined() ? &bias : nullptr})) {
    TensorImpl* xi = x.impl();
    TensorImpl* wi = weight.impl();
    TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
    TensorImpl* oi = out.impl();
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    auto colp = col_tensor.shared_impl();
    tape.record(out, std::move(inputs), [=] {
      const auto rows = static_cast<Eigen::Index>(ho * wo);
      const auto pe = static_cast<Eigen::Index>(patch);
      const auto ce = static_cast<Eigen::Index>(cout);
      auto g = as_matrix(static_cast<const double*>(oi->grad.data()), rows, ce);
      if (double* gw = grad_of(wi)) {
        as_matrix(gw, pe, ce).noalias() +=
            as_matrix(static_cast<const double*>(colp->data.data()), rows, pe).transpose() * g;
      }
      if (bi) {
        if (double* gb = grad_of(bi)) Eigen::Map<Eigen::RowVectorXd>(gb, ce) += g.colwise().sum();
      }
      if (double* gx = grad_of(xi)) {
        detail::RowMatrix dcol = g * as_matrix(static_cast<const double*>(wi->data.data()), pe, ce).transpose();
        for (std::size_t oy = 0; oy < ho; ++oy) {
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const double* row = dcol.data() + (oy * wo + ox) * patch;
            for (std::size_t ky = 0; ky < kernel; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < kernel; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                double* dst = gx + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
                const double* src = row + (ky * kernel + kx) * cin;
                for (std::size_t c = 0; c < cin; ++c) dst[c] += src[c];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary(
      tape, x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

namespace {
template <typename Fwd>
Tensor binary(Tape& tape, const char* name, const Tensor& a, const Tensor& b, Fwd fwd, double sign_b, bool product) {
  require_same_shape(name, a, b);
  Tensor out(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a[i], b[i]);
  if (tape.wants_grad({&a, &b})) {
    TensorImpl* ai = a.impl();
    TensorImpl* bi = b.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {a, b}, [=] {
      const double* g = oi->grad.data();
      if (double* ga = grad_of(ai)) {
        for (std::size_t i = 0; i < n; ++i) ga[i] += product ? g[i] * bi->data[i] : g[i];
      }
      if (double* gb = grad_of(bi)) {
        for (std::size_t i = 0; i < n; ++i) gb[i] += product ? g[i] * ai->data[i] : sign_b * g[i];
      }
    });
  }
  return out;
}
}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, "add", a, b, [](double x, double y) { return x + y; }, 1.0, false);
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, "sub", a, b, [](double x, double y) { return x - y; }, -1.0, false);
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, "mul", a, b, [](double x, double y) { return x * y; }, 1.0, true);
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  const std::size_t cols = last_dim(x);
  const std::size_t rows = x.numel() / cols;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.ptr() + r * cols;
    double* o = out.ptr() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - peak);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [=] {
      double* gx = grad_of(xi);
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = oi->data.data() + r * cols;
        const double* g = oi->grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (g[c] - dot);
      }
    });
  }
  return out;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& x) {
  const std::size_t cols = last_dim(x);
  const std::size_t rows = x.numel() / cols;
  auto norms = std::make_shared<std::vector<double>>(rows, 0.0);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.ptr() + r * cols;
    double sq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sq += in[c] * in[c];
    const double norm = std::sqrt(sq);
    (*norms)[r] = norm;
    double* o = out.ptr() + r * cols;
    if (norm > kL2NormEpsilon) {
      for (std::size_t c = 0; c < cols; ++c) o[c] = in[c] / norm;
    } else {
      std::copy_n(in, cols, o);
    }
  }
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [=] {
      double* gx = grad_of(xi);
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = oi->data.data() + r * cols;
        const double* g = oi->grad.data() + r * cols;
        const double norm = (*norms)[r];
        if (norm > kL2NormEpsilon) {
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
          for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += (g[c] - y[c] * dot) / norm;
        } else {
          for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c];
        }
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [=] {
      double* gx = grad_of(xi);
      if (!gx) return;
      const std::size_t n = oi->grad.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += oi->grad[i];
    });
  }
  return out;
}

Tensor stack(Tape& tape, const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("stack: no inputs");
  const Shape& base = xs.front().shape();
  for (const auto& t : xs) require_same_shape("stack", xs.front(), t);
  if (axis > base.size()) throw DimensionError("stack: axis out of range for " + shape_to_string(base));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
  const std::size_t inner = xs.front().numel() / outer;
  const std::size_t k = xs.size();
  Shape out_shape = base;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), k);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(xs[j].ptr() + o * inner, inner, out.ptr() + (o * k + j) * inner);
    }
  }
  bool any = false;
  for (const auto& t : xs) any = any || tape.wants_grad({&t});
  if (any) {
    std::vector<TensorImpl*> ins;
    for (const auto& t : xs) ins.push_back(t.impl());
    TensorImpl* oi = out.impl();
    tape.record(out, xs, [=] {
      for (std::size_t j = 0; j < k; ++j) {
        double* g = grad_of(ins[j]);
        if (!g) continue;
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = oi->grad.data() + (o * k + j) * inner;
          for (std::size_t i = 0; i < inner; ++i) g[o * inner + i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  Shape lead = xs.front().shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : xs) {
    Shape l = t.shape();
    l.pop_back();
    if (l != lead) {
      throw DimensionError("concat: leading shapes differ " + shape_to_string(xs.front().shape()) + " vs " +
                           shape_to_string(t.shape()));
    }
    widths.push_back(last_dim(t));
    total += last_dim(t);
  }
  const std::size_t rows = xs.front().numel() / widths.front();
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(xs[j].ptr() + r * widths[j], widths[j], out.ptr() + r * total + offset);
    }
    offset += widths[j];
  }
  bool any = false;
  for (const auto& t : xs) any = any || tape.wants_grad({&t});
  if (any) {
    std::vector<TensorImpl*> ins;
    for (const auto& t : xs) ins.push_back(t.impl());
    TensorImpl* oi = out.impl();
    tape.record(out, xs, [=] {
      std::size_t off = 0;
      for (std::size_t j = 0; j < ins.size(); ++j) {
        if (double* g = grad_of(ins[j])) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < widths[j]; ++c) g[r * widths[j] + c] += oi->grad[r * total + off + c];
          }
        }
        off += widths[j];
      }
    });
  }
  return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_to_string(x.shape()));
  }
  const std::size_t inner = x.numel() / x.dim(0);
  Shape out_shape = x.shape();
  out_shape[0] = count;
  Tensor out(out_shape);
  std::copy_n(x.ptr() + begin * inner, count * inner, out.ptr());
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [=] {
      double* g = grad_of(xi);
      if (!g) return;
      for (std::size_t i = 0; i < count * inner; ++i) g[begin * inner + i] += oi->grad[i];
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> rows) {
  if (x.rank() != 2) throw DimensionError("gather_rows: expected R x C input, got " + shape_to_string(x.shape()));
  if (rows.empty()) throw DimensionError("gather_rows: no rows requested");
  const std::size_t cols = x.dim(1);
  for (auto r : rows) {
    if (r >= x.dim(0)) {
      throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range for " + shape_to_string(x.shape()));
    }
  }
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.ptr() + rows[i] * cols, cols, out.ptr() + i * cols);
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    std::vector<std::size_t> picked(rows.begin(), rows.end());
    tape.record(out, {x}, [=] {
      double* g = grad_of(xi);
      if (!g) return;
      for (std::size_t i = 0; i < picked.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) g[picked[i] * cols + c] += oi->grad[i * cols + c];
      }
    });
  }
  return out;
}

Tensor outer_sum(Tape& tape, const Tensor& u, const Tensor& v, const Tensor& bias) {
  require_same_shape("outer_sum", u, v);
  if (u.rank() != 2 || bias.numel() != 1) {
    throw DimensionError("outer_sum: expected N x K operands and scalar bias, got " + shape_to_string(u.shape()));
  }
  const std::size_t batch = u.dim(0), k = u.dim(1);
  Tensor out({batch, k, k});
  const double b = bias[0];
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) out[(n * k + i) * k + j] = u[n * k + i] + v[n * k + j] + b;
    }
  }
  if (tape.wants_grad({&u, &v, &bias})) {
    TensorImpl* ui = u.impl();
    TensorImpl* vi = v.impl();
    TensorImpl* bi = bias.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {u, v, bias}, [=] {
      double* gu = grad_of(ui);
      double* gv = grad_of(vi);
      double* gb = grad_of(bi);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const double g = oi->grad[(n * k + i) * k + j];
            if (gu) gu[n * k + i] += g;
            if (gv) gv[n * k + j] += g;
            if (gb) gb[0] += g;
          }
        }
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (tape.wants_grad({&x})) {
    TensorImpl* xi = x.impl();
    TensorImpl* oi = out.impl();
    tape.record(out, {x}, [=] {
      double* g = grad_of(xi);
      if (!g) return;
      const double s = oi->grad[0];
      for (std::size_t i = 0; i < xi->data.size(); ++i) g[i] += s;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace psc
