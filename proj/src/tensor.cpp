#include "psc/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "psc/errors.hpp"

namespace psc {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {
void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : impl_(std::make_shared<detail::TensorImpl>()) {
  validate_shape(shape);
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(values.begin(), values.end());
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) impl_->ensure_grad();
  return impl_->grad;
}

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, 0.0, impl_->requires_grad);
  t.impl_->data = impl_->data;
  return t;
}

bool Tape::wants_grad(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t != nullptr && t->defined() && t->requires_grad(); });
}

void Tape::record(Tensor output, std::vector<Tensor> inputs, std::function<void()> backward) {
  output.impl()->requires_grad = true;
  output.impl()->is_leaf = false;
  entries_.push_back(Entry{std::move(output), std::move(inputs), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " +
                         (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  }
  for (auto& e : entries_) e.output.impl()->grad.clear();
  loss.impl()->ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.impl()->grad.empty()) continue;
    it->backward();
  }
}

}  // namespace psc
