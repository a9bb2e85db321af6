#include "rca/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace rca {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
  }
  if (values.size() != shape_numel(shape)) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  if (requires_grad) t.impl_->grad.assign(t.impl_->values.size(), 0.0);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) throw std::out_of_range("axis out of range");
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->values.size(); }
bool Tensor::requires_grad() const { return impl_->requires_grad; }

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::values_mut() const { return impl_->values; }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::grad_mut() const { return impl_->grad; }

void Tensor::zero_grad() const {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape()));
  return impl_->values[0];
}

Tensor Tensor::detach() const { return from(impl_->shape, impl_->values, false); }

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss");
  }
  if (entries_.empty()) throw std::logic_error("backward on an empty tape");
  if (!loss.requires_grad()) throw std::invalid_argument("loss does not depend on any trainable tensor");

  for (auto& e : entries_) {
    for (auto& in : e.inputs) {
      if (in.requires_grad()) in.zero_grad();
    }
    e.output.zero_grad();
  }
  Tensor seed = loss;
  seed.grad_mut()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
}

}  // namespace rca
