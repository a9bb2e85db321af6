#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rca {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Copies are shallow: two Tensor objects
// may refer to the same storage, which is how the tape tracks operands.
// Spatial maps are stored channel-first (C x H x W).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  bool requires_grad() const;

  std::span<const double> values() const;
  // Direct mutation is reserved for leaves (optimizer updates, finite differences).
  std::span<double> values_mut() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut() const;
  void zero_grad() const;

  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }

  // Value copy without gradient tracking.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Ordered record of executed differentiable operations. Operations are
// appended in execution order, so the record is already topologically sorted.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  // Resets every gradient touched by the tape, seeds d(loss)/d(loss) = 1 and
  // runs each recorded backward function once in reverse order.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

}  // namespace rca
