#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rca/tensor.hpp"

// Differentiable operations. Each op returns a fresh tensor; when any input
// requires a gradient the op is recorded on the tape with its backward rule.
// There is no broadcasting: elementwise ops need identical shapes.
namespace rca::ops {

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

// a: m x k, b: k x n.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// x: C_in x H x W, kernel: C_out x C_in x 3 x 3, zero padding 1.
// Output spatial extent is ceil(extent / stride).
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, std::size_t stride);

// Concatenates along axis 0; trailing extents must agree.
Tensor concat_channels(Tape& tape, std::span<const Tensor> parts);

// Row-wise ops on a 2-D tensor.
Tensor softmax_rows(Tape& tape, const Tensor& x);
// Zero rows pass through unchanged; their indices are reported via zero_rows.
Tensor l2_normalize_rows(Tape& tape, const Tensor& x, std::vector<std::size_t>* zero_rows = nullptr);

// x: L x H x W -> L.
Tensor global_average_pool(Tape& tape, const Tensor& x);

// Mean over entries of the binary cross-entropy between sigmoid(logits) and
// targets in {0,1}. Evaluated in the log-sum-exp stable form.
Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const double> targets);

}  // namespace rca::ops
