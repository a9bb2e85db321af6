#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rca/tensor.hpp"

namespace rca {

struct GradCheckEntry {
  std::size_t tensor_index;
  std::size_t coordinate;
  double analytic;
  double numeric;
  double rel_error;  // |analytic - numeric| / max(1, |numeric|)
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using LossBuilder = std::function<Tensor(Tape&)>;

// Compares tape gradients with central finite differences at `coords_per_tensor`
// random coordinates of each tensor in `params` (all coordinates if the tensor
// is smaller). `build` must rebuild the loss from the current parameter values.
GradCheckReport check_gradients(const LossBuilder& build, std::vector<Tensor> params,
                                std::size_t coords_per_tensor, std::uint64_t seed, double step = 1e-5);

}  // namespace rca
