#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rca/tensor.hpp"

namespace rca {

// Masked-average-pooled embedding of one class's pseudo region in one image.
struct RegionEmbedding {
  Tensor vector;  // 1 x D, differentiable w.r.t. the features it came from
  std::size_t class_id = 0;
  std::size_t image_id = 0;
  double gate_score = 0.0;   // sigmoid of the class score
  bool empty_mask = false;   // strict threshold selected nothing; argmax pixel used
};

// Binary pseudo-region mask for one activation map: pixels strictly above the
// map mean. A constant map selects nothing, in which case the single argmax
// pixel (lowest row-major index) is used and `fallback` is set.
struct RegionMask {
  std::vector<std::uint8_t> mask;
  std::size_t count = 0;
  bool fallback = false;
};
RegionMask threshold_mask(std::span<const double> activation);

// features: D x H x W, cam: L x H x W, scores: L. One region per class with
// labels[l] == 1. The mask is constant with respect to differentiation.
std::vector<RegionEmbedding> extract_regions(Tape& tape, const Tensor& features, const Tensor& cam,
                                             std::span<const std::uint8_t> labels, const Tensor& scores,
                                             std::size_t image_id);

}  // namespace rca
