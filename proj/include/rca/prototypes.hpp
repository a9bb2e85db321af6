#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rca/memory_bank.hpp"
#include "rca/rng.hpp"
#include "rca/tensor.hpp"

namespace rca {

struct KMeansResult {
  std::vector<double> centroids;        // k x dim
  std::vector<std::size_t> assignment;  // per point
  std::vector<double> objective;        // sum of squared distances after each assignment step
  std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Stops after `max_iter` updates or
// when no centroid moves by `tol` or more. Equidistant points go to the lowest
// centroid index; an empty cluster takes over the point farthest from its
// centroid. Requires n >= k >= 1. Throws std::logic_error if the objective
// ever increases.
KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, Rng& rng,
                    std::size_t max_iter = 50, double tol = 1e-6);

enum class PrototypeStatus : std::uint8_t {
  Clustered = 0,
  Replicated = 1,  // fewer slots than K: slots repeated cyclically
  Empty = 2,       // no slots: zero vectors
};

// Per-class centroids of the memory bank, L x K x D.
struct PrototypeSet {
  std::size_t num_classes = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<PrototypeStatus> status;
  std::int32_t epoch = 0;

  std::span<const double> prototype(std::size_t class_id, std::size_t j) const {
    return {values.data() + (class_id * k + j) * dim, dim};
  }
  // (L*K) x D constant tensor.
  Tensor flattened() const;
};

PrototypeSet compute_prototypes(const MemoryBank& bank, std::size_t k, std::uint64_t seed, std::int32_t epoch = 0);

}  // namespace rca
