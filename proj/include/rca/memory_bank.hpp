#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rca/region.hpp"

namespace rca {

// Flat row-major collection of memory vectors together with their keys.
struct SlotRows {
  std::size_t dim = 0;
  std::vector<std::size_t> class_ids;
  std::vector<std::size_t> image_ids;
  std::vector<double> data;

  std::size_t count() const { return class_ids.size(); }
  bool empty() const { return class_ids.empty(); }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

struct SlotSplit {
  SlotRows positives;  // slots of the requested class
  SlotRows negatives;  // slots of every other class
};

// Per-class dictionaries of region vectors keyed by image id. Each slot is
// blended in place with m <- momentum * m + (1 - momentum) * f whenever the
// region's gate score exceeds the threshold.
class MemoryBank {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  struct UpdateStats {
    std::size_t offered = 0;
    std::size_t gated = 0;     // passed gate_score > threshold
    std::size_t inserted = 0;
    std::size_t blended = 0;
    std::size_t dropped = 0;   // gated but rejected (class at capacity or non-finite vector)
  };

  MemoryBank(std::size_t num_classes, std::size_t dim, double momentum, double gate_threshold,
             std::size_t capacity = kUnbounded);

  // Reads region values only; no gradient linkage is kept.
  UpdateStats update(std::span<const RegionEmbedding> regions);
  // Returns true if the bank changed.
  bool update_slot(std::size_t class_id, std::size_t image_id, double gate_score, std::span<const double> vec,
                   UpdateStats* stats = nullptr);
  // Unconditional insert/overwrite, used when restoring a saved bank.
  void restore_slot(std::size_t class_id, std::size_t image_id, std::vector<double> vec);

  std::size_t num_classes() const { return slots_.size(); }
  std::size_t dim() const { return dim_; }
  double momentum() const { return momentum_; }
  double gate_threshold() const { return gate_threshold_; }
  std::size_t capacity() const { return capacity_; }

  std::size_t slot_count(std::size_t class_id) const { return slots_.at(class_id).size(); }
  std::size_t total_slots() const;
  const std::map<std::size_t, std::vector<double>>& class_slots(std::size_t class_id) const {
    return slots_.at(class_id);
  }
  std::optional<std::span<const double>> slot(std::size_t class_id, std::size_t image_id) const;

  // Ordered by class id, then image id.
  SlotRows rows(std::size_t class_id) const;
  SlotSplit positives_negatives(std::size_t class_id) const;

 private:
  std::size_t dim_;
  double momentum_;
  double gate_threshold_;
  std::size_t capacity_;
  std::vector<std::map<std::size_t, std::vector<double>>> slots_;
};

}  // namespace rca
