#include "rca/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rca {

namespace {

void append_rows(SlotRows& out, std::size_t class_id, const std::map<std::size_t, std::vector<double>>& slots) {
  for (const auto& [image_id, vec] : slots) {
    out.class_ids.push_back(class_id);
    out.image_ids.push_back(image_id);
    out.data.insert(out.data.end(), vec.begin(), vec.end());
  }
}

}  // namespace

MemoryBank::MemoryBank(std::size_t num_classes, std::size_t dim, double momentum, double gate_threshold,
                       std::size_t capacity)
    : dim_(dim), momentum_(momentum), gate_threshold_(gate_threshold), capacity_(capacity), slots_(num_classes) {
  if (num_classes == 0 || dim == 0) throw std::invalid_argument("MemoryBank: empty class set or dimension");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("MemoryBank: momentum must be in [0,1]");
  if (capacity == 0) throw std::invalid_argument("MemoryBank: capacity must be positive");
}

bool MemoryBank::update_slot(std::size_t class_id, std::size_t image_id, double gate_score,
                             std::span<const double> vec, UpdateStats* stats) {
  if (class_id >= slots_.size()) throw std::out_of_range("MemoryBank: class id " + std::to_string(class_id));
  if (vec.size() != dim_) throw std::invalid_argument("MemoryBank: vector dimension mismatch");
  UpdateStats local;
  UpdateStats& s = stats ? *stats : local;
  ++s.offered;
  if (!(gate_score > gate_threshold_)) return false;
  ++s.gated;
  if (!std::all_of(vec.begin(), vec.end(), [](double v) { return std::isfinite(v); })) {
    ++s.dropped;
    return false;
  }

  auto& dict = slots_[class_id];
  auto it = dict.find(image_id);
  if (it == dict.end()) {
    if (dict.size() >= capacity_) {
      ++s.dropped;
      return false;
    }
    dict.emplace(image_id, std::vector<double>(vec.begin(), vec.end()));
    ++s.inserted;
    return true;
  }
  auto& m = it->second;
  for (std::size_t i = 0; i < dim_; ++i) m[i] = momentum_ * m[i] + (1.0 - momentum_) * vec[i];
  ++s.blended;
  return true;
}

MemoryBank::UpdateStats MemoryBank::update(std::span<const RegionEmbedding> regions) {
  UpdateStats stats;
  for (const auto& r : regions) update_slot(r.class_id, r.image_id, r.gate_score, r.vector.values(), &stats);
  return stats;
}

void MemoryBank::restore_slot(std::size_t class_id, std::size_t image_id, std::vector<double> vec) {
  if (class_id >= slots_.size()) throw std::out_of_range("MemoryBank: class id " + std::to_string(class_id));
  if (vec.size() != dim_) throw std::invalid_argument("MemoryBank: vector dimension mismatch");
  auto& dict = slots_[class_id];
  if (!dict.contains(image_id) && dict.size() >= capacity_) {
    throw std::length_error("MemoryBank: restoring beyond class capacity");
  }
  dict[image_id] = std::move(vec);
}

std::size_t MemoryBank::total_slots() const {
  std::size_t n = 0;
  for (const auto& d : slots_) n += d.size();
  return n;
}

std::optional<std::span<const double>> MemoryBank::slot(std::size_t class_id, std::size_t image_id) const {
  const auto& dict = slots_.at(class_id);
  auto it = dict.find(image_id);
  if (it == dict.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

SlotRows MemoryBank::rows(std::size_t class_id) const {
  SlotRows out;
  out.dim = dim_;
  append_rows(out, class_id, slots_.at(class_id));
  return out;
}

SlotSplit MemoryBank::positives_negatives(std::size_t class_id) const {
  SlotSplit split;
  split.positives.dim = split.negatives.dim = dim_;
  for (std::size_t c = 0; c < slots_.size(); ++c) {
    append_rows(c == class_id ? split.positives : split.negatives, c, slots_[c]);
  }
  return split;
}

}  // namespace rca
