#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rca/memory_bank.hpp"
#include "rca/region.hpp"
#include "rca/rng.hpp"
#include "rca/tensor.hpp"

namespace rca {

struct ContrastConfig {
  double temperature = 0.1;
  double beta = 8.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Thrown by nce_loss when the anchor's class has no memory slots; callers are
// expected to skip that region rather than treat the loss as zero.
class NoPositivesError : public std::runtime_error {
 public:
  explicit NoPositivesError(std::size_t class_id);
  std::size_t class_id() const { return class_id_; }

 private:
  std::size_t class_id_;
};

// Region-aware InfoNCE of a 1 x D embedding against the memory bank: the mean
// over same-class slots m+ of
//   -log( e^{cos(f,m+)/tau} / (e^{cos(f,m+)/tau} + sum_{m-} e^{cos(f,m-)/tau}) ).
// Memory slots are constants. Exactly zero when the bank has no other class.
Tensor nce_loss(Tape& tape, const Tensor& embedding, std::size_t class_id, const MemoryBank& bank,
                double temperature);

// Indices refer to the region list passed to sample_mixup_pairs.
struct MixupPair {
  std::size_t anchor = 0;
  std::size_t partner = 0;
  double omega = 1.0;
};

struct MixupPlan {
  std::vector<MixupPair> pairs;
  std::vector<std::size_t> unpaired;
};

// One partner per anchor, uniform over regions from another image with another
// class; omega ~ Beta(beta, beta).
MixupPlan sample_mixup_pairs(std::span<const RegionEmbedding> regions, double beta, Rng& rng);

// omega * anchor + (1 - omega) * partner.
Tensor mix_regions(Tape& tape, const Tensor& anchor, const Tensor& partner, double omega);

// omega * NCE(mixed, anchor class) + (1 - omega) * NCE(mixed, partner class).
// If the partner class has no slots only the first term is kept.
Tensor rm_nce_loss(Tape& tape, const RegionEmbedding& anchor, const RegionEmbedding& partner, double omega,
                   const MemoryBank& bank, double temperature);

struct ContrastResult {
  Tensor loss;            // scalar
  bool skipped = false;   // no region produced a loss term
  std::size_t terms = 0;  // regions that contributed
  std::size_t mixed = 0;  // of which used region mixup
};

// Per image, the mean loss over its usable regions; summed over images.
// Regions whose class has no slots, or whose embedding is the zero vector,
// are skipped.
ContrastResult batch_contrast_loss(Tape& tape, std::span<const RegionEmbedding> regions, const MemoryBank& bank,
                                   const ContrastConfig& config, bool mixup, Rng& rng);

}  // namespace rca
