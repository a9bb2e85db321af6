#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rca/config.hpp"
#include "rca/memory_bank.hpp"
#include "rca/net.hpp"
#include "rca/prototypes.hpp"
#include "rca/region.hpp"
#include "rca/rng.hpp"
#include "rca/synthdata.hpp"

namespace rca {

// One image through both branches:
//   F = backbone(I), P = head_p(F), F_hat = [F, F'], O = head_o(F_hat).
struct ForwardPass {
  Tensor features;  // D x 16 x 16
  Tensor cam_p;     // L x 16 x 16
  Tensor scores_p;  // L
  Tensor affinity;  // (16*16) x (L*K), undefined without prototypes
  Tensor cam_o;     // L x 16 x 16
  Tensor scores_o;  // L
};

ForwardPass forward_pipeline(Tape& tape, const ModelParams& params, const Tensor& image,
                             const PrototypeSet* prototypes);

struct ObjectiveTerms {
  Tensor total;
  double rmnce = 0.0;  // unweighted contrast term, summed over images
  double ce_p = 0.0;   // summed over images
  double ce_o = 0.0;
  bool contrast_skipped = true;
  std::vector<RegionEmbedding> regions;
};

// alpha1 * L_rmnce + alpha2 * sum CE(GAP(P), y) + sum CE(GAP(O), y) over the batch.
// `images` are the (possibly flipped) tensors for `batch`. The contrast term is
// built only when rsc_on and alpha1 > 0.
ObjectiveTerms compute_objective(Tape& tape, const ModelParams& params, std::span<const Tensor> images,
                                 std::span<const LabeledImage> batch, const MemoryBank& bank,
                                 const PrototypeSet* prototypes, const TrainConfig& config, double alpha1,
                                 Rng& mixup_rng);

}  // namespace rca
