#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rca/prototypes.hpp"
#include "rca/tensor.hpp"

namespace rca {

// S = softmax_rows(F Q^T) with F: (H*W) x D and Q: (L*K) x D. Raw dot
// products, no temperature; Q is a constant.
Tensor affinity(Tape& tape, const Tensor& features_flat, const Tensor& prototypes_flat);

// F' = S Q: each row is a convex combination of prototype rows.
Tensor gather_context(Tape& tape, const Tensor& affinity, const Tensor& prototypes_flat);

// [F, F'] along channels; both D x H x W, original features first.
Tensor enrich(Tape& tape, const Tensor& features, const Tensor& context);

struct AggregationResult {
  Tensor enriched;  // 2D x H x W
  Tensor affinity;  // (H*W) x (L*K); undefined when no prototypes were used
};

// Full aggregation path for one image. With no prototypes the context is all
// zeros, which keeps the enriched width at 2D.
AggregationResult aggregate_features(Tape& tape, const Tensor& features, const PrototypeSet* prototypes);

}  // namespace rca
