#include "rca/aggregate.hpp"

#include <array>
#include <stdexcept>

#include "rca/ops.hpp"

namespace rca {

Tensor affinity(Tape& tape, const Tensor& features_flat, const Tensor& prototypes_flat) {
  if (features_flat.rank() != 2 || prototypes_flat.rank() != 2 || features_flat.dim(1) != prototypes_flat.dim(1)) {
    throw std::invalid_argument("affinity: feature/prototype dimension mismatch " +
                                shape_str(features_flat.shape()) + " vs " + shape_str(prototypes_flat.shape()));
  }
  Tensor q = prototypes_flat.requires_grad() ? prototypes_flat.detach() : prototypes_flat;
  return ops::softmax_rows(tape, ops::matmul(tape, features_flat, ops::transpose(tape, q)));
}

Tensor gather_context(Tape& tape, const Tensor& affinity, const Tensor& prototypes_flat) {
  if (affinity.rank() != 2 || prototypes_flat.rank() != 2 || affinity.dim(1) != prototypes_flat.dim(0)) {
    throw std::invalid_argument("gather_context: shape mismatch " + shape_str(affinity.shape()) + " vs " +
                                shape_str(prototypes_flat.shape()));
  }
  Tensor q = prototypes_flat.requires_grad() ? prototypes_flat.detach() : prototypes_flat;
  return ops::matmul(tape, affinity, q);
}

Tensor enrich(Tape& tape, const Tensor& features, const Tensor& context) {
  if (features.shape() != context.shape()) {
    throw std::invalid_argument("enrich: shape mismatch " + shape_str(features.shape()) + " vs " +
                                shape_str(context.shape()));
  }
  const std::array<Tensor, 2> parts{features, context};
  return ops::concat_channels(tape, parts);
}

AggregationResult aggregate_features(Tape& tape, const Tensor& features, const PrototypeSet* prototypes) {
  if (features.rank() != 3) throw std::invalid_argument("aggregate_features: features must be D x H x W");
  const std::size_t dim = features.dim(0), h = features.dim(1), w = features.dim(2);
  AggregationResult out;
  if (prototypes == nullptr) {
    out.enriched = enrich(tape, features, Tensor::zeros(features.shape()));
    return out;
  }
  if (prototypes->dim != dim) throw std::invalid_argument("aggregate_features: prototype dimension mismatch");
  Tensor q = prototypes->flattened();
  Tensor flat = ops::transpose(tape, ops::reshape(tape, features, {dim, h * w}));  // (H*W) x D
  out.affinity = affinity(tape, flat, q);
  Tensor context = gather_context(tape, out.affinity, q);  // (H*W) x D
  Tensor context_chw = ops::reshape(tape, ops::transpose(tape, context), {dim, h, w});
  out.enriched = enrich(tape, features, context_chw);
  return out;
}

}  // namespace rca
