#include "rca/pipeline.hpp"

#include <stdexcept>

#include "rca/aggregate.hpp"
#include "rca/contrast.hpp"
#include "rca/ops.hpp"

namespace rca {

ForwardPass forward_pipeline(Tape& tape, const ModelParams& params, const Tensor& image,
                             const PrototypeSet* prototypes) {
  ForwardPass fp;
  fp.features = forward_features(tape, image, params.backbone);
  fp.cam_p = forward_cam(tape, fp.features, params.head_p);
  fp.scores_p = classification_scores(tape, fp.cam_p);
  AggregationResult agg = aggregate_features(tape, fp.features, prototypes);
  fp.affinity = agg.affinity;
  fp.cam_o = forward_cam(tape, agg.enriched, params.head_o);
  fp.scores_o = classification_scores(tape, fp.cam_o);
  return fp;
}

ObjectiveTerms compute_objective(Tape& tape, const ModelParams& params, std::span<const Tensor> images,
                                 std::span<const LabeledImage> batch, const MemoryBank& bank,
                                 const PrototypeSet* prototypes, const TrainConfig& config, double alpha1,
                                 Rng& mixup_rng) {
  if (images.size() != batch.size() || batch.empty()) {
    throw std::invalid_argument("compute_objective: image/label batch mismatch");
  }
  const PrototypeSet* used = config.rsa_on ? prototypes : nullptr;

  ObjectiveTerms terms;
  Tensor ce_p_sum, ce_o_sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& sample = batch[i];
    ForwardPass fp = forward_pipeline(tape, params, images[i], used);
    Tensor ce_p = multilabel_loss(tape, fp.scores_p, sample.labels);
    Tensor ce_o = multilabel_loss(tape, fp.scores_o, sample.labels);
    ce_p_sum = i == 0 ? ce_p : ops::add(tape, ce_p_sum, ce_p);
    ce_o_sum = i == 0 ? ce_o : ops::add(tape, ce_o_sum, ce_o);

    auto regions = extract_regions(tape, fp.features, fp.cam_p, sample.labels, fp.scores_p, sample.image_id);
    for (auto& r : regions) terms.regions.push_back(std::move(r));
  }
  terms.ce_p = ce_p_sum.item();
  terms.ce_o = ce_o_sum.item();

  Tensor total = ops::add(tape, ops::scale(tape, ce_p_sum, config.alpha2), ce_o_sum);
  if (config.rsc_on && alpha1 > 0.0) {
    ContrastConfig cc{config.tau, config.beta, config.seed};
    ContrastResult contrast = batch_contrast_loss(tape, terms.regions, bank, cc, config.mixup_on, mixup_rng);
    terms.contrast_skipped = contrast.skipped;
    terms.rmnce = contrast.loss.item();
    if (!contrast.skipped) total = ops::add(tape, total, ops::scale(tape, contrast.loss, alpha1));
  }
  terms.total = total;
  return terms;
}

}  // namespace rca
