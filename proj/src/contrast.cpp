#include "rca/contrast.hpp"

#include <cmath>
#include <map>
#include <string>

#include "rca/ops.hpp"

namespace rca {

namespace {

// Unit-normalized copy of the slot rows; zero rows stay zero.
Tensor normalized_constant(const SlotRows& rows) {
  std::vector<double> data(rows.data);
  for (std::size_t i = 0; i < rows.count(); ++i) {
    double* r = data.data() + i * rows.dim;
    double n = 0.0;
    for (std::size_t d = 0; d < rows.dim; ++d) n += r[d] * r[d];
    n = std::sqrt(n);
    if (n == 0.0) continue;
    for (std::size_t d = 0; d < rows.dim; ++d) r[d] /= n;
  }
  return Tensor::from({rows.count(), rows.dim}, std::move(data));
}

bool is_zero(const Tensor& t) {
  for (double v : t.values()) {
    if (v != 0.0) return false;
  }
  return true;
}

bool mixes_to_zero(const Tensor& a, const Tensor& b, double omega) {
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (omega * a[i] + (1.0 - omega) * b[i] != 0.0) return false;
  }
  return true;
}

}  // namespace

void ContrastConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrast temperature must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("mixup beta must be positive");
}

NoPositivesError::NoPositivesError(std::size_t class_id)
    : std::runtime_error("no memory slots for class " + std::to_string(class_id)), class_id_(class_id) {}

Tensor nce_loss(Tape& tape, const Tensor& embedding, std::size_t class_id, const MemoryBank& bank,
                double temperature) {
  if (embedding.rank() != 2 || embedding.dim(0) != 1 || embedding.dim(1) != bank.dim()) {
    throw std::invalid_argument("nce_loss: embedding must be 1 x " + std::to_string(bank.dim()) + ", got " +
                                shape_str(embedding.shape()));
  }
  const SlotSplit split = bank.positives_negatives(class_id);
  if (split.positives.empty()) throw NoPositivesError(class_id);
  if (split.negatives.empty()) return Tensor::scalar(0.0);

  const std::size_t np = split.positives.count();
  const std::size_t nn = split.negatives.count();
  const double inv_t = 1.0 / temperature;

  Tensor unit = ops::transpose(tape, ops::l2_normalize_rows(tape, embedding));  // D x 1
  // Logits are shifted by -1/tau (the largest possible cosine logit) so every
  // exponent is <= 1; the shift cancels inside each log-ratio.
  Tensor shift_p = Tensor::full({np, 1}, inv_t);
  Tensor shift_n = Tensor::full({nn, 1}, inv_t);
  Tensor pos = ops::sub(tape, ops::scale(tape, ops::matmul(tape, normalized_constant(split.positives), unit), inv_t),
                        shift_p);
  Tensor neg = ops::sub(tape, ops::scale(tape, ops::matmul(tape, normalized_constant(split.negatives), unit), inv_t),
                        shift_n);

  Tensor neg_total = ops::matmul(tape, Tensor::full({1, nn}, 1.0), ops::exp(tape, neg));     // 1 x 1
  Tensor neg_tiled = ops::matmul(tape, Tensor::full({np, 1}, 1.0), neg_total);               // np x 1
  Tensor denom = ops::add(tape, ops::exp(tape, pos), neg_tiled);
  return ops::mean(tape, ops::sub(tape, ops::log(tape, denom), pos));
}

MixupPlan sample_mixup_pairs(std::span<const RegionEmbedding> regions, double beta, Rng& rng) {
  MixupPlan plan;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    eligible.clear();
    for (std::size_t j = 0; j < regions.size(); ++j) {
      if (regions[j].image_id != regions[i].image_id && regions[j].class_id != regions[i].class_id) {
        eligible.push_back(j);
      }
    }
    if (eligible.empty()) {
      plan.unpaired.push_back(i);
      continue;
    }
    const std::size_t partner = eligible[uniform_index(rng, eligible.size())];
    plan.pairs.push_back({i, partner, beta_sample(rng, beta, beta)});
  }
  return plan;
}

Tensor mix_regions(Tape& tape, const Tensor& anchor, const Tensor& partner, double omega) {
  if (anchor.shape() != partner.shape()) {
    throw std::invalid_argument("mix_regions: shape mismatch " + shape_str(anchor.shape()) + " vs " +
                                shape_str(partner.shape()));
  }
  return ops::add(tape, ops::scale(tape, anchor, omega), ops::scale(tape, partner, 1.0 - omega));
}

Tensor rm_nce_loss(Tape& tape, const RegionEmbedding& anchor, const RegionEmbedding& partner, double omega,
                   const MemoryBank& bank, double temperature) {
  Tensor mixed = mix_regions(tape, anchor.vector, partner.vector, omega);
  Tensor first = ops::scale(tape, nce_loss(tape, mixed, anchor.class_id, bank, temperature), omega);
  if (bank.slot_count(partner.class_id) == 0) return first;
  Tensor second = ops::scale(tape, nce_loss(tape, mixed, partner.class_id, bank, temperature), 1.0 - omega);
  return ops::add(tape, first, second);
}

ContrastResult batch_contrast_loss(Tape& tape, std::span<const RegionEmbedding> regions, const MemoryBank& bank,
                                   const ContrastConfig& config, bool mixup, Rng& rng) {
  config.validate();
  ContrastResult result;
  result.loss = Tensor::scalar(0.0);
  if (bank.total_slots() == 0 || regions.empty()) {
    result.skipped = true;
    return result;
  }

  std::vector<const MixupPair*> pair_of(regions.size(), nullptr);
  MixupPlan plan;
  if (mixup) {
    plan = sample_mixup_pairs(regions, config.beta, rng);
    for (const auto& p : plan.pairs) pair_of[p.anchor] = &p;
  }

  // Image order follows first appearance in the region list.
  std::vector<std::size_t> image_order;
  std::map<std::size_t, std::vector<Tensor>> per_image;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    if (!per_image.contains(r.image_id)) image_order.push_back(r.image_id);
    auto& terms = per_image[r.image_id];
    if (bank.slot_count(r.class_id) == 0 || is_zero(r.vector)) continue;

    if (const MixupPair* p = pair_of[i]) {
      const auto& partner = regions[p->partner];
      if (mixes_to_zero(r.vector, partner.vector, p->omega)) continue;
      terms.push_back(rm_nce_loss(tape, r, partner, p->omega, bank, config.temperature));
      ++result.mixed;
    } else {
      terms.push_back(nce_loss(tape, r.vector, r.class_id, bank, config.temperature));
    }
    ++result.terms;
  }

  if (result.terms == 0) {
    result.skipped = true;
    return result;
  }
  Tensor total = Tensor::scalar(0.0);
  for (auto id : image_order) {
    const auto& terms = per_image[id];
    if (terms.empty()) continue;
    Tensor image_sum = terms.front();
    for (std::size_t t = 1; t < terms.size(); ++t) image_sum = ops::add(tape, image_sum, terms[t]);
    total = ops::add(tape, total, ops::scale(tape, image_sum, 1.0 / static_cast<double>(terms.size())));
  }
  result.loss = total;
  return result;
}

}  // namespace rca
