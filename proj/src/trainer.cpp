#include "rca/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "rca/evaluation.hpp"
#include "rca/pipeline.hpp"

namespace rca {

namespace {

enum RngStream : std::uint64_t { kShuffle = 1, kFlip = 2, kMixup = 3, kPrototypes = 4 };

std::size_t bank_capacity(const TrainConfig& c) {
  return c.memory_capacity == 0 ? MemoryBank::kUnbounded : c.memory_capacity;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_metrics_row(const EpochMetrics& m) {
  std::ostringstream os;
  os << m.epoch << ',' << m.step << ',' << format_double(m.loss_total) << ',' << format_double(m.loss_rmnce) << ','
     << format_double(m.loss_ce_p) << ',' << format_double(m.loss_ce_o) << ',' << format_double(m.gate_rate) << ','
     << m.mem_slots << ',';
  if (m.miou_eval) os << format_double(*m.miou_eval);
  return os.str();
}

SgdOptimizer::SgdOptimizer(std::vector<Group> groups, double momentum, double weight_decay)
    : groups_(std::move(groups)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& g : groups_) {
    auto& vs = velocity_.emplace_back();
    for (const auto& p : g.params) vs.emplace_back(p.numel(), 0.0);
  }
}

void SgdOptimizer::step() {
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    auto& group = groups_[gi];
    for (std::size_t pi = 0; pi < group.params.size(); ++pi) {
      auto& p = group.params[pi];
      auto w = p.values_mut();
      auto g = p.grad();
      auto& v = velocity_[gi][pi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i] + weight_decay_ * w[i];
        w[i] -= group.lr * v[i];
      }
    }
  }
}

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), config)),
      params_(init_model(kNumClasses, config_.feature_channels, config_.seed)),
      bank_(kNumClasses, config_.feature_channels, config_.gamma, config_.nu, bank_capacity(config_)),
      optimizer_({{params_.backbone_tensors(), config_.lr_backbone}, {params_.head_tensors(), config_.lr_heads}},
                 config_.sgd_momentum, config_.weight_decay),
      shuffle_rng_(make_rng(config_.seed, kShuffle)),
      flip_rng_(make_rng(config_.seed, kFlip)),
      mixup_rng_(make_rng(config_.seed, kMixup)) {}

const PrototypeSet* Trainer::active_prototypes() const {
  return config_.rsa_on && prototypes_ ? &*prototypes_ : nullptr;
}

void Trainer::begin_epoch(std::size_t epoch) {
  if (epoch == 0) throw std::invalid_argument("epochs are 1-based");
  epoch_ = epoch;
  const double factor = config_.lr_factor(epoch);
  optimizer_.set_lr(0, config_.lr_backbone * factor);
  optimizer_.set_lr(1, config_.lr_heads * factor);
  if (config_.rsa_on && epoch >= 2) {
    prototypes_ = compute_prototypes(bank_, config_.K, derive_seed(config_.seed, kPrototypes + epoch),
                                     static_cast<std::int32_t>(epoch));
  }
}

StepMetrics Trainer::train_step(std::span<const LabeledImage> batch) {
  if (epoch_ == 0) begin_epoch(1);
  std::vector<Tensor> images;
  images.reserve(batch.size());
  for (const auto& s : batch) {
    const bool flip = config_.hflip && uniform01(flip_rng_) < 0.5;
    images.push_back(flip ? s.to_tensor_flipped() : s.to_tensor());
  }

  Tape tape;
  ObjectiveTerms terms = compute_objective(tape, params_, images, batch, bank_, active_prototypes(), config_,
                                           effective_alpha1(), mixup_rng_);
  const double total = terms.total.item();
  if (!std::isfinite(total)) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << epoch_ << " step " << steps_ << " (seed " << config_.seed << ", images";
    for (const auto& s : batch) os << ' ' << s.image_id;
    os << ')';
    throw TrainingAborted(os.str());
  }
  tape.backward(terms.total);
  optimizer_.step();
  ++steps_;

  const auto stats = bank_.update(terms.regions);

  StepMetrics m;
  m.loss_total = total;
  m.loss_rmnce = terms.rmnce;
  m.loss_ce_p = terms.ce_p;
  m.loss_ce_o = terms.ce_o;
  m.regions = stats.offered;
  m.gated = stats.gated;
  m.contrast_skipped = terms.contrast_skipped;
  return m;
}

EpochMetrics Trainer::run_epoch(std::span<const LabeledImage> dataset, const EvalSet* eval) {
  if (dataset.empty()) throw std::invalid_argument("run_epoch: empty dataset");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng_, i)]);

  EpochMetrics em;
  em.epoch = epoch_;
  std::size_t nsteps = 0, regions = 0, gated = 0;
  std::vector<LabeledImage> batch;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i) {
      batch.push_back(dataset[order[i]]);
    }
    const StepMetrics sm = train_step(batch);
    em.loss_total += sm.loss_total;
    em.loss_rmnce += sm.loss_rmnce;
    em.loss_ce_p += sm.loss_ce_p;
    em.loss_ce_o += sm.loss_ce_o;
    regions += sm.regions;
    gated += sm.gated;
    ++nsteps;
  }
  const double n = static_cast<double>(nsteps);
  em.loss_total /= n;
  em.loss_rmnce /= n;
  em.loss_ce_p /= n;
  em.loss_ce_o /= n;
  em.gate_rate = regions ? static_cast<double>(gated) / static_cast<double>(regions) : 0.0;
  em.step = steps_;
  em.mem_slots = bank_.total_slots();
  if (eval) em.miou_eval = evaluate(params_, active_prototypes(), eval->images, eval->masks, eval->theta_bg).miou;
  return em;
}

std::vector<EpochMetrics> Trainer::fit(std::span<const LabeledImage> dataset, const EvalSet* eval,
                                       std::ostream* csv) {
  if (dataset.empty()) throw std::invalid_argument("fit: empty dataset");
  if (csv) *csv << kMetricsHeader << '\n';
  std::vector<EpochMetrics> history;
  for (std::size_t e = 1; e <= config_.epochs; ++e) {
    begin_epoch(e);
    history.push_back(run_epoch(dataset, eval));
    if (csv) *csv << format_metrics_row(history.back()) << '\n' << std::flush;
  }
  return history;
}

}  // namespace rca
