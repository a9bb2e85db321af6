#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rca/config.hpp"
#include "rca/memory_bank.hpp"
#include "rca/net.hpp"
#include "rca/prototypes.hpp"
#include "rca/rng.hpp"
#include "rca/synthdata.hpp"

namespace rca {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepMetrics {
  double loss_total = 0.0;
  double loss_rmnce = 0.0;
  double loss_ce_p = 0.0;
  double loss_ce_o = 0.0;
  std::size_t regions = 0;
  std::size_t gated = 0;
  bool contrast_skipped = true;
  double gate_rate() const { return regions ? static_cast<double>(gated) / static_cast<double>(regions) : 0.0; }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;  // cumulative steps at the end of the epoch
  double loss_total = 0.0;  // per-step means
  double loss_rmnce = 0.0;
  double loss_ce_p = 0.0;
  double loss_ce_o = 0.0;
  double gate_rate = 0.0;
  std::size_t mem_slots = 0;
  std::optional<double> miou_eval;
};

inline constexpr const char* kMetricsHeader =
    "epoch,step,loss_total,loss_rmnce,loss_ce_p,loss_ce_o,gate_rate,mem_slots,miou_eval";
std::string format_metrics_row(const EpochMetrics& m);

struct EvalSet {
  std::vector<LabeledImage> images;
  std::vector<GroundTruthMask> masks;
  double theta_bg = 0.3;
};

// SGD with heavy-ball momentum and L2 weight decay:
//   v <- mu * v + (g + wd * w);  w <- w - lr * v
class SgdOptimizer {
 public:
  struct Group {
    std::vector<Tensor> params;
    double lr;
  };

  SgdOptimizer(std::vector<Group> groups, double momentum, double weight_decay);
  void step();
  void set_lr(std::size_t group, double lr) { groups_.at(group).lr = lr; }
  double lr(std::size_t group) const { return groups_.at(group).lr; }

 private:
  std::vector<Group> groups_;
  std::vector<std::vector<std::vector<double>>> velocity_;
  double momentum_;
  double weight_decay_;
};

// Owns the model, the region memory and the per-epoch prototypes.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  // 1-based. Sets learning rates and, from epoch 2 on with RSA enabled,
  // recomputes the prototypes from the current memory.
  void begin_epoch(std::size_t epoch);
  StepMetrics train_step(std::span<const LabeledImage> batch);
  EpochMetrics run_epoch(std::span<const LabeledImage> dataset, const EvalSet* eval = nullptr);

  // Full schedule. Writes the CSV header and one row per epoch when `csv` is set.
  std::vector<EpochMetrics> fit(std::span<const LabeledImage> dataset, const EvalSet* eval = nullptr,
                                std::ostream* csv = nullptr);

  const TrainConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  const MemoryBank& bank() const { return bank_; }
  MemoryBank& bank() { return bank_; }
  const std::optional<PrototypeSet>& prototypes() const { return prototypes_; }
  // Prototypes the O branch sees: none when RSA is off.
  const PrototypeSet* active_prototypes() const;
  std::size_t epoch() const { return epoch_; }
  std::size_t steps() const { return steps_; }
  double lr_backbone() const { return optimizer_.lr(0); }
  double lr_heads() const { return optimizer_.lr(1); }
  double effective_alpha1() const { return epoch_ <= 1 ? 0.0 : config_.alpha1; }

 private:
  TrainConfig config_;
  ModelParams params_;
  MemoryBank bank_;
  std::optional<PrototypeSet> prototypes_;
  SgdOptimizer optimizer_;
  Rng shuffle_rng_;
  Rng flip_rng_;
  Rng mixup_rng_;
  std::size_t epoch_ = 0;
  std::size_t steps_ = 0;
};

}  // namespace rca
