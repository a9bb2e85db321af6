#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rca/config.hpp"
#include "rca/synthdata.hpp"

namespace rca {

struct AblationVariant {
  std::string name;
  TrainConfig config;  // seed is overwritten per run
};

// Grids over the study axes. Every variant starts from `base`.
std::vector<AblationVariant> table1_grid(const TrainConfig& base);  // baseline, +RSC, +RSA, full
std::vector<AblationVariant> gamma_grid(const TrainConfig& base);   // 0, 0.5, 0.8, 0.9, 0.99, 0.999
std::vector<AblationVariant> k_grid(const TrainConfig& base);       // 1, 10, 20, 50, 100
std::vector<AblationVariant> memory_grid(const TrainConfig& base);  // 100, 500, all
std::vector<AblationVariant> mixup_grid(const TrainConfig& base);   // without, with
// Looks a grid up by name: table1, gamma, k, memory, mixup.
std::optional<std::vector<AblationVariant>> named_grid(const std::string& name, const TrainConfig& base);

struct AblationRun {
  std::size_t config_index = 0;
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  double miou = 0.0;
  std::string fingerprint;
  std::string error;
};

struct AblationSummary {
  std::size_t config_index = 0;
  std::string variant;
  std::size_t runs = 0;  // successful runs entering the statistics
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

struct AblationTable {
  std::vector<AblationRun> runs;  // ordered by (config index, seed position)
  std::vector<AblationSummary> summaries;
  const AblationSummary* find(const std::string& variant) const;
};

using AblationProgress = std::function<void(const AblationRun&)>;

// Trains every (variant, seed) pair on `train`, scores final-CAM pseudo masks
// on `eval`. A failing run is recorded and the remaining runs still execute.
AblationTable run_ablation(std::span<const AblationVariant> grid, std::span<const SyntheticSample> train,
                           std::span<const SyntheticSample> eval, std::span<const std::uint64_t> seeds,
                           double theta_bg = 0.3, const AblationProgress& progress = {});

// Columns: kind,config_index,variant,seed,runs,miou,miou_std,fingerprint,error
// kind is "run" or "summary"; summary rows leave seed, fingerprint and error empty.
void write_ablation_csv(std::ostream& out, const AblationTable& table);

}  // namespace rca
