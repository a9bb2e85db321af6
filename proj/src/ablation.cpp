#include "rca/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <exception>

#include "rca/evaluation.hpp"
#include "rca/trainer.hpp"

namespace rca {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Keeps a free-form message inside one CSV field.
std::string csv_safe(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

}  // namespace

std::vector<AblationVariant> table1_grid(const TrainConfig& base) {
  std::vector<AblationVariant> g;
  auto add = [&](const char* name, bool rsc, bool rsa) {
    TrainConfig c = base;
    c.rsc_on = rsc;
    c.rsa_on = rsa;
    g.push_back({name, c});
  };
  add("baseline", false, false);
  add("rsc", true, false);
  add("rsa", false, true);
  add("full", true, true);
  return g;
}

std::vector<AblationVariant> gamma_grid(const TrainConfig& base) {
  std::vector<AblationVariant> g;
  for (double gamma : {0.0, 0.5, 0.8, 0.9, 0.99, 0.999}) {
    TrainConfig c = base;
    c.gamma = gamma;
    g.push_back({"gamma=" + fmt(gamma), c});
  }
  return g;
}

std::vector<AblationVariant> k_grid(const TrainConfig& base) {
  std::vector<AblationVariant> g;
  for (std::size_t k : {1, 10, 20, 50, 100}) {
    TrainConfig c = base;
    c.K = k;
    g.push_back({"K=" + std::to_string(k), c});
  }
  return g;
}

std::vector<AblationVariant> memory_grid(const TrainConfig& base) {
  std::vector<AblationVariant> g;
  for (std::size_t cap : {100, 500, 0}) {
    TrainConfig c = base;
    c.memory_capacity = cap;
    g.push_back({cap ? "memory=" + std::to_string(cap) : std::string("memory=all"), c});
  }
  return g;
}

std::vector<AblationVariant> mixup_grid(const TrainConfig& base) {
  TrainConfig without = base, with = base;
  without.mixup_on = false;
  with.mixup_on = true;
  return {{"no-mixup", without}, {"mixup", with}};
}

std::optional<std::vector<AblationVariant>> named_grid(const std::string& name, const TrainConfig& base) {
  if (name == "table1") return table1_grid(base);
  if (name == "gamma") return gamma_grid(base);
  if (name == "k") return k_grid(base);
  if (name == "memory") return memory_grid(base);
  if (name == "mixup") return mixup_grid(base);
  return std::nullopt;
}

const AblationSummary* AblationTable::find(const std::string& variant) const {
  for (const auto& s : summaries) {
    if (s.variant == variant) return &s;
  }
  return nullptr;
}

AblationTable run_ablation(std::span<const AblationVariant> grid, std::span<const SyntheticSample> train,
                           std::span<const SyntheticSample> eval, std::span<const std::uint64_t> seeds,
                           double theta_bg, const AblationProgress& progress) {
  if (grid.empty()) throw std::invalid_argument("ablation grid is empty");
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  if (train.empty() || eval.empty()) throw std::invalid_argument("ablation needs non-empty train and eval sets");

  const auto train_view = training_view(train);
  EvalSet eval_set{training_view(eval), ground_truth_view(eval), theta_bg};

  AblationTable table;
  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    AblationSummary summary;
    summary.config_index = ci;
    summary.variant = grid[ci].name;
    std::vector<double> scores;
    for (auto seed : seeds) {
      AblationRun run;
      run.config_index = ci;
      run.variant = grid[ci].name;
      run.seed = seed;
      TrainConfig config = grid[ci].config;
      config.seed = seed;
      run.fingerprint = config.fingerprint();
      try {
        Trainer trainer(config);
        trainer.fit(train_view);
        run.miou = evaluate(trainer.params(), trainer.active_prototypes(), eval_set.images, eval_set.masks,
                            theta_bg)
                       .miou;
        run.ok = true;
        scores.push_back(run.miou);
      } catch (const std::exception& e) {
        run.error = csv_safe(e.what());
      }
      if (progress) progress(run);
      table.runs.push_back(std::move(run));
    }
    summary.runs = scores.size();
    if (!scores.empty()) {
      double sum = 0.0;
      for (double s : scores) sum += s;
      summary.mean = sum / static_cast<double>(scores.size());
      if (scores.size() > 1) {
        double ss = 0.0;
        for (double s : scores) ss += (s - summary.mean) * (s - summary.mean);
        summary.stddev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
      }
    }
    table.summaries.push_back(std::move(summary));
  }
  return table;
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out << "kind,config_index,variant,seed,runs,miou,miou_std,fingerprint,error\n";
  for (const auto& r : table.runs) {
    out << "run," << r.config_index << ',' << r.variant << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
        << (r.ok ? fmt(r.miou) : std::string()) << ",," << r.fingerprint << ',' << r.error << '\n';
  }
  for (const auto& s : table.summaries) {
    out << "summary," << s.config_index << ',' << s.variant << ",," << s.runs << ','
        << (s.runs ? fmt(s.mean) : std::string()) << ',' << (s.runs ? fmt(s.stddev) : std::string()) << ",,\n";
  }
}

}  // namespace rca
