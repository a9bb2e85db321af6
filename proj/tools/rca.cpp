// Command-line front end: dataset generation, training, evaluation,
// ablations, gradient checks and visual dumps.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rca/ablation.hpp"
#include "rca/binary_io.hpp"
#include "rca/checkpoint.hpp"
#include "rca/config.hpp"
#include "rca/evaluation.hpp"
#include "rca/gradsuite.hpp"
#include "rca/synthdata.hpp"
#include "rca/trainer.hpp"
#include "rca/visuals.hpp"

namespace fs = std::filesystem;
using namespace rca;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string dataset;
  std::string checkpoint;
  std::size_t train_count = 500;
  std::size_t eval_count = 100;
  std::uint64_t data_seed = 0;
  bool debug_export = false;
  std::string grid = "table1";
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t coords = 10;
  std::size_t samples = 4;
  double theta_bg = kDefaultBackgroundThreshold;
};

TrainConfig resolve_config(const Options& o) {
  TrainConfig c = o.config.empty() ? TrainConfig{} : TrainConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

struct Splits {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> eval;
};

// --dataset names a directory holding train.rcad and eval.rcad; without it the
// default-sized sets are generated from --data-seed.
Splits resolve_data(const Options& o) {
  Splits s;
  if (o.dataset.empty()) {
    s.train = generate_dataset(o.train_count, o.data_seed, Split::Train);
    s.eval = generate_dataset(o.eval_count, o.data_seed, Split::Eval);
    return s;
  }
  const fs::path dir = o.dataset;
  if (!fs::is_directory(dir)) throw ValidationError("dataset directory not found: " + dir.string());
  auto load = [&](const char* name, Split expected) {
    Dataset d = load_dataset(dir / name);
    if (d.split != expected) throw ValidationError(std::string(name) + " holds the wrong split");
    return std::move(d.samples);
  };
  s.train = load("train.rcad", Split::Train);
  s.eval = load("eval.rcad", Split::Eval);
  return s;
}

Checkpoint resolve_checkpoint(const Options& o) {
  const fs::path path = o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.bin" : fs::path(o.checkpoint);
  if (!fs::exists(path)) throw ValidationError("checkpoint not found: " + path.string());
  return load_checkpoint(path);
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_iou.size(); ++c) {
    per_class.push_back({{"label", c == 0 ? std::string("background") : std::string(class_name(c - 1))},
                         {"counted", r.counted[c] != 0},
                         {"iou", r.counted[c] ? nlohmann::json(r.class_iou[c]) : nlohmann::json(nullptr)}});
  }
  return {{"miou", r.miou}, {"samples", r.samples}, {"config_fingerprint", r.config_fingerprint},
          {"classes", per_class}};
}

int cmd_gen_data(const Options& o) {
  if (o.train_count == 0 || o.eval_count == 0) throw ValidationError("sample counts must be positive");
  const std::uint64_t seed = o.seed.value_or(o.data_seed);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  Dataset train{Split::Train, generate_dataset(o.train_count, seed, Split::Train)};
  Dataset eval{Split::Eval, generate_dataset(o.eval_count, seed, Split::Eval)};
  save_dataset(dir / "train.rcad", train);
  save_dataset(dir / "eval.rcad", eval);
  if (o.debug_export) {
    export_debug(dir / "debug_train", train.samples);
    export_debug(dir / "debug_eval", eval.samples);
  }
  std::cout << "wrote " << train.samples.size() << " train and " << eval.samples.size() << " eval samples to "
            << dir << '\n';
  return kExitOk;
}

int cmd_train(const Options& o) {
  const TrainConfig config = resolve_config(o);
  const Splits data = resolve_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);

  EvalSet eval{training_view(data.eval), ground_truth_view(data.eval), o.theta_bg};
  std::ofstream csv(dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());

  Trainer trainer(config);
  const auto history = trainer.fit(training_view(data.train), &eval, &csv);

  const Checkpoint ckpt = Checkpoint::from_trainer(trainer);
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  std::ofstream(dir / "config.json") << config.to_json().dump(2) << '\n';
  if (ckpt.prototypes) write_prototypes_csv(dir / "prototypes.csv", *ckpt.prototypes);

  std::cout << "trained " << history.size() << " epochs, " << trainer.steps() << " steps";
  if (!history.empty() && history.back().miou_eval) std::cout << ", eval mIoU " << *history.back().miou_eval;
  std::cout << "\ncheckpoint: " << (dir / "checkpoint.bin").string() << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const Checkpoint ckpt = resolve_checkpoint(o);
  const Splits data = resolve_data(o);
  EvalReport r = evaluate(ckpt.params, ckpt.active_prototypes(), training_view(data.eval),
                          ground_truth_view(data.eval), o.theta_bg);
  r.config_fingerprint = ckpt.config.fingerprint();
  const auto j = report_json(r);
  fs::create_directories(o.out);
  std::ofstream(fs::path(o.out) / "eval.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_ablate(const Options& o) {
  const TrainConfig base = resolve_config(o);
  auto grid = named_grid(o.grid, base);
  if (!grid) throw ValidationError("unknown grid '" + o.grid + "' (table1, gamma, k, memory, mixup)");
  if (o.seeds.empty()) throw ValidationError("at least one seed is required");
  const Splits data = resolve_data(o);
  fs::create_directories(o.out);

  const AblationTable table =
      run_ablation(*grid, data.train, data.eval, o.seeds, o.theta_bg, [](const AblationRun& r) {
        std::cerr << r.variant << " seed " << r.seed << ": "
                  << (r.ok ? "mIoU " + std::to_string(r.miou) : "failed: " + r.error) << '\n';
      });
  const fs::path path = fs::path(o.out) / ("ablation_" + o.grid + ".csv");
  std::ofstream out(path);
  write_ablation_csv(out, table);
  write_ablation_csv(std::cout, table);
  for (const auto& r : table.runs) {
    if (!r.ok) return kExitRuntime;
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  std::vector<std::uint64_t> seeds = o.seed ? std::vector<std::uint64_t>{*o.seed} : o.seeds;
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (o.coords == 0) throw ValidationError("--coords must be positive");
  const GradSuiteResult result = run_gradient_suite(seeds, o.coords);
  constexpr double kTolerance = 1e-4;
  for (const auto& c : result.cases) {
    std::cout << (c.report.passed(kTolerance) ? "ok   " : "FAIL ") << c.name << " seed=" << c.seed
              << " coords=" << c.report.entries.size() << " max_rel_err=" << c.report.max_rel_error << '\n';
  }
  std::cout << "max relative error " << result.max_rel_error << '\n';
  return result.passed(kTolerance) ? kExitOk : kExitRuntime;
}

int cmd_visualize(const Options& o) {
  const Checkpoint ckpt = resolve_checkpoint(o);
  const Splits data = resolve_data(o);
  if (o.samples == 0) throw ValidationError("--samples must be positive");
  const std::size_t n = std::min(o.samples, data.eval.size());
  const fs::path dir = fs::path(o.out) / "visuals";
  const auto summary = dump_visuals(ckpt, std::span(data.eval).first(n), dir, o.theta_bg);
  const double coverage = final_cam_coverage(ckpt, data.eval, o.theta_bg);
  std::cout << "wrote " << summary.files << " files for " << summary.samples << " samples to " << dir.string()
            << "\nfinal-CAM coverage over eval set: " << coverage << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional semantic contrast and aggregation on synthetic shapes"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Training config JSON");
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--dataset", o.dataset, "Directory with train.rcad and eval.rcad");
    sub->add_option("--data-seed", o.data_seed, "Seed for generated data when --dataset is absent");
    sub->add_option("--theta-bg", o.theta_bg, "Background threshold on normalized CAMs")->check(CLI::Range(0.0, 1.0));
  };

  auto* gen = app.add_subcommand("gen-data", "Generate train/eval datasets");
  common(gen);
  gen->add_option("--train-count", o.train_count, "Training images");
  gen->add_option("--eval-count", o.eval_count, "Evaluation images");
  gen->add_flag("--debug-export", o.debug_export, "Also write images, masks and index.jsonl");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint + metrics");
  common(train);

  auto* eval = app.add_subcommand("eval", "Score pseudo masks of a checkpoint");
  common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default <out>/checkpoint.bin)");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  common(ablate);
  ablate->add_option("--grid", o.grid, "table1, gamma, k, memory or mixup");
  ablate->add_option("--seeds", o.seeds, "Training seeds")->delimiter(',');

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  common(grad);
  grad->add_option("--seeds", o.seeds, "Seeds")->delimiter(',');
  grad->add_option("--coords", o.coords, "Coordinates per parameter tensor");

  auto* vis = app.add_subcommand("visualize", "Dump CAM, affinity and mask images");
  common(vis);
  vis->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default <out>/checkpoint.bin)");
  vis->add_option("--samples", o.samples, "Number of eval samples to dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*ablate) return cmd_ablate(o);
    if (*grad) return cmd_gradcheck(o);
    if (*vis) return cmd_visualize(o);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DecodeError& e) {
    std::cerr << "invalid input file: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}
