#include "rca/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

#include "rca/aggregate.hpp"
#include "rca/contrast.hpp"
#include "rca/memory_bank.hpp"
#include "rca/net.hpp"
#include "rca/ops.hpp"
#include "rca/pipeline.hpp"
#include "rca/prototypes.hpp"
#include "rca/rng.hpp"
#include "rca/synthdata.hpp"

namespace rca {

namespace {

struct Case {
  LossBuilder build;
  std::vector<Tensor> params;
};

using CaseFactory = std::function<Case(std::uint64_t)>;

Tensor random_leaf(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor random_const(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), false);
}

// Reduces y to a scalar through fixed random weights so every output
// coordinate carries a distinct upstream gradient.
Tensor weighted_sum(Tape& tape, const Tensor& y, const Tensor& w) { return ops::sum(tape, ops::mul(tape, y, w)); }

Case unary_case(std::uint64_t seed, Shape shape, double lo, double hi,
                std::function<Tensor(Tape&, const Tensor&)> op, Shape out_shape = {}) {
  Rng rng = make_rng(seed, 0x10);
  Tensor x = random_leaf(rng, shape, lo, hi);
  Tensor w = random_const(rng, out_shape.empty() ? shape : out_shape);
  return {[=](Tape& t) { return weighted_sum(t, op(t, x), w); }, {x}};
}

Case binary_case(std::uint64_t seed, Shape a_shape, Shape b_shape, Shape out_shape,
                 std::function<Tensor(Tape&, const Tensor&, const Tensor&)> op) {
  Rng rng = make_rng(seed, 0x11);
  Tensor a = random_leaf(rng, a_shape), b = random_leaf(rng, b_shape);
  Tensor w = random_const(rng, out_shape);
  return {[=](Tape& t) { return weighted_sum(t, op(t, a, b), w); }, {a, b}};
}

// A bank with a few slots for every class, filled with random vectors.
MemoryBank random_bank(Rng& rng, std::size_t classes, std::size_t dim, std::size_t per_class) {
  MemoryBank bank(classes, dim, 0.99, 0.7);
  for (std::size_t l = 0; l < classes; ++l) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> v(dim);
      for (auto& x : v) x = uniform(rng, -1.0, 1.0);
      bank.restore_slot(l, 1000 + i, std::move(v));
    }
  }
  return bank;
}

Case composite_case(std::uint64_t seed, double alpha1) {
  constexpr std::size_t D = 8;
  Rng rng = make_rng(seed, 0x20);
  auto params = std::make_shared<ModelParams>(init_model(kNumClasses, D, seed));
  auto samples = std::make_shared<std::vector<LabeledImage>>();
  for (std::uint32_t i = 0; i < 2; ++i) samples->push_back(generate_sample(i, seed, Split::Train).input);
  auto bank = std::make_shared<MemoryBank>(random_bank(rng, kNumClasses, D, 4));
  auto protos = std::make_shared<PrototypeSet>(compute_prototypes(*bank, 3, seed, 1));
  TrainConfig config;
  config.feature_channels = D;
  config.alpha1 = alpha1;
  config.seed = seed;
  auto build = [=](Tape& t) {
    std::vector<Tensor> images;
    for (const auto& s : *samples) images.push_back(s.to_tensor());
    Rng mix = make_rng(seed, 0x21);
    return compute_objective(t, *params, images, *samples, *bank, protos.get(), config, alpha1, mix).total;
  };
  return {build, params->all_tensors()};
}

const std::vector<std::pair<std::string, CaseFactory>>& registry() {
  static const std::vector<std::pair<std::string, CaseFactory>> cases = {
      {"add", [](std::uint64_t s) { return binary_case(s, {3, 4}, {3, 4}, {3, 4}, ops::add); }},
      {"sub", [](std::uint64_t s) { return binary_case(s, {3, 4}, {3, 4}, {3, 4}, ops::sub); }},
      {"mul", [](std::uint64_t s) { return binary_case(s, {3, 4}, {3, 4}, {3, 4}, ops::mul); }},
      {"scale",
       [](std::uint64_t s) {
         return unary_case(s, {3, 4}, -1, 1, [](Tape& t, const Tensor& x) { return ops::scale(t, x, -2.5); });
       }},
      {"relu", [](std::uint64_t s) { return unary_case(s, {4, 5}, -1, 1, ops::relu); }},
      {"sigmoid", [](std::uint64_t s) { return unary_case(s, {4, 5}, -4, 4, ops::sigmoid); }},
      {"exp", [](std::uint64_t s) { return unary_case(s, {4, 5}, -2, 2, ops::exp); }},
      {"log", [](std::uint64_t s) { return unary_case(s, {4, 5}, 0.5, 3, ops::log); }},
      {"sum", [](std::uint64_t s) { return unary_case(s, {3, 4}, -1, 1, ops::sum, {1}); }},
      {"mean", [](std::uint64_t s) { return unary_case(s, {3, 4}, -1, 1, ops::mean, {1}); }},
      {"matmul", [](std::uint64_t s) { return binary_case(s, {3, 4}, {4, 5}, {3, 5}, ops::matmul); }},
      {"transpose", [](std::uint64_t s) { return unary_case(s, {3, 4}, -1, 1, ops::transpose, {4, 3}); }},
      {"reshape",
       [](std::uint64_t s) {
         return unary_case(
             s, {3, 4}, -1, 1, [](Tape& t, const Tensor& x) { return ops::reshape(t, x, {2, 6}); }, {2, 6});
       }},
      {"conv2d_s1",
       [](std::uint64_t s) {
         return binary_case(s, {2, 6, 6}, {3, 2, 3, 3}, {3, 6, 6},
                            [](Tape& t, const Tensor& x, const Tensor& k) { return ops::conv2d(t, x, k, 1); });
       }},
      {"conv2d_s2",
       [](std::uint64_t s) {
         return binary_case(s, {2, 7, 6}, {3, 2, 3, 3}, {3, 4, 3},
                            [](Tape& t, const Tensor& x, const Tensor& k) { return ops::conv2d(t, x, k, 2); });
       }},
      {"concat_channels",
       [](std::uint64_t s) {
         return binary_case(s, {2, 4, 4}, {1, 4, 4}, {3, 4, 4}, [](Tape& t, const Tensor& a, const Tensor& b) {
           const Tensor parts[] = {a, b};
           return ops::concat_channels(t, parts);
         });
       }},
      {"softmax_rows", [](std::uint64_t s) { return unary_case(s, {3, 5}, -2, 2, ops::softmax_rows); }},
      {"l2_normalize_rows",
       [](std::uint64_t s) {
         return unary_case(s, {3, 5}, -1, 1, [](Tape& t, const Tensor& x) { return ops::l2_normalize_rows(t, x); });
       }},
      {"global_average_pool",
       [](std::uint64_t s) { return unary_case(s, {3, 4, 4}, -1, 1, ops::global_average_pool, {3}); }},
      {"bce_with_logits",
       [](std::uint64_t s) {
         Rng rng = make_rng(s, 0x12);
         Tensor x = random_leaf(rng, {12}, -3, 3);
         std::vector<double> targets(12);
         for (auto& y : targets) y = uniform01(rng) < 0.5 ? 0.0 : 1.0;
         return Case{[=](Tape& t) { return ops::bce_with_logits(t, x, targets); }, {x}};
       }},
      {"nce_loss",
       [](std::uint64_t s) {
         Rng rng = make_rng(s, 0x13);
         auto bank = std::make_shared<MemoryBank>(random_bank(rng, 3, 10, 3));
         Tensor f = random_leaf(rng, {1, 10});
         return Case{[=](Tape& t) { return nce_loss(t, f, 1, *bank, 0.1); }, {f}};
       }},
      {"rm_nce_loss",
       [](std::uint64_t s) {
         Rng rng = make_rng(s, 0x14);
         auto bank = std::make_shared<MemoryBank>(random_bank(rng, 3, 10, 3));
         Tensor fa = random_leaf(rng, {1, 10}), fb = random_leaf(rng, {1, 10});
         const double omega = beta_sample(rng, 8.0, 8.0);
         return Case{[=](Tape& t) {
                       RegionEmbedding a{fa, 0, 0, 0.9, false}, b{fb, 2, 1, 0.9, false};
                       return rm_nce_loss(t, a, b, omega, *bank, 0.1);
                     },
                     {fa, fb}};
       }},
      {"aggregate",
       [](std::uint64_t s) {
         Rng rng = make_rng(s, 0x15);
         auto bank = std::make_shared<MemoryBank>(random_bank(rng, 3, 4, 5));
         auto protos = std::make_shared<PrototypeSet>(compute_prototypes(*bank, 2, s, 1));
         Tensor f = random_leaf(rng, {4, 3, 3});
         Tensor w = random_const(rng, {8, 3, 3});
         return Case{[=](Tape& t) { return weighted_sum(t, aggregate_features(t, f, protos.get()).enriched, w); },
                     {f}};
       }},
      {"objective", [](std::uint64_t s) { return composite_case(s, 0.01); }},
      {"objective_contrast_weighted", [](std::uint64_t s) { return composite_case(s, 1.0); }},
  };
  return cases;
}

}  // namespace

std::vector<std::string> gradient_suite_cases() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

GradSuiteResult run_gradient_suite(std::span<const std::uint64_t> seeds, std::size_t coords) {
  if (seeds.empty()) throw std::invalid_argument("gradient suite needs at least one seed");
  GradSuiteResult result;
  for (const auto& [name, factory] : registry()) {
    for (auto seed : seeds) {
      Case c = factory(seed);
      GradSuiteCase out{name, seed, check_gradients(c.build, c.params, coords, seed)};
      result.max_rel_error = std::max(result.max_rel_error, out.report.max_rel_error);
      result.cases.push_back(std::move(out));
    }
  }
  return result;
}

}  // namespace rca
