#include "rca/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rca/rng.hpp"

namespace rca {

GradCheckReport check_gradients(const LossBuilder& build, std::vector<Tensor> params,
                                std::size_t coords_per_tensor, std::uint64_t seed, double step) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = build(tape);
    tape.backward(loss);
    for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
  }

  auto evaluate = [&build]() {
    Tape tape;
    return build(tape).item();
  };

  Rng rng(derive_seed(seed, 0x6772616463686bULL));
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > coords_per_tensor) {
      for (std::size_t i = 0; i < coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + uniform_index(rng, coords.size() - i)]);
      }
      coords.resize(coords_per_tensor);
    }
    for (auto c : coords) {
      auto values = p.values_mut();
      const double original = values[c];
      values[c] = original + step;
      const double plus = evaluate();
      values[c] = original - step;
      const double minus = evaluate();
      values[c] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[t][c];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      report.entries.push_back({t, c, a, numeric, rel});
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
  }
  return report;
}

}  // namespace rca
