#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rca/gradcheck.hpp"

namespace rca {

struct GradSuiteCase {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckReport report;
};

struct GradSuiteResult {
  std::vector<GradSuiteCase> cases;
  double max_rel_error = 0.0;
  bool passed(double tolerance) const { return !cases.empty() && max_rel_error < tolerance; }
};

// Names of the checked cases: one per differentiable op plus the contrast,
// aggregation and full-objective composites.
std::vector<std::string> gradient_suite_cases();

// Runs every case for every seed, checking `coords` random coordinates per
// parameter tensor with central differences.
GradSuiteResult run_gradient_suite(std::span<const std::uint64_t> seeds, std::size_t coords = 10);

}  // namespace rca
