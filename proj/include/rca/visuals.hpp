#pragma once

#include <filesystem>
#include <span>

#include "rca/checkpoint.hpp"
#include "rca/synthdata.hpp"

namespace rca {

struct VisualsSummary {
  std::size_t samples = 0;
  std::size_t files = 0;  // manifest lines
};

// Per sample: L P-heatmaps, L O-heatmaps, L*K affinity heatmaps (one per
// prototype, all zero when the checkpoint has no active prototypes) and the
// colour pseudo mask. Heatmaps are 32x32 graymaps, the mask a 32x32 pixmap.
// Every file gets one line in <dir>/manifest.jsonl.
VisualsSummary dump_visuals(const Checkpoint& ckpt, std::span<const SyntheticSample> samples,
                            const std::filesystem::path& dir, double theta_bg = 0.3);

// Fraction of samples whose O map marks at least as many pixels above
// theta_bg as the P map does (both min-max normalized over present classes).
double final_cam_coverage(const Checkpoint& ckpt, std::span<const SyntheticSample> samples, double theta_bg = 0.3);

}  // namespace rca
