#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rca/net.hpp"
#include "rca/prototypes.hpp"
#include "rca/synthdata.hpp"
#include "rca/tensor.hpp"

namespace rca {

inline constexpr double kDefaultBackgroundThreshold = 0.3;

// Per-pixel labels: 0 = background, l + 1 = class l.
struct PseudoMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;
};

// Keeps only classes with labels[l] == 1, min-max normalizes each kept map
// over the image, assigns the argmax class (lowest id on ties) where its
// normalized score exceeds theta_bg, and upsamples by nearest neighbour.
PseudoMask cam_to_mask(const Tensor& cam, std::span<const std::uint8_t> labels, double theta_bg,
                       std::size_t upsample = 2);

// Min-max normalized copy of one class map; a constant map normalizes to zeros.
std::vector<double> normalize_map(std::span<const double> map);

struct EvalReport {
  std::vector<double> class_iou;     // index 0 = background; NaN where the union is empty
  std::vector<std::uint8_t> counted; // 1 if the class entered the mean
  double miou = 0.0;
  std::size_t samples = 0;
  std::string config_fingerprint;
};

// IoU per label accumulated over the whole set, mean over labels with a
// non-empty union. num_labels includes background.
EvalReport miou(std::span<const PseudoMask> predictions, std::span<const GroundTruthMask> ground_truth,
                std::size_t num_labels = kNumClasses + 1);

// Which activation map the pseudo masks come from: the final O map by default,
// the intermediate P map for comparison.
enum class CamBranch { P, O };

std::vector<PseudoMask> predict_masks(const ModelParams& params, const PrototypeSet* prototypes,
                                      std::span<const LabeledImage> images,
                                      double theta_bg = kDefaultBackgroundThreshold, CamBranch branch = CamBranch::O);

EvalReport evaluate(const ModelParams& params, const PrototypeSet* prototypes, std::span<const LabeledImage> images,
                    std::span<const GroundTruthMask> ground_truth, double theta_bg = kDefaultBackgroundThreshold,
                    CamBranch branch = CamBranch::O);

}  // namespace rca
