#include "rca/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rca/image_io.hpp"
#include "rca/pipeline.hpp"

namespace rca {

std::vector<double> normalize_map(std::span<const double> map) {
  std::vector<double> out(map.size(), 0.0);
  if (map.empty()) return out;
  const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - *lo) / range;
  return out;
}

PseudoMask cam_to_mask(const Tensor& cam, std::span<const std::uint8_t> labels, double theta_bg,
                       std::size_t upsample) {
  if (cam.rank() != 3) throw std::invalid_argument("cam_to_mask: cam must be L x H x W");
  if (labels.size() != cam.dim(0)) throw std::invalid_argument("cam_to_mask: label count mismatch");
  if (!(theta_bg > 0.0 && theta_bg < 1.0)) throw std::invalid_argument("cam_to_mask: theta_bg must be in (0,1)");
  if (upsample == 0) throw std::invalid_argument("cam_to_mask: upsample factor must be positive");

  const std::size_t h = cam.dim(1), w = cam.dim(2), npix = h * w;
  std::vector<double> best(npix, -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> arg(npix, 0);
  for (std::size_t l = 0; l < cam.dim(0); ++l) {
    if (!labels[l]) continue;
    const auto norm = normalize_map(cam.values().subspan(l * npix, npix));
    for (std::size_t i = 0; i < npix; ++i) {
      if (norm[i] > best[i]) {
        best[i] = norm[i];
        arg[i] = static_cast<std::uint8_t>(l + 1);
      }
    }
  }
  std::vector<std::uint8_t> small(npix, 0);
  for (std::size_t i = 0; i < npix; ++i) small[i] = best[i] > theta_bg ? arg[i] : 0;

  PseudoMask m;
  m.height = h * upsample;
  m.width = w * upsample;
  m.labels = upsample_nearest<std::uint8_t>(small, h, w, upsample);
  return m;
}

EvalReport miou(std::span<const PseudoMask> predictions, std::span<const GroundTruthMask> ground_truth,
                std::size_t num_labels) {
  if (predictions.size() != ground_truth.size()) {
    throw std::invalid_argument("miou: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(ground_truth.size()) + " ground-truth masks");
  }
  std::vector<std::size_t> inter(num_labels, 0), uni(num_labels, 0);
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const auto& p = predictions[s].labels;
    const auto& g = ground_truth[s];
    if (p.size() != g.size()) throw std::invalid_argument("miou: mask shape mismatch at sample " + std::to_string(s));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] >= num_labels || g[i] >= num_labels) throw std::invalid_argument("miou: label out of range");
      if (p[i] == g[i]) {
        ++inter[p[i]];
        ++uni[p[i]];
      } else {
        ++uni[p[i]];
        ++uni[g[i]];
      }
    }
  }
  EvalReport r;
  r.samples = predictions.size();
  r.class_iou.assign(num_labels, std::numeric_limits<double>::quiet_NaN());
  r.counted.assign(num_labels, 0);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    if (uni[c] == 0) continue;
    r.class_iou[c] = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    r.counted[c] = 1;
    total += r.class_iou[c];
    ++n;
  }
  r.miou = n ? total / static_cast<double>(n) : 0.0;
  return r;
}

std::vector<PseudoMask> predict_masks(const ModelParams& params, const PrototypeSet* prototypes,
                                      std::span<const LabeledImage> images, double theta_bg, CamBranch branch) {
  std::vector<PseudoMask> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    Tape tape;
    ForwardPass fp = forward_pipeline(tape, params, img.to_tensor(), prototypes);
    out.push_back(cam_to_mask(branch == CamBranch::O ? fp.cam_o : fp.cam_p, img.labels, theta_bg));
  }
  return out;
}

EvalReport evaluate(const ModelParams& params, const PrototypeSet* prototypes, std::span<const LabeledImage> images,
                    std::span<const GroundTruthMask> ground_truth, double theta_bg, CamBranch branch) {
  const auto preds = predict_masks(params, prototypes, images, theta_bg, branch);
  return miou(preds, ground_truth);
}

}  // namespace rca
