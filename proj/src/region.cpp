#include "rca/region.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rca/ops.hpp"

namespace rca {

RegionMask threshold_mask(std::span<const double> activation) {
  if (activation.empty()) throw std::invalid_argument("threshold_mask: empty activation map");
  double mean = 0.0;
  for (double v : activation) mean += v;
  mean /= static_cast<double>(activation.size());

  RegionMask m;
  m.mask.assign(activation.size(), 0);
  for (std::size_t i = 0; i < activation.size(); ++i) {
    if (activation[i] > mean) {
      m.mask[i] = 1;
      ++m.count;
    }
  }
  if (m.count == 0) {
    const auto it = std::max_element(activation.begin(), activation.end());
    m.mask[static_cast<std::size_t>(it - activation.begin())] = 1;
    m.count = 1;
    m.fallback = true;
  }
  return m;
}

std::vector<RegionEmbedding> extract_regions(Tape& tape, const Tensor& features, const Tensor& cam,
                                             std::span<const std::uint8_t> labels, const Tensor& scores,
                                             std::size_t image_id) {
  if (features.rank() != 3 || cam.rank() != 3) {
    throw std::invalid_argument("extract_regions: features and cam must be C x H x W");
  }
  const std::size_t dim = features.dim(0);
  const std::size_t npix = features.dim(1) * features.dim(2);
  const std::size_t num_classes = cam.dim(0);
  if (cam.dim(1) != features.dim(1) || cam.dim(2) != features.dim(2)) {
    throw std::invalid_argument("extract_regions: spatial mismatch " + shape_str(features.shape()) + " vs " +
                                shape_str(cam.shape()));
  }
  if (labels.size() != num_classes || scores.numel() != num_classes) {
    throw std::invalid_argument("extract_regions: label/score count does not match class count");
  }
  if (std::none_of(labels.begin(), labels.end(), [](std::uint8_t y) { return y != 0; })) {
    throw std::invalid_argument("extract_regions: label vector has no positive class");
  }

  Tensor flat = ops::reshape(tape, features, {dim, npix});
  std::vector<RegionEmbedding> regions;
  for (std::size_t l = 0; l < num_classes; ++l) {
    if (!labels[l]) continue;
    const auto activation = cam.values().subspan(l * npix, npix);
    const RegionMask m = threshold_mask(activation);

    std::vector<double> weights(npix);
    const double inv = 1.0 / static_cast<double>(m.count);
    for (std::size_t i = 0; i < npix; ++i) weights[i] = m.mask[i] ? inv : 0.0;
    Tensor pooled = ops::matmul(tape, flat, Tensor::from({npix, 1}, std::move(weights)));

    RegionEmbedding r;
    r.vector = ops::reshape(tape, pooled, {1, dim});
    r.class_id = l;
    r.image_id = image_id;
    r.gate_score = 1.0 / (1.0 + std::exp(-scores[l]));
    r.empty_mask = m.fallback;
    regions.push_back(std::move(r));
  }
  return regions;
}

}  // namespace rca
