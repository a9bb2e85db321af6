#include "rca/net.hpp"

#include <cmath>
#include <stdexcept>

#include "rca/ops.hpp"
#include "rca/rng.hpp"

namespace rca {

namespace {

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * standard_normal(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor clone_param(const Tensor& t) { return Tensor::from(t.shape(), {t.values().begin(), t.values().end()}, true); }

}  // namespace

ModelParams ModelParams::clone() const {
  return {{clone_param(backbone.conv1), clone_param(backbone.conv2)},
          {clone_param(head_p.weight)},
          {clone_param(head_o.weight)}};
}

ModelParams init_model(std::size_t num_classes, std::size_t feature_channels, std::uint64_t seed) {
  if (num_classes == 0 || feature_channels == 0) throw std::invalid_argument("init_model: empty model");
  Rng rng = make_rng(seed, 0x696e6974ULL);
  ModelParams m;
  m.backbone.conv1 = gaussian({kConv1Channels, 3, 3, 3}, std::sqrt(2.0 / (3.0 * 9.0)), rng);
  m.backbone.conv2 = gaussian({feature_channels, kConv1Channels, 3, 3},
                              std::sqrt(2.0 / (static_cast<double>(kConv1Channels) * 9.0)), rng);
  m.head_p.weight = gaussian({num_classes, feature_channels}, 0.01, rng);
  m.head_o.weight = gaussian({num_classes, 2 * feature_channels}, 0.01, rng);
  return m;
}

Tensor forward_features(Tape& tape, const Tensor& image, const BackboneParams& params) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != 32 || image.dim(2) != 32) {
    throw std::invalid_argument("forward_features: expected a 3x32x32 image, got " + shape_str(image.shape()));
  }
  Tensor h = ops::relu(tape, ops::conv2d(tape, image, params.conv1, 1));
  return ops::relu(tape, ops::conv2d(tape, h, params.conv2, 2));
}

Tensor forward_cam(Tape& tape, const Tensor& features, const CamHeadParams& head) {
  if (features.rank() != 3) throw std::invalid_argument("forward_cam: features must be C x H x W");
  if (features.dim(0) != head.input_channels()) {
    throw std::invalid_argument("forward_cam: head expects " + std::to_string(head.input_channels()) +
                                " channels, features have " + std::to_string(features.dim(0)));
  }
  const std::size_t h = features.dim(1), w = features.dim(2);
  Tensor flat = ops::reshape(tape, features, {features.dim(0), h * w});
  Tensor maps = ops::matmul(tape, head.weight, flat);
  return ops::reshape(tape, maps, {head.num_classes(), h, w});
}

Tensor classification_scores(Tape& tape, const Tensor& cam) { return ops::global_average_pool(tape, cam); }

Tensor multilabel_loss(Tape& tape, const Tensor& scores, std::span<const std::uint8_t> labels) {
  std::vector<double> targets(labels.begin(), labels.end());
  return ops::bce_with_logits(tape, scores, targets);
}

}  // namespace rca
