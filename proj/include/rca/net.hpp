#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rca/tensor.hpp"

namespace rca {

inline constexpr std::size_t kConv1Channels = 16;
inline constexpr std::size_t kDefaultFeatureChannels = 32;

// Two 3x3 convolutions, the second with stride 2: 3x32x32 -> D x 16 x 16.
struct BackboneParams {
  Tensor conv1;  // 16 x 3 x 3 x 3
  Tensor conv2;  // D x 16 x 3 x 3
  std::size_t feature_channels() const { return conv2.dim(0); }
};

// Class-wise 1x1 projection without bias.
struct CamHeadParams {
  Tensor weight;  // L x C
  std::size_t num_classes() const { return weight.dim(0); }
  std::size_t input_channels() const { return weight.dim(1); }
};

struct ModelParams {
  BackboneParams backbone;
  CamHeadParams head_p;  // over D channels
  CamHeadParams head_o;  // over 2D channels (features + aggregated context)

  std::size_t num_classes() const { return head_p.num_classes(); }
  std::size_t feature_channels() const { return backbone.feature_channels(); }
  std::vector<Tensor> backbone_tensors() const { return {backbone.conv1, backbone.conv2}; }
  std::vector<Tensor> head_tensors() const { return {head_p.weight, head_o.weight}; }
  std::vector<Tensor> all_tensors() const {
    return {backbone.conv1, backbone.conv2, head_p.weight, head_o.weight};
  }
  ModelParams clone() const;
};

// He fan-in init for convolutions, N(0, 0.01^2) for the heads.
ModelParams init_model(std::size_t num_classes, std::size_t feature_channels, std::uint64_t seed);

// image: 3 x 32 x 32 in [0,1]. Returns F as D x 16 x 16.
Tensor forward_features(Tape& tape, const Tensor& image, const BackboneParams& params);

// features: C x H x W -> activation map L x H x W.
Tensor forward_cam(Tape& tape, const Tensor& features, const CamHeadParams& head);

// GAP over each class map: the un-normalized class scores.
Tensor classification_scores(Tape& tape, const Tensor& cam);

// Per-class sigmoid + binary cross-entropy, averaged over classes.
Tensor multilabel_loss(Tape& tape, const Tensor& scores, std::span<const std::uint8_t> labels);

}  // namespace rca
