#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "rca/tensor.hpp"

namespace rca {

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kPixels = kImageSize * kImageSize;
inline constexpr std::size_t kMinLabelPixels = 8;

using LabelVector = std::array<std::uint8_t, kNumClasses>;

enum class Split : std::uint32_t { Train = 0, Eval = 1 };
std::string_view split_name(Split split);

// The part of a sample visible to training: pixels and image-level tags.
struct LabeledImage {
  std::uint32_t image_id = 0;
  std::vector<float> pixels;  // 3 x 32 x 32, channel-first, values in [0,1]
  LabelVector labels{};

  Tensor to_tensor() const;
  Tensor to_tensor_flipped() const;  // horizontal mirror
};

// Pixel-level ground truth: 0 = background, l + 1 = class l. Consumed only by
// evaluation code.
using GroundTruthMask = std::vector<std::uint8_t>;

struct SyntheticSample {
  LabeledImage input;
  GroundTruthMask gt_mask;  // 32 x 32
};

// Class l: {red circle, green square, blue triangle, yellow circle,
// magenta square, cyan triangle}[l].
std::string_view class_name(std::size_t class_id);

std::vector<SyntheticSample> generate_dataset(std::size_t count, std::uint64_t seed, Split split);
SyntheticSample generate_sample(std::uint32_t image_id, std::uint64_t seed, Split split);

std::vector<LabeledImage> training_view(std::span<const SyntheticSample> samples);
std::vector<GroundTruthMask> ground_truth_view(std::span<const SyntheticSample> samples);

// Container layout (little-endian):
//   header: "RCAD" | u32 version | u32 split | u32 count | u32 classes | u32 height | u32 width   (28 bytes)
//   record: u32 image_id | u8 labels[classes] | f32 pixels[3*h*w] | u8 gt_mask[h*w]
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 28;
inline constexpr std::size_t kDatasetRecordBytes = 4 + kNumClasses + 4 * kImageChannels * kPixels + kPixels;

struct Dataset {
  Split split = Split::Train;
  std::vector<SyntheticSample> samples;
};

std::vector<std::uint8_t> serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);  // throws DecodeError
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// Writes <dir>/<id>.ppm, <dir>/<id>_mask.pgm and <dir>/index.jsonl.
void export_debug(const std::filesystem::path& dir, std::span<const SyntheticSample> samples);

}  // namespace rca
