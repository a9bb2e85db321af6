#include "rca/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "rca/binary_io.hpp"
#include "rca/image_io.hpp"
#include "rca/rng.hpp"

namespace rca {

namespace {

enum class ShapeKind { Circle, Square, Triangle };

struct ClassStyle {
  std::string_view name;
  ShapeKind shape;
  std::array<float, 3> color;
};

constexpr std::array<ClassStyle, kNumClasses> kStyles{{
    {"red_circle", ShapeKind::Circle, {1.0f, 0.0f, 0.0f}},
    {"green_square", ShapeKind::Square, {0.0f, 1.0f, 0.0f}},
    {"blue_triangle", ShapeKind::Triangle, {0.0f, 0.0f, 1.0f}},
    {"yellow_circle", ShapeKind::Circle, {1.0f, 1.0f, 0.0f}},
    {"magenta_square", ShapeKind::Square, {1.0f, 0.0f, 1.0f}},
    {"cyan_triangle", ShapeKind::Triangle, {0.0f, 1.0f, 1.0f}},
}};

bool inside(ShapeKind kind, double px, double py, double cx, double cy, double r) {
  const double dx = px - cx, dy = py - cy;
  switch (kind) {
    case ShapeKind::Circle:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::Square:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::Triangle:
      // Apex at (cx, cy - r), base from (cx - r, cy + r) to (cx + r, cy + r).
      if (dy < -r || dy > r) return false;
      return std::abs(dx) <= (dy + r) * 0.5;
  }
  return false;
}

std::uint64_t sample_seed(std::uint64_t seed, Split split, std::uint32_t image_id) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(split) + 1), image_id);
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "eval"; }

std::string_view class_name(std::size_t class_id) { return kStyles.at(class_id).name; }

Tensor LabeledImage::to_tensor() const {
  return Tensor::from({kImageChannels, kImageSize, kImageSize}, std::vector<double>(pixels.begin(), pixels.end()));
}

Tensor LabeledImage::to_tensor_flipped() const {
  std::vector<double> v(pixels.size());
  for (std::size_t c = 0; c < kImageChannels; ++c) {
    for (std::size_t y = 0; y < kImageSize; ++y) {
      for (std::size_t x = 0; x < kImageSize; ++x) {
        v[(c * kImageSize + y) * kImageSize + x] = pixels[(c * kImageSize + y) * kImageSize + (kImageSize - 1 - x)];
      }
    }
  }
  return Tensor::from({kImageChannels, kImageSize, kImageSize}, std::move(v));
}

SyntheticSample generate_sample(std::uint32_t image_id, std::uint64_t seed, Split split) {
  Rng rng(sample_seed(seed, split, image_id));
  SyntheticSample s;
  s.input.image_id = image_id;
  s.input.pixels.resize(kImageChannels * kPixels);
  s.gt_mask.resize(kPixels);

  // Redraw until at least one class clears the pixel threshold.
  for (;;) {
    for (auto& p : s.input.pixels) p = static_cast<float>(uniform(rng, 0.0, 0.3));
    std::fill(s.gt_mask.begin(), s.gt_mask.end(), 0);

    std::array<std::size_t, kNumClasses> order{};
    for (std::size_t i = 0; i < kNumClasses; ++i) order[i] = i;
    const std::size_t count = 1 + uniform_index(rng, 3);
    for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + uniform_index(rng, kNumClasses - i)]);

    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cls = order[i];
      const auto& style = kStyles[cls];
      const double r = uniform(rng, 4.0, 10.0);
      const double cx = uniform(rng, 4.0, 28.0);
      const double cy = uniform(rng, 4.0, 28.0);
      std::array<float, 3> color{};
      for (std::size_t c = 0; c < 3; ++c) {
        color[c] = static_cast<float>(std::clamp(style.color[c] + uniform(rng, -0.1, 0.1), 0.0, 1.0));
      }
      for (std::size_t y = 0; y < kImageSize; ++y) {
        for (std::size_t x = 0; x < kImageSize; ++x) {
          if (!inside(style.shape, x + 0.5, y + 0.5, cx, cy, r)) continue;
          s.gt_mask[y * kImageSize + x] = static_cast<std::uint8_t>(cls + 1);
          for (std::size_t c = 0; c < 3; ++c) s.input.pixels[c * kPixels + y * kImageSize + x] = color[c];
        }
      }
    }

    std::array<std::size_t, kNumClasses + 1> area{};
    for (auto m : s.gt_mask) ++area[m];
    bool any = false;
    for (std::size_t l = 0; l < kNumClasses; ++l) {
      s.input.labels[l] = area[l + 1] >= kMinLabelPixels ? 1 : 0;
      any = any || s.input.labels[l];
    }
    if (any) return s;
  }
}

std::vector<SyntheticSample> generate_dataset(std::size_t count, std::uint64_t seed, Split split) {
  if (count == 0) throw std::invalid_argument("generate_dataset: count must be positive");
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sample(static_cast<std::uint32_t>(i), seed, split));
  return out;
}

std::vector<LabeledImage> training_view(std::span<const SyntheticSample> samples) {
  std::vector<LabeledImage> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.input);
  return out;
}

std::vector<GroundTruthMask> ground_truth_view(std::span<const SyntheticSample> samples) {
  std::vector<GroundTruthMask> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.gt_mask);
  return out;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& dataset) {
  ByteWriter w;
  w.bytes("RCAD");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(dataset.split));
  w.u32(static_cast<std::uint32_t>(dataset.samples.size()));
  w.u32(kNumClasses);
  w.u32(kImageSize);
  w.u32(kImageSize);
  for (const auto& s : dataset.samples) {
    w.u32(s.input.image_id);
    for (auto y : s.input.labels) w.u8(y);
    for (float p : s.input.pixels) w.f32(p);
    for (auto m : s.gt_mask) w.u8(m);
  }
  return w.take();
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect("RCAD", "dataset");
  const auto version = r.u32("dataset header");
  if (version != kDatasetVersion) {
    throw DecodeError("dataset: unsupported version " + std::to_string(version));
  }
  const auto split = r.u32("dataset header");
  if (split > 1) throw DecodeError("dataset: unknown split " + std::to_string(split));
  const auto count = r.u32("dataset header");
  if (r.u32("dataset header") != kNumClasses || r.u32("dataset header") != kImageSize ||
      r.u32("dataset header") != kImageSize) {
    throw DecodeError("dataset: unexpected class count or image size");
  }
  if (r.remaining() != static_cast<std::size_t>(count) * kDatasetRecordBytes) {
    throw DecodeError(r.remaining() < static_cast<std::size_t>(count) * kDatasetRecordBytes
                          ? "dataset: truncated input"
                          : "dataset: trailing bytes after last record");
  }

  Dataset d;
  d.split = static_cast<Split>(split);
  d.samples.resize(count);
  for (auto& s : d.samples) {
    s.input.image_id = r.u32("record");
    for (auto& y : s.input.labels) {
      y = r.u8("record");
      if (y > 1) throw DecodeError("dataset: label byte out of range");
    }
    s.input.pixels.resize(kImageChannels * kPixels);
    for (auto& p : s.input.pixels) p = r.f32("record");
    s.gt_mask.resize(kPixels);
    for (auto& m : s.gt_mask) {
      m = r.u8("record");
      if (m > kNumClasses) throw DecodeError("dataset: mask value out of range");
    }
  }
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file(path)); }

void export_debug(const std::filesystem::path& dir, std::span<const SyntheticSample> samples) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.jsonl", std::ios::trunc);
  if (!index) throw std::runtime_error("cannot write " + (dir / "index.jsonl").string());
  for (const auto& s : samples) {
    const std::string stem = std::to_string(s.input.image_id);
    std::vector<std::uint8_t> rgb(kPixels * 3);
    for (std::size_t i = 0; i < kPixels; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(255.0f * s.input.pixels[c * kPixels + i]));
      }
    }
    write_ppm(dir / (stem + ".ppm"), kImageSize, kImageSize, rgb);
    std::vector<std::uint8_t> mask(kPixels);
    for (std::size_t i = 0; i < kPixels; ++i) mask[i] = static_cast<std::uint8_t>(s.gt_mask[i] * 40);
    write_pgm(dir / (stem + "_mask.pgm"), kImageSize, kImageSize, mask);

    nlohmann::json line;
    line["image_id"] = s.input.image_id;
    line["image"] = stem + ".ppm";
    line["mask"] = stem + "_mask.pgm";
    line["labels"] = s.input.labels;
    std::vector<std::string> names;
    for (std::size_t l = 0; l < kNumClasses; ++l) {
      if (s.input.labels[l]) names.emplace_back(class_name(l));
    }
    line["classes"] = names;
    index << line.dump() << '\n';
  }
}

}  // namespace rca
