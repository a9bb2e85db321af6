#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rca {

// Binary netpbm writers: P5 (graymap) and P6 (pixmap, interleaved RGB).
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);
void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb);

// Min-max scales values to 0..255. A constant map becomes all zeros.
std::vector<std::uint8_t> to_heatmap(std::span<const double> values);

// Nearest-neighbour upsampling of a row-major map by an integer factor.
template <typename T>
std::vector<T> upsample_nearest(std::span<const T> src, std::size_t height, std::size_t width, std::size_t factor) {
  std::vector<T> out(height * width * factor * factor);
  const std::size_t ow = width * factor;
  for (std::size_t y = 0; y < height * factor; ++y) {
    for (std::size_t x = 0; x < ow; ++x) out[y * ow + x] = src[(y / factor) * width + x / factor];
  }
  return out;
}

}  // namespace rca
