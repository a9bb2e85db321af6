#include "rca/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace rca {

namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  std::span<const std::uint8_t> data, std::size_t channels) {
  if (data.size() != width * height * channels) throw std::invalid_argument("netpbm: pixel count mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
  write_netpbm(path, "P5", width, height, pixels, 1);
}

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb) {
  write_netpbm(path, "P6", width, height, rgb, 3);
}

std::vector<std::uint8_t> to_heatmap(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - *lo) / range));
  }
  return out;
}

}  // namespace rca
