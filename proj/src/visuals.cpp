#include "rca/visuals.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rca/evaluation.hpp"
#include "rca/image_io.hpp"
#include "rca/pipeline.hpp"

namespace rca {

namespace {

constexpr std::size_t kUpsample = 2;

constexpr std::array<std::array<std::uint8_t, 3>, kNumClasses + 1> kPalette{{
    {0, 0, 0},
    {230, 25, 25},
    {25, 200, 25},
    {25, 25, 230},
    {230, 230, 25},
    {230, 25, 230},
    {25, 230, 230},
}};

std::vector<std::uint8_t> heatmap_upsampled(std::span<const double> map, std::size_t h, std::size_t w) {
  const auto heat = to_heatmap(map);
  return upsample_nearest<std::uint8_t>(heat, h, w, kUpsample);
}

// Pixels whose best normalized present-class score exceeds theta.
std::size_t active_pixels(const Tensor& cam, const LabelVector& labels, double theta) {
  const std::size_t npix = cam.dim(1) * cam.dim(2);
  std::vector<double> best(npix, 0.0);
  for (std::size_t l = 0; l < cam.dim(0); ++l) {
    if (!labels[l]) continue;
    const auto norm = normalize_map(cam.values().subspan(l * npix, npix));
    for (std::size_t i = 0; i < npix; ++i) best[i] = std::max(best[i], norm[i]);
  }
  std::size_t n = 0;
  for (double b : best) n += b > theta ? 1 : 0;
  return n;
}

}  // namespace

VisualsSummary dump_visuals(const Checkpoint& ckpt, std::span<const SyntheticSample> samples,
                            const std::filesystem::path& dir, double theta_bg) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());

  const PrototypeSet* protos = ckpt.active_prototypes();
  const std::size_t L = ckpt.params.num_classes();
  const std::size_t K = protos ? protos->k : ckpt.config.K;
  VisualsSummary summary;

  auto record = [&](std::size_t sample, const SyntheticSample& s, const std::string& kind, int cls, int proto,
                    const std::string& file) {
    nlohmann::json line{{"sample", sample}, {"image_id", s.input.image_id}, {"kind", kind},
                        {"class", cls},     {"prototype", proto},        {"file", file},
                        {"width", kImageSize}, {"height", kImageSize}};
    manifest << line.dump() << '\n';
    ++summary.files;
  };

  for (std::size_t si = 0; si < samples.size(); ++si) {
    const auto& s = samples[si];
    Tape tape;
    ForwardPass fp = forward_pipeline(tape, ckpt.params, s.input.to_tensor(), protos);
    const std::size_t h = fp.cam_p.dim(1), w = fp.cam_p.dim(2), npix = h * w;
    const std::string stem = "s" + std::to_string(si) + "_img" + std::to_string(s.input.image_id);

    for (const auto& [kind, cam] : {std::pair{"cam_p", &fp.cam_p}, std::pair{"cam_o", &fp.cam_o}}) {
      for (std::size_t l = 0; l < L; ++l) {
        const std::string file = stem + "_" + kind + "_c" + std::to_string(l) + ".pgm";
        write_pgm(dir / file, w * kUpsample, h * kUpsample,
                  heatmap_upsampled(cam->values().subspan(l * npix, npix), h, w));
        record(si, s, kind, static_cast<int>(l), -1, file);
      }
    }

    std::vector<double> column(npix, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t j = 0; j < K; ++j) {
        if (fp.affinity.defined()) {
          const auto a = fp.affinity.values();
          const std::size_t cols = fp.affinity.dim(1), c = l * K + j;
          for (std::size_t i = 0; i < npix; ++i) column[i] = a[i * cols + c];
        }
        const std::string file = stem + "_affinity_c" + std::to_string(l) + "_k" + std::to_string(j) + ".pgm";
        write_pgm(dir / file, w * kUpsample, h * kUpsample, heatmap_upsampled(column, h, w));
        record(si, s, "affinity", static_cast<int>(l), static_cast<int>(j), file);
      }
    }

    const PseudoMask mask = cam_to_mask(fp.cam_o, s.input.labels, theta_bg, kUpsample);
    std::vector<std::uint8_t> rgb(mask.labels.size() * 3);
    for (std::size_t i = 0; i < mask.labels.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = kPalette[mask.labels[i]][c];
    }
    const std::string file = stem + "_mask.ppm";
    write_ppm(dir / file, mask.width, mask.height, rgb);
    record(si, s, "mask", -1, -1, file);
    ++summary.samples;
  }
  return summary;
}

double final_cam_coverage(const Checkpoint& ckpt, std::span<const SyntheticSample> samples, double theta_bg) {
  if (samples.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& s : samples) {
    Tape tape;
    ForwardPass fp = forward_pipeline(tape, ckpt.params, s.input.to_tensor(), ckpt.active_prototypes());
    if (active_pixels(fp.cam_o, s.input.labels, theta_bg) >= active_pixels(fp.cam_p, s.input.labels, theta_bg)) {
      ++covered;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(samples.size());
}

}  // namespace rca
