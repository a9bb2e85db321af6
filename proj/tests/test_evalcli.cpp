#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rca/ablation.hpp"
#include "rca/evaluation.hpp"
#include "rca/image_io.hpp"
#include "rca/trainer.hpp"
#include "rca/visuals.hpp"

using namespace rca;
namespace fs = std::filesystem;

namespace {

PseudoMask mask_of(std::vector<std::uint8_t> labels, std::size_t h, std::size_t w) {
  return PseudoMask{h, w, std::move(labels)};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("cam to mask") {
  SUBCASE("nothing above threshold is background") {
    // A constant map normalizes to zero everywhere.
    std::vector<double> v(2 * 4, 0.0);
    const std::uint8_t y[] = {1, 0};
    auto m = cam_to_mask(Tensor::from({2, 2, 2}, v), y, 0.3, 1);
    for (auto l : m.labels) CHECK(l == 0);
  }
  SUBCASE("single survivor") {
    std::vector<double> v{0, 0, 0, 0, 0, 0, 5, 0};
    const std::uint8_t y[] = {0, 1};
    auto m = cam_to_mask(Tensor::from({2, 2, 2}, v), y, 0.3, 1);
    CHECK(m.labels == std::vector<std::uint8_t>{0, 0, 2, 0});
  }
  SUBCASE("upsampling is nearest neighbour") {
    std::vector<double> v{1, 0, 0, 0};
    const std::uint8_t y[] = {1};
    auto m = cam_to_mask(Tensor::from({1, 2, 2}, v), y, 0.3, 2);
    CHECK(m.height == 4);
    CHECK(m.labels == std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  }
  SUBCASE("random maps against a per-pixel loop") {
    Rng rng = make_rng(8, 0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> v(kNumClasses * 16);
      for (auto& x : v) x = uniform(rng, -2, 2);
      std::array<std::uint8_t, kNumClasses> y{};
      y[uniform_index(rng, 3)] = 1;
      y[3 + uniform_index(rng, 3)] = 1;
      auto m = cam_to_mask(Tensor::from({kNumClasses, 4, 4}, v), y, 0.3, 1);
      for (std::size_t i = 0; i < 16; ++i) {
        double best = -1.0;
        std::uint8_t arg = 0;
        for (std::size_t l = 0; l < kNumClasses; ++l) {
          if (!y[l]) continue;
          double lo = 1e300, hi = -1e300;
          for (std::size_t j = 0; j < 16; ++j) {
            lo = std::min(lo, v[l * 16 + j]);
            hi = std::max(hi, v[l * 16 + j]);
          }
          const double n = (v[l * 16 + i] - lo) / (hi - lo);
          if (n > best) {
            best = n;
            arg = static_cast<std::uint8_t>(l + 1);
          }
        }
        CHECK(m.labels[i] == (best > 0.3 ? arg : 0));
        CHECK((m.labels[i] == 0 || y[m.labels[i] - 1] == 1));
      }
    }
  }
  SUBCASE("threshold must lie strictly inside (0,1)") {
    const std::uint8_t y[] = {1};
    CHECK_THROWS(cam_to_mask(Tensor::zeros({1, 2, 2}), y, 0.0));
    CHECK_THROWS(cam_to_mask(Tensor::zeros({1, 2, 2}), y, 1.0));
  }
}

TEST_CASE("miou") {
  SUBCASE("perfect prediction") {
    std::vector<PseudoMask> p{mask_of({0, 1, 2, 2}, 2, 2)};
    std::vector<GroundTruthMask> g{{0, 1, 2, 2}};
    CHECK(miou(p, g).miou == 1.0);
  }
  SUBCASE("disjoint foregrounds") {
    std::vector<PseudoMask> p{mask_of({1, 1, 0, 0}, 2, 2)};
    std::vector<GroundTruthMask> g{{0, 0, 1, 1}};
    auto r = miou(p, g);
    CHECK(r.class_iou[1] == 0.0);
    CHECK(r.class_iou[0] == 0.0);
  }
  SUBCASE("two by two toy: one of three pixels") {
    std::vector<PseudoMask> p{mask_of({1, 1, 0, 0}, 2, 2)};
    std::vector<GroundTruthMask> g{{0, 1, 1, 0}};
    auto r = miou(p, g);
    CHECK(r.class_iou[1] == doctest::Approx(1.0 / 3.0));
    CHECK(std::isnan(r.class_iou[2]));
    CHECK_FALSE(r.counted[2]);
  }
  SUBCASE("accumulates over the set before dividing") {
    std::vector<PseudoMask> p{mask_of({1, 0}, 1, 2), mask_of({1, 1}, 1, 2)};
    std::vector<GroundTruthMask> g{{1, 1}, {0, 1}};
    auto r = miou(p, g);
    CHECK(r.class_iou[1] == doctest::Approx(2.0 / 4.0));
  }
  SUBCASE("invariant under consistent relabeling") {
    Rng rng = make_rng(3, 3);
    std::vector<PseudoMask> p;
    std::vector<GroundTruthMask> g;
    for (int s = 0; s < 5; ++s) {
      std::vector<std::uint8_t> a(16), b(16);
      for (auto& x : a) x = static_cast<std::uint8_t>(uniform_index(rng, 4));
      for (auto& x : b) x = static_cast<std::uint8_t>(uniform_index(rng, 4));
      p.push_back(mask_of(a, 4, 4));
      g.push_back(b);
    }
    const std::uint8_t perm[] = {0, 3, 1, 2, 4, 5, 6};
    auto p2 = p;
    auto g2 = g;
    for (auto& m : p2)
      for (auto& x : m.labels) x = perm[x];
    for (auto& m : g2)
      for (auto& x : m) x = perm[x];
    CHECK(miou(p, g).miou == doctest::Approx(miou(p2, g2).miou).epsilon(1e-15));
  }
  SUBCASE("mismatched inputs are rejected") {
    std::vector<PseudoMask> p{mask_of({0, 1}, 1, 2)};
    std::vector<GroundTruthMask> g{{0, 1, 1}};
    CHECK_THROWS(miou(p, g));
    std::vector<GroundTruthMask> none;
    CHECK_THROWS(miou(p, none));
  }
}

TEST_CASE("heatmaps") {
  auto h = to_heatmap(std::vector<double>{-1, 0, 3});
  CHECK(*std::min_element(h.begin(), h.end()) == 0);
  CHECK(*std::max_element(h.begin(), h.end()) == 255);
  auto flat = to_heatmap(std::vector<double>{2, 2});
  CHECK(flat == std::vector<std::uint8_t>{0, 0});
}

TEST_CASE("ablation grids") {
  TrainConfig base;
  auto t1 = table1_grid(base);
  REQUIRE(t1.size() == 4);
  CHECK(t1[0].name == "baseline");
  CHECK((!t1[0].config.rsc_on && !t1[0].config.rsa_on));
  CHECK((t1[1].config.rsc_on && !t1[1].config.rsa_on));
  CHECK((!t1[2].config.rsc_on && t1[2].config.rsa_on));
  CHECK((t1[3].config.rsc_on && t1[3].config.rsa_on));

  std::vector<double> gammas;
  for (const auto& v : gamma_grid(base)) gammas.push_back(v.config.gamma);
  CHECK(gammas == std::vector<double>{0, 0.5, 0.8, 0.9, 0.99, 0.999});
  std::vector<std::size_t> caps;
  for (const auto& v : memory_grid(base)) caps.push_back(v.config.memory_capacity);
  CHECK(caps == std::vector<std::size_t>{100, 500, 0});
  CHECK(k_grid(base).front().config.K == 1);
  CHECK(named_grid("mixup", base)->size() == 2);
  CHECK_FALSE(named_grid("nope", base).has_value());
}

TEST_CASE("ablation harness") {
  auto train = generate_dataset(24, 1, Split::Train);
  auto eval = generate_dataset(6, 1, Split::Eval);
  TrainConfig base;
  base.epochs = 2;
  base.feature_channels = 8;

  SUBCASE("degenerate grid") {
    std::vector<AblationVariant> grid{{"only", base}};
    const std::uint64_t seeds[] = {3};
    auto table = run_ablation(grid, train, eval, seeds);
    std::ostringstream csv;
    write_ablation_csv(csv, table);
    std::istringstream in(csv.str());
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 3);
    CHECK(lines[1].rfind("run,0,only,3,1,", 0) == 0);
    CHECK(lines[2].rfind("summary,0,only,,1,", 0) == 0);
    CHECK(table.summaries[0].stddev == 0.0);
  }
  SUBCASE("byte-identical reruns and failure isolation") {
    TrainConfig broken = base;
    broken.tau = -1.0;
    std::vector<AblationVariant> grid{{"broken", broken}, {"ok", base}};
    const std::uint64_t seeds[] = {0, 1};
    auto render = [&]() {
      std::ostringstream csv;
      write_ablation_csv(csv, run_ablation(grid, train, eval, seeds));
      return csv.str();
    };
    const std::string a = render(), b = render();
    CHECK(a == b);
    auto table = run_ablation(grid, train, eval, seeds);
    CHECK_FALSE(table.runs[0].ok);
    CHECK(table.runs[0].error.find("tau") != std::string::npos);
    CHECK(table.runs[2].ok);
    CHECK(table.find("broken")->runs == 0);
    CHECK(table.find("ok")->runs == 2);
  }
}

TEST_CASE("visual dump") {
  TrainConfig c;
  c.epochs = 2;
  c.K = 2;
  c.feature_channels = 8;
  auto train = generate_dataset(24, 2, Split::Train);
  auto eval = generate_dataset(3, 2, Split::Eval);
  Trainer t(c);
  t.fit(training_view(train));
  const Checkpoint ckpt = Checkpoint::from_trainer(t);
  const fs::path dir = fs::temp_directory_path() / "rca_visuals_test";
  fs::remove_all(dir);
  auto summary = dump_visuals(ckpt, eval, dir);
  const std::size_t expected = 3 * (2 * kNumClasses + kNumClasses * 2 + 1);
  CHECK(summary.files == expected);
  CHECK(count_lines(dir / "manifest.jsonl") == expected);
  std::ifstream pgm(dir / "s0_img0_cam_p_c0.pgm", std::ios::binary);
  std::string magic;
  pgm >> magic;
  CHECK(magic == "P5");
  CHECK(fs::exists(dir / "s2_img2_mask.ppm"));
  fs::remove_all(dir);
}
