#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "rca/contrast.hpp"

using namespace rca;

namespace {

RegionEmbedding region(std::vector<double> v, std::size_t cls, std::size_t img) {
  RegionEmbedding r;
  const std::size_t d = v.size();
  r.vector = Tensor::from({1, d}, std::move(v));
  r.class_id = cls;
  r.image_id = img;
  r.gate_score = 0.9;
  return r;
}

double nce_value(const std::vector<double>& f, std::size_t cls, const MemoryBank& bank, double tau) {
  Tape tape;
  return nce_loss(tape, Tensor::from({1, f.size()}, f), cls, bank, tau).item();
}

}  // namespace

TEST_CASE("nce loss closed forms") {
  MemoryBank bank(2, 2, 0.99, 0.7);
  bank.restore_slot(0, 0, {1, 0});
  SUBCASE("no negatives gives zero") { CHECK(nce_value({0.3, -2}, 0, bank, 0.1) == 0.0); }
  SUBCASE("both at cosine zero gives ln 2") {
    bank.restore_slot(1, 0, {-1, 0});
    CHECK(nce_value({0, 1}, 0, bank, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("cosine 1 and -1") {
    bank.restore_slot(1, 0, {-1, 0});
    CHECK(nce_value({2, 0}, 0, bank, 1.0) == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
    CHECK(nce_value({2, 0}, 0, bank, 1.0) == doctest::Approx(0.126928).epsilon(1e-6));
  }
  SUBCASE("class without slots throws") { CHECK_THROWS_AS(nce_value({1, 0}, 1, bank, 0.1), NoPositivesError); }
}

TEST_CASE("nce loss against direct evaluation") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng = make_rng(seed, 3);
    const std::size_t d = 2 + uniform_index(rng, 7);
    MemoryBank bank(3, d, 0.99, 0.7);
    std::vector<double> pos, neg;
    for (std::size_t l = 0; l < 3; ++l) {
      const std::size_t n = 1 + uniform_index(rng, 4);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = uniform(rng, -1, 1);
        (l == 1 ? pos : neg).insert((l == 1 ? pos : neg).end(), v.begin(), v.end());
        bank.restore_slot(l, i, v);
      }
    }
    std::vector<double> f(d);
    for (auto& x : f) x = uniform(rng, -1, 1);
    const double tau = uniform(rng, 0.05, 1.0);
    CHECK(std::abs(nce_value(f, 1, bank, tau) - oracle::region_nce(f, pos, neg, d, tau)) <= 1e-10);
  }
}

TEST_CASE("beta sampling moments") {
  Rng rng = make_rng(0, 9);
  const int n = 100000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double w = beta_sample(rng, 8.0, 8.0);
    REQUIRE(w > 0.0);
    REQUIRE(w < 1.0);
    s += w;
    ss += w * w;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  CHECK(std::abs(mean - 0.5) <= 0.01);
  CHECK(std::abs(var - 1.0 / 68.0) <= 0.1 / 68.0);
}

TEST_CASE("mixup pairing") {
  Rng rng = make_rng(1, 0);
  SUBCASE("single class gives no pairs") {
    std::vector<RegionEmbedding> r{region({1, 0}, 2, 0), region({0, 1}, 2, 1), region({1, 1}, 2, 2)};
    auto plan = sample_mixup_pairs(r, 8.0, rng);
    CHECK(plan.pairs.empty());
    CHECK(plan.unpaired.size() == 3);
  }
  SUBCASE("two eligible regions pair with each other") {
    std::vector<RegionEmbedding> r{region({1, 0}, 0, 0), region({0, 1}, 1, 1)};
    auto plan = sample_mixup_pairs(r, 8.0, rng);
    REQUIRE(plan.pairs.size() == 2);
    CHECK(plan.pairs[0].anchor == 0);
    CHECK(plan.pairs[0].partner == 1);
    CHECK(plan.pairs[1].partner == 0);
  }
  SUBCASE("partners differ in image and class") {
    std::vector<RegionEmbedding> r;
    for (std::size_t i = 0; i < 12; ++i) r.push_back(region({1, 0}, i % 3, i / 2));
    auto plan = sample_mixup_pairs(r, 8.0, rng);
    for (const auto& p : plan.pairs) {
      CHECK(r[p.anchor].class_id != r[p.partner].class_id);
      CHECK(r[p.anchor].image_id != r[p.partner].image_id);
    }
  }
}

TEST_CASE("region mixing") {
  Tape tape;
  auto a = Tensor::from({1, 2}, {2, 0}), b = Tensor::from({1, 2}, {0, 2});
  auto m = mix_regions(tape, a, b, 0.5);
  CHECK(m.values()[0] == 1.0);
  CHECK(m.values()[1] == 1.0);
  CHECK(mix_regions(tape, a, b, 1.0).values()[0] == 2.0);
  CHECK(mix_regions(tape, a, b, 0.0).values()[1] == 2.0);
}

TEST_CASE("rm nce loss") {
  MemoryBank bank(2, 2, 0.99, 0.7);
  bank.restore_slot(0, 0, {1, 0.2});
  bank.restore_slot(1, 0, {-0.3, 1});
  auto a = region({0.5, 0.1}, 0, 0), b = region({-0.2, 0.7}, 1, 1);
  Tape tape;
  SUBCASE("endpoints reduce to plain nce exactly") {
    CHECK(rm_nce_loss(tape, a, b, 1.0, bank, 0.1).item() == nce_value({0.5, 0.1}, 0, bank, 0.1));
    CHECK(rm_nce_loss(tape, a, b, 0.0, bank, 0.1).item() == nce_value({-0.2, 0.7}, 1, bank, 0.1));
  }
  SUBCASE("omega 0.4 against the standalone oracle") {
    const std::vector<double> mixed{0.4 * 0.5 + 0.6 * -0.2, 0.4 * 0.1 + 0.6 * 0.7};
    const double expected = 0.4 * oracle::region_nce(mixed, {1, 0.2}, {-0.3, 1}, 2, 0.1) +
                            0.6 * oracle::region_nce(mixed, {-0.3, 1}, {1, 0.2}, 2, 0.1);
    CHECK(std::abs(rm_nce_loss(tape, a, b, 0.4, bank, 0.1).item() - expected) <= 1e-10);
  }
}

TEST_CASE("batch contrast loss") {
  Rng rng = make_rng(2, 0);
  ContrastConfig cfg;
  MemoryBank bank(2, 2, 0.99, 0.7);
  SUBCASE("empty bank is skipped") {
    Tape tape;
    std::vector<RegionEmbedding> r{region({1, 0}, 0, 0)};
    auto res = batch_contrast_loss(tape, r, bank, cfg, true, rng);
    CHECK(res.skipped);
    CHECK(res.loss.item() == 0.0);
  }
  bank.restore_slot(0, 7, {1, 0.1});
  bank.restore_slot(1, 7, {-0.4, 1});
  SUBCASE("single region equals its own loss") {
    Tape tape;
    std::vector<RegionEmbedding> r{region({0.3, 0.2}, 1, 0)};
    auto res = batch_contrast_loss(tape, r, bank, cfg, false, rng);
    CHECK_FALSE(res.skipped);
    CHECK(res.loss.item() == doctest::Approx(nce_value({0.3, 0.2}, 1, bank, cfg.temperature)).epsilon(1e-14));
  }
  SUBCASE("mean over regions per image, summed over images") {
    Tape tape;
    std::vector<RegionEmbedding> r{region({0.3, 0.2}, 0, 0), region({-1, 0.5}, 1, 0), region({0.9, -0.1}, 0, 1),
                                   region({0.1, 0.8}, 1, 1)};
    auto res = batch_contrast_loss(tape, r, bank, cfg, false, rng);
    const double t = cfg.temperature;
    const double img0 = 0.5 * (nce_value({0.3, 0.2}, 0, bank, t) + nce_value({-1, 0.5}, 1, bank, t));
    const double img1 = 0.5 * (nce_value({0.9, -0.1}, 0, bank, t) + nce_value({0.1, 0.8}, 1, bank, t));
    CHECK(res.terms == 4);
    CHECK(res.loss.item() == doctest::Approx(img0 + img1).epsilon(1e-13));
  }
  SUBCASE("zero embeddings are skipped") {
    Tape tape;
    std::vector<RegionEmbedding> r{region({0, 0}, 0, 0)};
    auto res = batch_contrast_loss(tape, r, bank, cfg, false, rng);
    CHECK(res.skipped);
  }
}
