#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rca/memory_bank.hpp"
#include "rca/prototypes.hpp"
#include "rca/region.hpp"

using namespace rca;

namespace {

RegionEmbedding region(std::vector<double> v, std::size_t cls, std::size_t img, double gate) {
  RegionEmbedding r;
  const std::size_t d = v.size();
  r.vector = Tensor::from({1, d}, std::move(v));
  r.class_id = cls;
  r.image_id = img;
  r.gate_score = gate;
  return r;
}

std::vector<double> slot_vec(const MemoryBank& b, std::size_t l, std::size_t img) {
  auto s = b.slot(l, img);
  REQUIRE(s.has_value());
  return {s->begin(), s->end()};
}

}  // namespace

TEST_CASE("threshold mask") {
  auto m = threshold_mask(std::vector<double>{0, 0, 0, 5});
  CHECK(m.count == 1);
  CHECK(m.mask == std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK_FALSE(m.fallback);

  // Strictly above the mean: values equal to the mean are excluded.
  auto eq = threshold_mask(std::vector<double>{1, 2, 3});
  CHECK(eq.mask == std::vector<std::uint8_t>{0, 0, 1});

  auto flat = threshold_mask(std::vector<double>{2, 2, 2, 2});
  CHECK(flat.fallback);
  CHECK(flat.count == 1);
  CHECK(flat.mask[0] == 1);
}

TEST_CASE("extract regions") {
  Tape tape;
  Rng rng = make_rng(5, 0);
  const std::size_t D = 3;
  std::vector<double> fv(D * 16), pv(2 * 16);
  for (auto& v : fv) v = uniform(rng, -1, 1);
  for (auto& v : pv) v = uniform(rng, -1, 1);
  auto F = Tensor::from({D, 4, 4}, fv);
  auto P = Tensor::from({2, 4, 4}, pv);
  auto scores = Tensor::from({2}, {0.3, 2.0});

  SUBCASE("masked sum oracle") {
    const std::uint8_t y[] = {1, 1};
    auto regions = extract_regions(tape, F, P, y, scores, 9);
    REQUIRE(regions.size() == 2);
    for (std::size_t l = 0; l < 2; ++l) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 16; ++i) mean += pv[l * 16 + i];
      mean /= 16.0;
      std::vector<double> acc(D, 0.0);
      double count = 0.0;
      for (std::size_t i = 0; i < 16; ++i) {
        if (!(pv[l * 16 + i] > mean)) continue;
        count += 1.0;
        for (std::size_t c = 0; c < D; ++c) acc[c] += fv[c * 16 + i];
      }
      const auto& r = regions[l];
      CHECK(r.class_id == l);
      CHECK(r.image_id == 9);
      CHECK(r.gate_score == doctest::Approx(oracle::sigmoid(scores.values()[l])));
      for (std::size_t c = 0; c < D; ++c) CHECK(std::abs(r.vector.values()[c] - acc[c] / count) <= 1e-12);
    }
  }
  SUBCASE("only labelled classes produce regions") {
    const std::uint8_t y[] = {0, 1};
    auto regions = extract_regions(tape, F, P, y, scores, 0);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].class_id == 1);
    const std::uint8_t none[] = {0, 0};
    CHECK_THROWS(extract_regions(tape, F, P, none, scores, 0));
  }
  SUBCASE("constant features pool to the constant") {
    auto C = Tensor::full({D, 4, 4}, 0.75);
    const std::uint8_t y[] = {1, 0};
    auto r = extract_regions(tape, C, P, y, scores, 0);
    for (double v : r[0].vector.values()) CHECK(v == doctest::Approx(0.75));
  }
  SUBCASE("a single strict maximum selects that pixel") {
    std::vector<double> one(2 * 16, 0.0);
    one[6] = 1.0;
    const std::uint8_t y[] = {1, 0};
    auto r = extract_regions(tape, F, Tensor::from({2, 4, 4}, one), y, scores, 0);
    for (std::size_t c = 0; c < D; ++c) CHECK(r[0].vector.values()[c] == doctest::Approx(fv[c * 16 + 6]));
  }
}

TEST_CASE("memory momentum update") {
  SUBCASE("gamma 0.99 blend") {
    MemoryBank b(2, 2, 0.99, 0.7);
    b.update_slot(0, 0, 0.9, std::vector<double>{1, 0});
    b.update_slot(0, 0, 0.9, std::vector<double>{0, 1});
    auto v = slot_vec(b, 0, 0);
    CHECK(v[0] == doctest::Approx(0.99));
    CHECK(v[1] == doctest::Approx(0.01));
  }
  SUBCASE("gamma 0 replaces, gamma 1 freezes") {
    MemoryBank zero(1, 2, 0.0, 0.7), one(1, 2, 1.0, 0.7);
    for (auto* b : {&zero, &one}) {
      b->update_slot(0, 4, 0.9, std::vector<double>{1, 2});
      b->update_slot(0, 4, 0.9, std::vector<double>{-3, 5});
    }
    CHECK(slot_vec(zero, 0, 4) == std::vector<double>{-3, 5});
    CHECK(slot_vec(one, 0, 4) == std::vector<double>{1, 2});
  }
  SUBCASE("repeated updates stay in one slot") {
    MemoryBank b(2, 2, 0.5, 0.7);
    for (int i = 0; i < 3; ++i) b.update(std::vector<RegionEmbedding>{region({1.0 * i, 1}, 1, 0, 0.8)});
    CHECK(b.slot_count(1) == 1);
    CHECK(b.positives_negatives(1).positives.count() == 1);
  }
  SUBCASE("gate is strict and non-finite vectors are dropped") {
    MemoryBank b(1, 2, 0.5, 0.7);
    auto s = b.update(std::vector<RegionEmbedding>{region({1, 1}, 0, 0, 0.7), region({1, 1}, 0, 1, 0.2),
                                                   region({NAN, 1}, 0, 2, 0.9)});
    CHECK(b.total_slots() == 0);
    CHECK(s.offered == 3);
    CHECK(s.gated == 1);
    CHECK(s.dropped == 1);
  }
  SUBCASE("capacity keeps the first slots") {
    MemoryBank b(1, 1, 0.5, 0.7, 2);
    for (std::size_t i = 0; i < 5; ++i) b.update_slot(0, i, 0.9, std::vector<double>{double(i)});
    CHECK(b.slot_count(0) == 2);
    CHECK(b.slot(0, 0).has_value());
    CHECK(b.slot(0, 1).has_value());
    // Existing slots can still be blended at capacity.
    b.update_slot(0, 1, 0.9, std::vector<double>{3.0});
    CHECK(slot_vec(b, 0, 1)[0] == doctest::Approx(2.0));
  }
}

TEST_CASE("positives and negatives") {
  MemoryBank b(3, 1, 0.5, 0.7);
  b.restore_slot(0, 0, {1});
  b.restore_slot(0, 1, {2});
  SUBCASE("single class bank has no negatives") {
    auto s = b.positives_negatives(0);
    CHECK(s.positives.count() == 2);
    CHECK(s.negatives.empty());
  }
  SUBCASE("two classes with two slots each") {
    b.restore_slot(2, 5, {3});
    b.restore_slot(2, 3, {4});
    auto s = b.positives_negatives(2);
    CHECK(s.positives.count() == 2);
    CHECK(s.negatives.count() == 2);
    CHECK(s.positives.image_ids == std::vector<std::size_t>{3, 5});
  }
}

TEST_CASE("kmeans") {
  SUBCASE("objective never increases") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = make_rng(seed, 1);
      const std::size_t n = 10 + uniform_index(rng, 40), d = 1 + uniform_index(rng, 6), k = 1 + uniform_index(rng, 8);
      std::vector<double> pts(n * d);
      for (auto& v : pts) v = uniform(rng, -5, 5);
      auto r = kmeans(pts, n, d, k, rng);
      for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
    }
  }
  SUBCASE("K=1 is the mean") {
    Rng rng = make_rng(3, 1);
    std::vector<double> pts{1, 2, 3, 4, 5, 6, 7, 9};
    auto r = kmeans(pts, 4, 2, 1, rng);
    CHECK(std::abs(r.centroids[0] - 4.0) <= 1e-12);
    CHECK(std::abs(r.centroids[1] - 5.25) <= 1e-12);
  }
  SUBCASE("two duplicated points are recovered") {
    Rng rng = make_rng(4, 1);
    std::vector<double> pts{0, 0, 0, 0, 0, 0, 10, 10, 10, 10};
    auto r = kmeans(pts, 5, 2, 2, rng);
    std::vector<std::pair<double, double>> c{{r.centroids[0], r.centroids[1]}, {r.centroids[2], r.centroids[3]}};
    std::sort(c.begin(), c.end());
    CHECK(c[0] == std::pair<double, double>{0, 0});
    CHECK(c[1] == std::pair<double, double>{10, 10});
    // Exhaustive check: every point goes to its nearer centroid.
    for (std::size_t i = 0; i < 5; ++i) {
      const std::size_t a = r.assignment[i];
      CHECK(r.centroids[a * 2] == pts[i * 2]);
    }
  }
  SUBCASE("requires n >= k") {
    Rng rng = make_rng(0, 0);
    CHECK_THROWS(kmeans(std::vector<double>{1, 2}, 2, 1, 3, rng));
  }
}

TEST_CASE("prototypes") {
  MemoryBank b(3, 2, 0.5, 0.7);
  for (std::size_t i = 0; i < 6; ++i) b.restore_slot(0, i, {double(i), -double(i)});
  b.restore_slot(1, 0, {1, 1});
  b.restore_slot(1, 1, {2, 2});
  auto p = compute_prototypes(b, 3, 0, 4);
  CHECK(p.num_classes == 3);
  CHECK(p.k == 3);
  CHECK(p.epoch == 4);
  CHECK(p.status[0] == PrototypeStatus::Clustered);
  CHECK(p.status[1] == PrototypeStatus::Replicated);
  CHECK(p.status[2] == PrototypeStatus::Empty);
  CHECK(p.prototype(1, 2)[0] == 1.0);  // cyclic replication
  for (double v : p.prototype(2, 0)) CHECK(v == 0.0);
  CHECK(p.flattened().shape() == Shape{9, 2});
  auto again = compute_prototypes(b, 3, 0, 4);
  CHECK(again.values == p.values);
}
