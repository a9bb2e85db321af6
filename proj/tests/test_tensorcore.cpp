#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rca/gradsuite.hpp"
#include "rca/ops.hpp"
#include "rca/rng.hpp"

using namespace rca;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("factories validate shapes") {
  CHECK_THROWS_AS(Tensor::from({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from({2, 0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
  auto t = Tensor::full({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.values()[5] == 1.5);
  CHECK_FALSE(t.requires_grad());
  CHECK_THROWS(t.item());
}

TEST_CASE("matmul") {
  Tape tape;
  SUBCASE("identity on the left returns b") {
    auto id = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto b = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto c = ops::matmul(tape, id, b);
    CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{1, 2, 3, 4, 5, 6});
  }
  SUBCASE("identity on the right returns a") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto c = ops::matmul(tape, a, Tensor::from({2, 2}, {1, 0, 0, 1}));
    CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{1, 2, 3, 4});
  }
  SUBCASE("random against triple loop") {
    Rng rng = make_rng(1, 0);
    auto av = random_values(rng, 12), bv = random_values(rng, 8);
    auto c = ops::matmul(tape, Tensor::from({3, 4}, av), Tensor::from({4, 2}, bv));
    auto ref = oracle::matmul(av, bv, 3, 4, 2);
    REQUIRE(c.shape() == Shape{3, 2});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(c.values()[i] - ref[i]) <= 1e-12);
  }
  SUBCASE("inner dimension mismatch names both shapes") {
    try {
      ops::matmul(tape, Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("conv2d") {
  Tape tape;
  Rng rng = make_rng(2, 0);
  SUBCASE("zero kernel gives zero output") {
    auto y = ops::conv2d(tape, Tensor::from({2, 5, 5}, random_values(rng, 50)), Tensor::zeros({3, 2, 3, 3}), 1);
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("delta kernel sums input channels") {
    auto xv = random_values(rng, 50);
    std::vector<double> k(2 * 2 * 9, 0.0);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t c = 0; c < 2; ++c) k[((o * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
    auto y = ops::conv2d(tape, Tensor::from({2, 5, 5}, xv), Tensor::from({2, 2, 3, 3}, k), 1);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < 25; ++i) CHECK(y.values()[o * 25 + i] == doctest::Approx(xv[i] + xv[25 + i]).epsilon(1e-14));
  }
  SUBCASE("random input against nested loops, both strides") {
    for (std::size_t stride : {1u, 2u}) {
      auto xv = random_values(rng, 50), kv = random_values(rng, 54);
      auto y = ops::conv2d(tape, Tensor::from({2, 5, 5}, xv), Tensor::from({3, 2, 3, 3}, kv), stride);
      auto ref = oracle::conv2d(xv, 2, 5, 5, kv, 3, stride);
      REQUIRE(y.numel() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.values()[i] - ref[i]) <= 1e-10);
    }
  }
  SUBCASE("rejects unsupported kernels and strides") {
    CHECK_THROWS(ops::conv2d(tape, Tensor::zeros({2, 5, 5}), Tensor::zeros({3, 2, 5, 5}), 1));
    CHECK_THROWS(ops::conv2d(tape, Tensor::zeros({2, 5, 5}), Tensor::zeros({3, 2, 3, 3}), 3));
    CHECK_THROWS(ops::conv2d(tape, Tensor::zeros({1, 5, 5}), Tensor::zeros({3, 2, 3, 3}), 1));
  }
}

TEST_CASE("elementwise and row ops") {
  Tape tape;
  auto s = ops::softmax_rows(tape, Tensor::full({2, 4}, 3.0));
  for (double v : s.values()) CHECK(v == doctest::Approx(0.25));

  auto n = ops::l2_normalize_rows(tape, Tensor::from({1, 2}, {3, 4}));
  CHECK(n.values()[0] == doctest::Approx(0.6));
  CHECK(n.values()[1] == doctest::Approx(0.8));

  std::vector<std::size_t> zero_rows;
  auto z = ops::l2_normalize_rows(tape, Tensor::from({2, 2}, {0, 0, 1, 1}), &zero_rows);
  CHECK(zero_rows == std::vector<std::size_t>{0});
  CHECK(z.values()[0] == 0.0);

  CHECK(ops::sigmoid(tape, Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::sigmoid(tape, Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK(std::isfinite(ops::sigmoid(tape, Tensor::scalar(800.0)).item()));
  CHECK_THROWS(ops::log(tape, Tensor::scalar(0.0)));
  CHECK_THROWS(ops::add(tape, Tensor::zeros({2}), Tensor::zeros({3})));

  // Large logits stay finite in the stable form.
  const double targets[] = {1.0, 0.0};
  auto bce = ops::bce_with_logits(tape, Tensor::from({2}, {-500.0, 500.0}), targets);
  CHECK(bce.item() == doctest::Approx(500.0));
}

TEST_CASE("global average pool") {
  Tape tape;
  auto c = ops::global_average_pool(tape, Tensor::full({3, 4, 4}, 2.5));
  for (double v : c.values()) CHECK(v == doctest::Approx(2.5));
  CHECK(ops::global_average_pool(tape, Tensor::from({1, 2, 2}, {1, 2, 3, 4})).item() == 2.5);

  Rng rng = make_rng(3, 0);
  auto v = random_values(rng, 2 * 3 * 5);
  auto g = ops::global_average_pool(tape, Tensor::from({2, 3, 5}, v));
  for (std::size_t l = 0; l < 2; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < 15; ++i) s += v[l * 15 + i];
    CHECK(std::abs(g.values()[l] - s / 15.0) <= 1e-14);
  }
}

TEST_CASE("backward") {
  SUBCASE("sum gives unit gradient") {
    Tape tape;
    auto x = Tensor::from({2, 3}, {1, -2, 3, 4, 5, -6}, true);
    tape.backward(ops::sum(tape, x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("half squared norm gives x") {
    Tape tape;
    auto x = Tensor::from({4}, {1, -2, 0.5, 3}, true);
    auto loss = ops::scale(tape, ops::sum(tape, ops::mul(tape, x, x)), 0.5);
    tape.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(x.values()[i]));
  }
  SUBCASE("gradients reset between backward calls") {
    auto x = Tensor::from({2}, {1, 2}, true);
    for (int rep = 0; rep < 2; ++rep) {
      Tape tape;
      tape.backward(ops::sum(tape, ops::add(tape, x, x)));
      CHECK(x.grad()[0] == 2.0);
    }
  }
  SUBCASE("invalid losses are rejected") {
    Tape tape;
    auto x = Tensor::from({2}, {1, 2}, true);
    auto y = ops::scale(tape, x, 2.0);
    CHECK_THROWS(tape.backward(y));
    Tape empty;
    CHECK_THROWS(empty.backward(Tensor::scalar(1.0, true)));
  }
}

TEST_CASE("every op passes finite differences") {
  const std::uint64_t seeds[] = {0, 1, 2};
  auto result = run_gradient_suite(seeds, 10);
  for (const auto& c : result.cases) {
    INFO(c.name << " seed " << c.seed);
    CHECK(c.report.max_rel_error < 1e-4);
    CHECK(!c.report.entries.empty());
  }
}
