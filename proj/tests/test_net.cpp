#include <doctest.h>

#include <cmath>

#include "rca/net.hpp"
#include "rca/ops.hpp"
#include "rca/rng.hpp"
#include "rca/synthdata.hpp"

using namespace rca;

TEST_CASE("feature extractor") {
  ModelParams p = init_model(kNumClasses, 8, 7);
  Tape tape;
  SUBCASE("shape is D x 16 x 16") {
    auto f = forward_features(tape, generate_sample(0, 1, Split::Train).input.to_tensor(), p.backbone);
    CHECK(f.shape() == Shape{8, 16, 16});
  }
  SUBCASE("zero image and zero kernels give zero features") {
    ModelParams z = p.clone();
    for (const auto& t : z.backbone_tensors())
      for (auto& v : t.values_mut()) v = 0.0;
    auto f = forward_features(tape, Tensor::zeros({3, 32, 32}), z.backbone);
    for (double v : f.values()) CHECK(v == 0.0);
  }
  SUBCASE("fixed seed is bit-identical across runs") {
    auto img = generate_sample(3, 7, Split::Train).input.to_tensor();
    ModelParams q = init_model(kNumClasses, 8, 7);
    auto a = forward_features(tape, img, p.backbone);
    auto b = forward_features(tape, img, q.backbone);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }
  SUBCASE("rejects wrong image shapes") {
    CHECK_THROWS(forward_features(tape, Tensor::zeros({3, 16, 16}), p.backbone));
    CHECK_THROWS(forward_features(tape, Tensor::zeros({1, 32, 32}), p.backbone));
  }
}

TEST_CASE("cam head") {
  Tape tape;
  Rng rng = make_rng(11, 0);
  std::vector<double> fv(4 * 3 * 3);
  for (auto& v : fv) v = uniform(rng, -1, 1);
  auto F = Tensor::from({4, 3, 3}, fv);

  SUBCASE("zero weight gives zero map") {
    auto P = forward_cam(tape, F, CamHeadParams{Tensor::zeros({2, 4})});
    for (double v : P.values()) CHECK(v == 0.0);
  }
  SUBCASE("one-hot row selects a channel") {
    auto w = Tensor::zeros({2, 4});
    w.values_mut()[1 * 4 + 2] = 1.0;
    auto P = forward_cam(tape, F, CamHeadParams{w});
    for (std::size_t i = 0; i < 9; ++i) CHECK(P.values()[9 + i] == fv[2 * 9 + i]);
  }
  SUBCASE("random head against per-pixel dot products") {
    std::vector<double> wv(3 * 4);
    for (auto& v : wv) v = uniform(rng, -1, 1);
    auto P = forward_cam(tape, F, CamHeadParams{Tensor::from({3, 4}, wv)});
    REQUIRE(P.shape() == Shape{3, 3, 3});
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t i = 0; i < 9; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += wv[l * 4 + c] * fv[c * 9 + i];
        CHECK(std::abs(P.values()[l * 9 + i] - s) <= 1e-10);
      }
  }
  SUBCASE("channel mismatch is rejected") { CHECK_THROWS(forward_cam(tape, F, CamHeadParams{Tensor::zeros({2, 5})})); }
}

TEST_CASE("scores and multilabel loss") {
  Tape tape;
  auto P = Tensor::from({2, 1, 2}, {1, 3, -2, 0});
  auto s = classification_scores(tape, P);
  CHECK(s.values()[0] == 2.0);
  CHECK(s.values()[1] == -1.0);
  const std::uint8_t y[] = {1, 0};
  // Mean over classes of softplus(-s) for positives and softplus(s) for negatives.
  const double expected = 0.5 * (std::log1p(std::exp(-2.0)) + std::log1p(std::exp(-1.0)));
  CHECK(multilabel_loss(tape, s, y).item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("init and clone") {
  ModelParams p = init_model(6, 32, 0);
  CHECK(p.backbone.conv1.shape() == Shape{kConv1Channels, 3, 3, 3});
  CHECK(p.backbone.conv2.shape() == Shape{32, kConv1Channels, 3, 3});
  CHECK(p.head_o.weight.shape() == Shape{6, 64});
  ModelParams c = p.clone();
  CHECK_FALSE(c.backbone.conv1.same_storage(p.backbone.conv1));
  c.backbone.conv1.values_mut()[0] += 1.0;
  CHECK(c.backbone.conv1.values()[0] != p.backbone.conv1.values()[0]);
}
