#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <xrdseg/nn.hpp>
#include <xrdseg/optim.hpp>
#include <xrdseg/synth.hpp>
#include <xrdseg/unet.hpp>

#include "oracles.hpp"

using namespace xrdseg;

TEST_CASE("parameter counts pin the architecture (c_b=8, r=2)") {
  const long expected[] = {6562, 29650, 121394, 487154};
  for (int d = 2; d <= 5; ++d) {
    UNetConfig cfg;
    cfg.depth = d;
    cfg.base_channels = 8;
    cfg.growth_rate = 2.0;
    auto model = build_unet<float>(cfg);
    CHECK(count_parameters(model) == expected[d - 2]);
    CHECK(count_parameters(model) == expected[d - 2]);  // counting is stable
  }
}

TEST_CASE("parameter count cross-check against a per-layer hand count") {
  // d=2, c_b=1, r=2, in=1, classes=2; channels are [1, 2]:
  //   enc1: 3*3*1*1+1 =10, bn 2, 3*3*1*1+1 =10, bn 2            -> 24
  //   enc2: 3*3*1*2+2 =20, bn 4, 3*3*2*2+2 =38, bn 4            -> 66
  //   up:   2*2*2*1+1                                            -> 9
  //   dec1: 3*3*2*1+1 =19, bn 2, 3*3*1*1+1 =10, bn 2            -> 33
  //   head: 1*1*1*2+2                                            -> 4
  UNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 1;
  cfg.growth_rate = 2.0;
  auto model = build_unet<float>(cfg);
  CHECK(count_parameters(model) == 24 + 66 + 9 + 33 + 4);
}

TEST_CASE("non-integer growth rates round half up per level") {
  UNetConfig cfg;
  cfg.depth = 4;
  cfg.base_channels = 5;
  cfg.growth_rate = 1.5;
  CHECK(unet_level_channels(cfg, 1) == 5);
  CHECK(unet_level_channels(cfg, 2) == 8);   // 7.5 rounds up
  CHECK(unet_level_channels(cfg, 3) == 11);  // 11.25
  CHECK(unet_level_channels(cfg, 4) == 17);  // 16.875
  CHECK_NOTHROW(build_unet<float>(cfg));
}

TEST_CASE("forward preserves spatial shape and is deterministic in eval mode") {
  UNetConfig cfg;
  cfg.depth = 4;
  cfg.base_channels = 8;
  cfg.seed = 99;
  auto model = build_unet<float>(cfg);

  Tensor<float> x = Tensor<float>::zeros({1, 1, 256, 256});
  Rng rng(5);
  for (Index i = 0; i < x.numel(); ++i) {
    x.mutable_values()[i] = float(rng.uniform(0, 2));
  }
  Tensor<float> logits = unet_forward(model, x, false);
  CHECK(logits.shape() == Shape4{1, 2, 256, 256});

  Tensor<float> again = unet_forward(model, x, false);
  for (Index i = 0; i < logits.numel(); ++i) {
    CHECK(logits.values()[i] == again.values()[i]);
  }
}

TEST_CASE("forward handles the paper batch size at a small tile") {
  UNetConfig cfg;
  cfg.depth = 3;
  cfg.base_channels = 4;
  auto model = build_unet<float>(cfg);
  Tensor<float> x = Tensor<float>::full({50, 1, 16, 16}, 1.0f);
  CHECK(unet_forward(model, x, false).shape() == Shape4{50, 2, 16, 16});
}

TEST_CASE("eval-mode logits are independent of batch composition") {
  UNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  cfg.seed = 3;
  auto model = build_unet<float>(cfg);
  Rng rng(8);
  Tensor<float> pair = Tensor<float>::zeros({2, 1, 16, 16});
  for (Index i = 0; i < pair.numel(); ++i) {
    pair.mutable_values()[i] = float(rng.uniform(0, 1));
  }
  Tensor<float> solo = Tensor<float>::zeros({1, 1, 16, 16});
  for (Index i = 0; i < solo.numel(); ++i) {
    solo.mutable_values()[i] = pair.values()[i];
  }
  Tensor<float> yp = unet_forward(model, pair, false);
  Tensor<float> ys = unet_forward(model, solo, false);
  for (Index c = 0; c < 2; ++c)
    for (Index r = 0; r < 16; ++r)
      for (Index w = 0; w < 16; ++w) CHECK(yp(0, c, r, w) == ys(0, c, r, w));
}

TEST_CASE("tile divisibility is validated with the required multiple") {
  UNetConfig cfg;
  cfg.depth = 4;
  auto model = build_unet<float>(cfg);
  Tensor<float> x = Tensor<float>::zeros({1, 1, 100, 100});
  CHECK_THROWS_WITH_AS(unet_forward(model, x, false), doctest::Contains("multiple of 8"),
                       ConfigError);
  CHECK_THROWS_AS(validate_tile_size(cfg, 100), ConfigError);
  CHECK_NOTHROW(validate_tile_size(cfg, 128));
}

TEST_CASE("config validation rejects degenerate settings") {
  UNetConfig cfg;
  cfg.depth = 1;
  CHECK_THROWS_AS(validate_unet_config(cfg), ConfigError);
  cfg.depth = 2;
  cfg.growth_rate = 1.0;
  CHECK_THROWS_AS(validate_unet_config(cfg), ConfigError);
  cfg.growth_rate = 1.01;  // rounds to non-increasing channels
  cfg.base_channels = 2;
  CHECK_THROWS_AS(validate_unet_config(cfg), ConfigError);
}

TEST_CASE("predict_mask: argmax semantics with ties to the background class") {
  Tensor<float> logits = Tensor<float>::zeros({1, 2, 4, 4});
  LabelMap all_zero = argmax_classes(logits);  // equal logits -> class 0
  for (auto v : all_zero.values) CHECK(v == 0);

  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) logits.at(0, 1, r, c) = 0.5f;
  LabelMap all_one = argmax_classes(logits);
  for (auto v : all_one.values) CHECK(v == 1);
}

TEST_CASE("overfitting one labeled tile reaches near-perfect recall") {
  // a small ring+spot scene stands in for a labeled training tile
  SceneSpec spec;
  spec.geometry.height = 32;
  spec.geometry.width = 32;
  spec.geometry.center_row = 15.5;
  spec.geometry.center_col = 15.5;
  spec.rings.push_back({two_theta_deg_at(spec.geometry, 15.5, 26.0), 100.0, 2.0, 0.0, 0.0});
  spec.spots.push_back({0, 0.6, 1200.0, 2.5});
  spec.noise.kind = NoiseSpec::Kind::None;
  RenderedScene scene = render(spec);
  REQUIRE(scene.mask.cast<long>().sum() > 0);

  UNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  cfg.seed = 21;
  auto model = build_unet<float>(cfg);
  auto params = model.parameters();
  auto adam = AdamState<float>::create(params, 1e-2);

  Tensor<float> x = Tensor<float>::zeros({1, 1, 32, 32});
  const float scale = 1.0f / scene.image.mean();
  LabelMap labels = LabelMap::zeros(1, 32, 32);
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c) {
      x.at(0, 0, r, c) = scene.image(r, c) * scale;
      labels.at(0, r, c) = scene.mask(r, c);
    }

  for (int epoch = 0; epoch < 150; ++epoch) {
    Tensor<float> logits = unet_forward(model, x, true);
    Tensor<float> loss = softmax_cross_entropy(logits, labels);
    REQUIRE(std::isfinite(double(loss.values()[0])));
    model.zero_grad();
    loss.backward();
    adam_step(params, adam);
  }

  MaskU8 predicted = predict_mask(model, x);
  long tp = 0, fn = 0;
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c) {
      if (scene.mask(r, c)) {
        if (predicted(r, c)) ++tp;
        else ++fn;
      }
    }
  const double recall = double(tp) / double(tp + fn);
  CHECK(recall >= 0.99);
}
