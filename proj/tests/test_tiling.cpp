#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <xrdseg/rng.hpp>
#include <xrdseg/tiling.hpp>

#include <algorithm>
#include <cmath>

using namespace xrdseg;

namespace {

ImageF random_image(Index h, Index w, Rng& rng) {
  ImageF img(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) img(r, c) = float(rng.uniform(0, 100));
  return img;
}

}  // namespace

TEST_CASE("make_grid reproduces the full-detector tile count") {
  TileGrid g = make_grid(2880, 2880, 128, 64);
  CHECK(g.row_origins.size() == 44);
  CHECK(g.col_origins.size() == 44);
  CHECK(g.tile_count() == 1936);
}

TEST_CASE("make_grid: exact-fit and clamped final origins") {
  TileGrid one = make_grid(256, 256, 256, 64);
  CHECK(one.tile_count() == 1);
  CHECK(one.row_origins == std::vector<Index>{0});

  // 10x10 image, window 4, step 3: 6 lands exactly at L-S
  TileGrid g = make_grid(10, 10, 4, 3);
  CHECK(g.row_origins == std::vector<Index>{0, 3, 6});
  CHECK(g.col_origins == std::vector<Index>{0, 3, 6});
  CHECK(g.tile_count() == 9);

  // clamped: L-S=6, step 4 gives 0,4 then 8 clamps to 6
  TileGrid c = make_grid(10, 10, 4, 4);
  CHECK(c.row_origins == std::vector<Index>{0, 4, 6});
}

TEST_CASE("make_grid validates its inputs") {
  CHECK_THROWS_AS(make_grid(100, 100, 128, 64), ConfigError);
  CHECK_THROWS_AS(make_grid(100, 100, 48, 24), ConfigError);  // not a power of two
  CHECK_THROWS_AS(make_grid(100, 100, 32, 0), ConfigError);
  CHECK_THROWS_AS(make_grid(100, 100, 32, 33), ConfigError);
}

TEST_CASE("crop matches direct slicing and keeps grid order") {
  Rng rng(3);
  ImageF img = random_image(20, 12, rng);
  TileGrid g = make_grid(20, 12, 8, 5);
  const auto tiles = crop_tiles(img, g);
  REQUIRE(Index(tiles.size()) == g.tile_count());
  for (Index t = 0; t < g.tile_count(); ++t) {
    const auto [r0, c0] = g.origin(t);
    for (Index r = 0; r < 8; ++r)
      for (Index c = 0; c < 8; ++c) CHECK(tiles[t](r, c) == img(r0 + r, c0 + c));
  }

  ImageF constant = ImageF::Constant(16, 16, 4.5f);
  for (const ImageF& t : crop_tiles(constant, make_grid(16, 16, 8, 4))) {
    CHECK((t == 4.5f).all());
  }

  ImageF wrong(10, 10);
  CHECK_THROWS_AS(crop_tiles(wrong, g), DataError);
}

TEST_CASE("crop_labeled computes labeled fractions") {
  ImageF img = ImageF::Zero(8, 8);
  MaskU8 labels = MaskU8::Zero(8, 8);
  labels.block(0, 0, 2, 4).setConstant(1);  // 8 of 16 pixels in tile (0,0)
  TileGrid g = make_grid(8, 8, 4, 4);
  const auto tiles = crop_labeled(img, labels, g, "img0");
  REQUIRE(tiles.size() == 4);
  CHECK(tiles[0].labeled_fraction == doctest::Approx(0.5));
  CHECK(tiles[1].labeled_fraction == doctest::Approx(0.0));
  CHECK(tiles[0].source_id == "img0");

  MaskU8 zero = MaskU8::Zero(8, 8);
  for (const auto& t : crop_labeled(img, zero, g, "z")) {
    CHECK(t.labeled_fraction == 0.0);
  }

  MaskU8 bad = MaskU8::Zero(8, 6);
  CHECK_THROWS_AS(crop_labeled(img, bad, g, "bad"), DataError);
}

TEST_CASE("stitch(crop(x)) is the identity over randomized grids") {
  Rng rng(17);
  const Index windows[] = {4, 8, 16, 32};
  for (int trial = 0; trial < 40; ++trial) {
    const Index window = windows[rng.uniform_index(4)];
    const Index h = window + Index(rng.uniform_index(40));
    const Index w = window + Index(rng.uniform_index(40));
    const Index step = 1 + Index(rng.uniform_index(std::uint64_t(window)));
    CAPTURE(h);
    CAPTURE(w);
    CAPTURE(window);
    CAPTURE(step);
    ImageF img = random_image(h, w, rng);
    TileGrid g = make_grid(h, w, window, step);
    ImageF back = stitch_tiles(crop_tiles(img, g), g);
    CHECK((back == img).all());
  }
}

TEST_CASE("stitch resolves overlap conflicts by nearest tile center") {
  // two half-overlapping tiles along the column axis: origins 0 and 2,
  // window 4 on a 6-pixel row; centers sit at columns 2 and 4
  TileGrid g = make_grid(4, 6, 4, 2);
  REQUIRE(g.col_origins == std::vector<Index>{0, 2});
  std::vector<ImageF> tiles{ImageF::Constant(4, 4, 0.0f), ImageF::Constant(4, 4, 1.0f)};
  ImageF out = stitch_tiles(tiles, g);
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 0; c < 6; ++c) {
      const float expected = c <= 2 ? 0.0f : 1.0f;
      CHECK(out(r, c) == expected);
    }
  }
}

TEST_CASE("stitch with a single-tile grid is the identity") {
  Rng rng(23);
  ImageF img = random_image(16, 16, rng);
  TileGrid g = make_grid(16, 16, 16, 8);
  ImageF out = stitch_tiles(std::vector<ImageF>{img}, g);
  CHECK((out == img).all());
}

TEST_CASE("stitch rejects a wrong tile count") {
  TileGrid g = make_grid(8, 8, 4, 4);
  std::vector<ImageF> three(3, ImageF::Zero(4, 4));
  CHECK_THROWS_AS(stitch_tiles(three, g), DataError);
}

TEST_CASE("augment produces the six variants with matching label transforms") {
  Rng rng(29);
  ImageF img = random_image(12, 12, rng);
  MaskU8 labels = MaskU8::Zero(12, 12);
  labels(2, 5) = 1;
  labels(7, 1) = 1;

  const auto variants = augment(img, labels);
  REQUIRE(variants.size() == 6);

  const double frac = labels.cast<double>().mean();
  std::vector<float> base(img.data(), img.data() + img.size());
  std::sort(base.begin(), base.end());
  for (const auto& [vi, vl] : variants) {
    CHECK(vl.cast<double>().mean() == doctest::Approx(frac));  // fraction preserved
    std::vector<float> vals(vi.data(), vi.data() + vi.size());
    std::sort(vals.begin(), vals.end());
    CHECK(vals == base);  // multiset of pixel values preserved
  }
}

TEST_CASE("rot90 twice equals rot180; marker obeys the index map") {
  Rng rng(31);
  ImageF img = random_image(9, 9, rng);
  ImageF twice = apply_augmentation(apply_augmentation(img, Augmentation::Rot90),
                                    Augmentation::Rot90);
  ImageF r180 = apply_augmentation(img, Augmentation::Rot180);
  CHECK((twice == r180).all());

  // source (r,c) lands at (c, H-1-r) under the counter-clockwise rot90
  MaskU8 marker = MaskU8::Zero(3, 3);
  marker(0, 1) = 1;
  MaskU8 rotated = apply_augmentation(marker, Augmentation::Rot90);
  CHECK(rotated(1, 2) == 1);
  CHECK(rotated.cast<long>().sum() == 1);
}

TEST_CASE("rotationally symmetric images are augmentation fixed points") {
  const Index n = 16;
  ImageF ring(n, n);
  const double center = double(n - 1) / 2.0;
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const double dr = r - center, dc = c - center;
      const double rho = std::sqrt(dr * dr + dc * dc);
      ring(r, c) = float(std::exp(-(rho - 5.0) * (rho - 5.0) / 4.0));
    }
  }
  MaskU8 empty = MaskU8::Zero(n, n);
  for (const auto& [vi, vl] : augment(ring, empty)) {
    CHECK((vi == ring).all());
  }
}

TEST_CASE("rotations reject non-square inputs") {
  ImageF rect = ImageF::Zero(4, 6);
  CHECK_THROWS_AS(apply_augmentation(rect, Augmentation::Rot90), DataError);
  MaskU8 labels = MaskU8::Zero(4, 6);
  CHECK_THROWS_AS(augment(rect, labels), DataError);
  // flips are shape-safe
  CHECK_NOTHROW(apply_augmentation(rect, Augmentation::FlipAxis0));
}
