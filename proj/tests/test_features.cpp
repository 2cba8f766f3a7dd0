#include <cmath>

#include "doctest.h"
#include "pni/features.hpp"
#include "pni/random.hpp"

using namespace pni;

namespace {

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Image im(h, w, c);
  Rng rng(seed);
  for (auto& v : im.values()) v = static_cast<float>(rng.uniform());
  return im;
}

FeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  FeatureMap m(c, h, w);
  Rng rng(seed);
  for (auto& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

}  // namespace

TEST_CASE("preprocess sizes") {
  CHECK(preprocess(random_image(90, 90, 3, 1), 512, 480).height() == 480);
  const Image big = preprocess(Image(900, 900, 3, 0.3f), 512, 480);
  CHECK(big.height() == 480);
  CHECK(big.width() == 480);
  CHECK(preprocess(Image(300, 300, 1), 256, 224).width() == 224);
  const Image im = random_image(32, 32, 3, 2);
  CHECK(preprocess(im, 32, 32) == im);
  CHECK_THROWS_AS(preprocess(im, 32, 40), std::invalid_argument);
}

TEST_CASE("toy hierarchy shapes and determinism") {
  const Image im = random_image(64, 64, 3, 5);
  const auto h = extract_toy_hierarchy(im, 7);
  REQUIRE(h.levels.size() == 2);
  CHECK(h.find(2)->map.height() == 16);
  CHECK(h.find(2)->map.width() == 16);
  CHECK(h.find(3)->map.height() == 8);
  CHECK(h.find(3)->map.width() == 8);
  CHECK(extract_toy_hierarchy(im, 7).find(2)->map == h.find(2)->map);
  CHECK_FALSE(extract_toy_hierarchy(im, 8).find(2)->map == h.find(2)->map);
  for (const auto& lvl : h.levels) {
    for (float v : lvl.map.values()) CHECK((std::isfinite(v) && v >= -1.0f && v <= 1.0f));
  }
  CHECK_THROWS_AS(extract_toy_hierarchy(Image(7, 7, 3), 0), std::invalid_argument);
  CHECK(extract_toy_hierarchy(Image(24, 24, 1, 0.5f), 0).find(3)->map.height() == 3);
}

TEST_CASE("one-pixel change only touches cells whose receptive field covers it") {
  const Image base = random_image(32, 40, 3, 11);
  const auto h0 = extract_toy_hierarchy(base, 3);
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Image changed = base;
    const std::size_t py = rng.below(32), px = rng.below(40);
    changed(py, px, rng.below(3)) = 1.0f - changed(py, px, 0) * 0.5f;
    const auto h1 = extract_toy_hierarchy(changed, 3);
    for (std::size_t li = 0; li < 2; ++li) {
      const auto& a = h0.levels[li].map;
      const auto& b = h1.levels[li].map;
      const std::size_t stride = li == 0 ? 4 : 8;
      for (std::size_t y = 0; y < a.height(); ++y) {
        for (std::size_t x = 0; x < a.width(); ++x) {
          // Brute-force receptive field: the pixels of the cell's block.
          bool covers = false;
          for (std::size_t yy = y * stride; yy < (y + 1) * stride; ++yy) {
            for (std::size_t xx = x * stride; xx < (x + 1) * stride; ++xx) covers |= (yy == py && xx == px);
          }
          bool same = true;
          for (std::size_t c = 0; c < a.channels(); ++c) same &= a(c, y, x) == b(c, y, x);
          if (!covers) CHECK(same);
        }
      }
    }
  }
}

TEST_CASE("merge_hierarchy shapes") {
  FeatureHierarchy h;
  h.levels.push_back({2, random_map(8, 16, 16, 1)});
  h.levels.push_back({3, random_map(16, 8, 8, 2)});
  const FeatureMap m = merge_hierarchy(h);
  CHECK(m.channels() == 24);
  CHECK(m.height() == 16);
  CHECK(m.width() == 16);
  for (std::size_t c = 0; c < 8; ++c) CHECK(m(c, 5, 7) == h.levels[0].map(c, 5, 7));

  FeatureHierarchy eq;
  eq.levels.push_back({2, random_map(3, 6, 5, 3)});
  eq.levels.push_back({3, random_map(2, 6, 5, 4)});
  const FeatureMap e = merge_hierarchy(eq);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 5; ++x) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(e(c, y, x) == eq.levels[0].map(c, y, x));
      for (std::size_t c = 0; c < 2; ++c) CHECK(e(3 + c, y, x) == eq.levels[1].map(c, y, x));
    }
  }

  FeatureHierarchy k;
  k.levels.push_back({2, FeatureMap(2, 12, 12, 0.25f)});
  k.levels.push_back({3, FeatureMap(3, 5, 7, -0.5f)});
  const FeatureMap km = merge_hierarchy(k);
  CHECK(km.height() == 12);
  CHECK(km.width() == 12);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 12; ++x) {
      CHECK(km(1, y, x) == 0.25f);
      CHECK(km(4, y, x) == -0.5f);
    }
  }
  const int one[] = {2};
  CHECK(merge_hierarchy(k, one) == k.levels[0].map);
  FeatureHierarchy single;
  single.levels.push_back({2, FeatureMap(2, 4, 4)});
  CHECK_THROWS_AS(merge_hierarchy(single), std::invalid_argument);
  const int missing[] = {2, 4};
  CHECK_THROWS(merge_hierarchy(k, missing));
}

TEST_CASE("aggregate_patches") {
  const FeatureMap m = random_map(6, 7, 9, 21);
  CHECK(aggregate_patches(m, 1, 6) == m);
  CHECK_THROWS_AS(aggregate_patches(m, 2, 6), std::invalid_argument);

  const FeatureMap k(4, 5, 5, 0.75f);
  const FeatureMap ka = aggregate_patches(k, 3, 2);
  for (float v : ka.values()) CHECK(v == doctest::Approx(0.75f).epsilon(1e-7));

  FeatureMap s(1, 3, 3);
  double sum = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    s.values()[i] = static_cast<float>(i * i) * 0.1f;
    sum += s.values()[i];
  }
  CHECK(aggregate_patches(s, 3, 1)(0, 1, 1) == doctest::Approx(sum / 9.0));
  // Corner uses the clipped 2x2 window.
  CHECK(aggregate_patches(s, 3, 1)(0, 0, 0) ==
        doctest::Approx((s(0, 0, 0) + s(0, 0, 1) + s(0, 1, 0) + s(0, 1, 1)) / 4.0));
}

TEST_CASE("channel pooling bins") {
  FeatureMap m(4, 1, 1);
  m.values() = {1, 2, 3, 4};
  const FeatureMap two = aggregate_patches(m, 1, 2);
  CHECK(two.values() == std::vector<float>{1.5f, 3.5f});
  const FeatureMap three = aggregate_patches(m, 1, 3);
  CHECK(three.values() == std::vector<float>{1.5f, 2.5f, 3.5f});
  const FeatureMap eight = aggregate_patches(m, 1, 8);
  CHECK(eight.values() == std::vector<float>{1, 1, 2, 2, 3, 3, 4, 4});
}

TEST_CASE("aggregation is translation-equivariant on the interior") {
  const FeatureMap m = random_map(3, 10, 12, 31);
  FeatureMap shifted(3, 10, 12);
  for (std::size_t y = 0; y < 10; ++y) {
    for (std::size_t x = 1; x < 12; ++x) {
      for (std::size_t c = 0; c < 3; ++c) shifted(c, y, x) = m(c, y, x - 1);
    }
  }
  const FeatureMap a = aggregate_patches(m, 3, 2);
  const FeatureMap b = aggregate_patches(shifted, 3, 2);
  for (std::size_t y = 1; y + 1 < 10; ++y) {
    for (std::size_t x = 2; x + 1 < 12; ++x) {
      for (std::size_t c = 0; c < 2; ++c) CHECK(b(c, y, x) == doctest::Approx(a(c, y, x - 1)).epsilon(1e-6));
    }
  }
}
