#include "pni/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pni/random.hpp"
#include "pni/resample.hpp"

namespace pni {

std::vector<float> resize_bilinear(const float* src, std::size_t in_h, std::size_t in_w, std::size_t channels,
                                   std::size_t out_h, std::size_t out_w) {
  if (in_h == 0 || in_w == 0 || out_h == 0 || out_w == 0) {
    throw std::invalid_argument("bilinear resize requires non-empty input and output");
  }
  struct Tap {
    std::size_t i0, i1;
    float w;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, static_cast<float>(s - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);
  std::vector<float> out(out_h * out_w * channels);
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* r0 = src + ty[y].i0 * in_w * channels;
    const float* r1 = src + ty[y].i1 * in_w * channels;
    const float wy = ty[y].w;
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t a = tx[x].i0 * channels;
      const std::size_t b = tx[x].i1 * channels;
      const float wx = tx[x].w;
      float* dst = out.data() + (y * out_w + x) * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        // v0 + w * (v1 - v0) keeps constants exact.
        const float top = r0[a + c] + wx * (r0[b + c] - r0[a + c]);
        const float bottom = r1[a + c] + wx * (r1[b + c] - r1[a + c]);
        dst[c] = top + wy * (bottom - top);
      }
    }
  }
  return out;
}

const HierarchyLevel* FeatureHierarchy::find(int level) const {
  for (const auto& l : levels) {
    if (l.level == level) return &l;
  }
  return nullptr;
}

Image preprocess(const Image& image, std::size_t resize_to, std::size_t crop_to) {
  if (crop_to > resize_to) {
    throw std::invalid_argument("crop size " + std::to_string(crop_to) + " exceeds resize size " +
                                std::to_string(resize_to));
  }
  if (crop_to == 0) {
    throw std::invalid_argument("crop size must be positive");
  }
  const auto resized = resize_bilinear(image.values().data(), image.height(), image.width(), image.channels(),
                                       resize_to, resize_to);
  const std::size_t off = (resize_to - crop_to) / 2;
  Image out(crop_to, crop_to, image.channels());
  for (std::size_t y = 0; y < crop_to; ++y) {
    const float* row = resized.data() + ((y + off) * resize_to + off) * image.channels();
    std::copy(row, row + crop_to * image.channels(), out.values().data() + y * crop_to * image.channels());
  }
  return out;
}

ToyExtractor::ToyExtractor(std::uint64_t seed, ToyExtractorOptions options) : seed_(seed), options_(options) {
  const std::size_t strides[2] = {kLevel2Stride, kLevel3Stride};
  const std::size_t outs[2] = {options.level2_channels, options.level3_channels};
  for (std::size_t level = 0; level < 2; ++level) {
    for (std::size_t rgb = 0; rgb < 2; ++rgb) {
      Projection& p = projections_[level][rgb];
      p.stride = strides[level];
      p.in_channels = rgb ? 3 : 1;
      p.out_channels = outs[level];
      const std::size_t fan_in = 4 * p.in_channels;
      Rng rng(derive_seed(seed_, 100 + 10 * level + rgb));
      const double gain = 2.0 / std::sqrt(static_cast<double>(fan_in));
      p.weights.resize(p.out_channels * fan_in);
      for (auto& w : p.weights) w = static_cast<float>(gain * rng.normal());
      p.bias.resize(p.out_channels);
      for (auto& b : p.bias) b = static_cast<float>(0.1 * rng.normal());
    }
  }
}

const ToyExtractor::Projection& ToyExtractor::projection_for(std::size_t level_index,
                                                             std::size_t image_channels) const {
  return projections_[level_index][image_channels == 3 ? 1 : 0];
}

FeatureMap ToyExtractor::run_level(const Image& image, const Projection& proj) const {
  const std::size_t s = proj.stride;
  const std::size_t half = s / 2;
  const std::size_t h = image.height() / s;
  const std::size_t w = image.width() / s;
  const std::size_t ch = image.channels();
  const std::size_t fan_in = 4 * ch;
  FeatureMap out(proj.out_channels, h, w);
  std::vector<float> input(fan_in);
  const float inv_area = 1.0f / static_cast<float>(half * half);
  for (std::size_t cy = 0; cy < h; ++cy) {
    for (std::size_t cx = 0; cx < w; ++cx) {
      // 2x2 sub-block means, ordered (sub-row, sub-col, channel).
      for (std::size_t sb = 0; sb < 4; ++sb) {
        const std::size_t y0 = cy * s + (sb / 2) * half;
        const std::size_t x0 = cx * s + (sb % 2) * half;
        for (std::size_t c = 0; c < ch; ++c) {
          float sum = 0.0f;
          for (std::size_t y = y0; y < y0 + half; ++y) {
            for (std::size_t x = x0; x < x0 + half; ++x) sum += image(y, x, c);
          }
          input[sb * ch + c] = sum * inv_area - 0.5f;
        }
      }
      float* dst = out.at(cy, cx);
      for (std::size_t o = 0; o < proj.out_channels; ++o) {
        float acc = proj.bias[o];
        const float* wrow = proj.weights.data() + o * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) acc += wrow[i] * input[i];
        dst[o] = std::clamp(acc, -1.0f, 1.0f);
      }
    }
  }
  return out;
}

FeatureHierarchy ToyExtractor::extract(const Image& image) const {
  if (image.height() < kLevel3Stride || image.width() < kLevel3Stride) {
    throw std::invalid_argument("image smaller than one stride cell (" + std::to_string(kLevel3Stride) + " px)");
  }
  FeatureHierarchy hierarchy;
  hierarchy.levels.push_back({2, run_level(image, projection_for(0, image.channels()))});
  hierarchy.levels.push_back({3, run_level(image, projection_for(1, image.channels()))});
  return hierarchy;
}

FeatureHierarchy extract_toy_hierarchy(const Image& image, std::uint64_t seed) {
  return ToyExtractor(seed).extract(image);
}

FeatureMap resize_feature_map(const FeatureMap& map, std::size_t out_h, std::size_t out_w) {
  if (map.height() == out_h && map.width() == out_w) return map;
  FeatureMap out(map.channels(), out_h, out_w);
  out.values() = resize_bilinear(map.values().data(), map.height(), map.width(), map.channels(), out_h, out_w);
  return out;
}

FeatureMap merge_hierarchy(const FeatureHierarchy& hierarchy, std::span<const int> use_levels) {
  if (hierarchy.levels.size() < 2 || use_levels.empty()) {
    throw std::invalid_argument("mismatched level count: hierarchy has " +
                                std::to_string(hierarchy.levels.size()) + " levels");
  }
  std::vector<const FeatureMap*> maps;
  std::size_t out_h = 0, out_w = 0, channels = 0;
  for (int level : use_levels) {
    const HierarchyLevel* l = hierarchy.find(level);
    if (l == nullptr) {
      throw std::invalid_argument("mismatched level count: level " + std::to_string(level) + " not present");
    }
    maps.push_back(&l->map);
    out_h = std::max(out_h, l->map.height());
    out_w = std::max(out_w, l->map.width());
    channels += l->map.channels();
  }
  FeatureMap merged(channels, out_h, out_w);
  std::size_t offset = 0;
  for (const FeatureMap* m : maps) {
    const FeatureMap resized = resize_feature_map(*m, out_h, out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        std::copy_n(resized.at(y, x), resized.channels(), merged.at(y, x) + offset);
      }
    }
    offset += m->channels();
  }
  return merged;
}

FeatureMap merge_hierarchy(const FeatureHierarchy& hierarchy) {
  static constexpr int kDefaultLevels[] = {2, 3};
  return merge_hierarchy(hierarchy, kDefaultLevels);
}

FeatureMap aggregate_patches(const FeatureMap& map, std::size_t agg_patch, std::size_t d) {
  if (agg_patch % 2 == 0) {
    throw std::invalid_argument("aggregation patch size must be odd, got " + std::to_string(agg_patch));
  }
  if (d == 0 || map.channels() == 0) {
    throw std::invalid_argument("aggregation output dimension must be positive");
  }
  const std::size_t c_in = map.channels();
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  const auto r = static_cast<std::ptrdiff_t>(agg_patch / 2);

  std::vector<std::size_t> bin_lo(d), bin_hi(d);
  for (std::size_t k = 0; k < d; ++k) {
    bin_lo[k] = (k * c_in) / d;
    bin_hi[k] = ((k + 1) * c_in + d - 1) / d;
  }

  FeatureMap out(d, h, w);
  std::vector<double> acc(c_in);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      std::size_t count = 0;
      const auto yc = static_cast<std::ptrdiff_t>(y);
      const auto xc = static_cast<std::ptrdiff_t>(x);
      for (std::ptrdiff_t yy = std::max<std::ptrdiff_t>(0, yc - r);
           yy <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, yc + r); ++yy) {
        for (std::ptrdiff_t xx = std::max<std::ptrdiff_t>(0, xc - r);
             xx <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, xc + r); ++xx) {
          const float* v = map.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
          for (std::size_t c = 0; c < c_in; ++c) acc[c] += v[c];
          ++count;
        }
      }
      float* dst = out.at(y, x);
      for (std::size_t k = 0; k < d; ++k) {
        double sum = 0.0;
        for (std::size_t c = bin_lo[k]; c < bin_hi[k]; ++c) sum += acc[c];
        dst[k] = static_cast<float>(sum / (static_cast<double>(count) * static_cast<double>(bin_hi[k] - bin_lo[k])));
      }
    }
  }
  return out;
}

}  // namespace pni
