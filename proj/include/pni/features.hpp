#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pni/tensor.hpp"

namespace pni {

struct HierarchyLevel {
  int level = 0;  // backbone block index, e.g. 2 or 3
  FeatureMap map;
};

// Per-image multi-level features; spatial size is non-increasing with level.
struct FeatureHierarchy {
  std::vector<HierarchyLevel> levels;

  const HierarchyLevel* find(int level) const;
};

// Bilinear resize to resize_to x resize_to followed by a centered
// crop_to x crop_to crop.
Image preprocess(const Image& image, std::size_t resize_to, std::size_t crop_to);

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual FeatureHierarchy extract(const Image& image) const = 0;
};

struct ToyExtractorOptions {
  std::size_t level2_channels = 16;
  std::size_t level3_channels = 16;
};

/**
 * Deterministic stand-in for a pretrained backbone. Level 2 has stride 4 and
 * level 3 stride 8; each output cell sees exactly its own stride x stride
 * pixel block. The block is reduced to 2x2 sub-block means per input channel,
 * centered, passed through a seeded random projection and clamped to [-1, 1].
 */
class ToyExtractor final : public FeatureExtractor {
 public:
  explicit ToyExtractor(std::uint64_t seed, ToyExtractorOptions options = {});

  std::string name() const override { return "toy"; }
  FeatureHierarchy extract(const Image& image) const override;

  static constexpr std::size_t kLevel2Stride = 4;
  static constexpr std::size_t kLevel3Stride = 8;

 private:
  struct Projection {
    std::size_t stride = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<float> weights;  // out x (4 * in_channels)
    std::vector<float> bias;
  };

  const Projection& projection_for(std::size_t level_index, std::size_t image_channels) const;
  FeatureMap run_level(const Image& image, const Projection& proj) const;

  std::uint64_t seed_;
  ToyExtractorOptions options_;
  // Indexed [level][image channels == 3].
  Projection projections_[2][2];
};

FeatureHierarchy extract_toy_hierarchy(const Image& image, std::uint64_t seed);

FeatureMap resize_feature_map(const FeatureMap& map, std::size_t out_h, std::size_t out_w);

// Resize the requested levels to the componentwise-max spatial size and
// concatenate channels in the order given.
FeatureMap merge_hierarchy(const FeatureHierarchy& hierarchy, std::span<const int> use_levels);
FeatureMap merge_hierarchy(const FeatureHierarchy& hierarchy);

// Average every channel over the clipped agg_patch x agg_patch window around
// each position, then adaptive-average-pool channels down (or up) to d.
FeatureMap aggregate_patches(const FeatureMap& map, std::size_t agg_patch, std::size_t d);

}  // namespace pni
