#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pni/random.hpp"
#include "pni/tensor.hpp"

namespace pni {

/**
 * Hand-drawn-looking defect mask: the union of n randomly placed blobs, n
 * drawn from [n_patterns.first, n_patterns.second]. Each blob is a closed
 * polygon whose radius follows a smoothed random walk around the circle,
 * rescaled so its diameter is scale * min(height, width) with scale drawn
 * from [scale.first, scale.second], then rasterized at pixel centers.
 * Values are exactly 0 or 1 and at least one pixel is set.
 */
Map2D generate_defect_mask(Rng& rng, std::size_t height, std::size_t width,
                           std::pair<std::size_t, std::size_t> n_patterns, std::pair<double, double> scale);

// (1 - A) * clean + A * defect, per channel.
Image composite_anomaly(const Image& clean, const Image& defect, const Map2D& mask);

struct RefineLoss {
  double reg = 0.0;
  double grad = 0.0;
  double total = 0.0;
};

// reg = ||refined - target|| / (HW); grad adds the same norm over vertical
// and horizontal forward differences (last row / column difference is 0).
RefineLoss refine_loss(const Map2D& refined, const Map2D& target);

// (x - lo) / (hi - lo) clamped to [0, 1].
Map2D normalize_map(const Map2D& map, double lo, double hi);

// (1 - ratio) * a_hat + ratio * a_tilde.
std::vector<double> fuse_refined(std::span<const double> a_hat, std::span<const double> a_tilde, double ratio);
Map2D fuse_refined(const Map2D& a_hat, const Map2D& a_tilde, double ratio = 0.10);

class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual std::string name() const = 0;
  virtual Map2D refine(const Image& image, const Map2D& a_hat) = 0;
};

class IdentityRefiner final : public Refiner {
 public:
  std::string name() const override { return "identity"; }
  Map2D refine(const Image&, const Map2D& a_hat) override { return a_hat; }
};

/**
 * External refiner behind the bridge directory protocol: writes
 * input_image.pnit (C, H, W) and input_map.pnit (H, W) into `dir`, runs
 * `command dir` through the shell and reads back refined_map.pnit.
 */
class FileBridgeRefiner final : public Refiner {
 public:
  FileBridgeRefiner(std::filesystem::path dir, std::string command)
      : dir_(std::move(dir)), command_(std::move(command)) {}

  std::string name() const override { return "bridge"; }
  Map2D refine(const Image& image, const Map2D& a_hat) override;

 private:
  std::filesystem::path dir_;
  std::string command_;
};

// Refiner named by the PNI_BRIDGE_CMD environment variable, or nullptr.
std::unique_ptr<Refiner> refiner_from_env(const std::filesystem::path& bridge_dir);

// Runs `refiner` and checks its output: same shape as a_hat, all finite.
// Failures are rethrown as std::runtime_error naming the refiner.
Map2D apply_refiner(Refiner& refiner, const Image& image, const Map2D& a_hat);

}  // namespace pni
