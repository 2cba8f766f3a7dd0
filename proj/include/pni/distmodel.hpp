#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "pni/mlp.hpp"
#include "pni/tensor.hpp"

namespace pni {

// Concatenated features of the p x p window around (y, x), center excluded,
// in row-major scan order. Out-of-bounds slots are zero vectors, so the result
// always has (p*p - 1) * channels entries. p must be odd and >= 3.
std::vector<float> neighborhood_vector(const FeatureMap& map, std::size_t y, std::size_t x, std::size_t p);
void neighborhood_vector_into(const FeatureMap& map, std::size_t y, std::size_t x, std::size_t p, float* out);
std::size_t neighborhood_width(std::size_t p, std::size_t channels);

// Index of the nearest C_dist element for every position, row-major.
std::vector<std::uint32_t> nearest_labels(const FeatureMap& map, const Matrix& c_dist);

// Per-position categorical distribution over C_dist indices.
class PositionHistogram {
 public:
  PositionHistogram() = default;
  PositionHistogram(std::size_t height, std::size_t width, std::size_t classes);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t classes() const { return classes_; }

  std::span<const double> counts(std::size_t y, std::size_t x) const {
    return {counts_.data() + (y * width_ + x) * classes_, classes_};
  }
  std::span<const double> probs(std::size_t y, std::size_t x) const {
    return {probs_.data() + (y * width_ + x) * classes_, classes_};
  }

  void add(std::size_t y, std::size_t x, std::uint32_t cls, double weight = 1.0);
  // Recompute probabilities from counts. Every cell must have positive mass.
  void normalize();

  const std::vector<double>& raw_counts() const { return counts_; }

 private:
  std::size_t height_ = 0, width_ = 0, classes_ = 0;
  std::vector<double> counts_;
  std::vector<double> probs_;
};

// For every position x, counts the nearest-C_dist index of each training
// feature inside the clipped p x p window around x, over all training maps.
PositionHistogram build_position_histogram(std::span<const FeatureMap> train, const Matrix& c_dist, std::size_t p);

// Same counting from precomputed label grids (one per training map).
PositionHistogram histogram_from_labels(std::span<const std::vector<std::uint32_t>> labels, std::size_t height,
                                        std::size_t width, std::size_t classes, std::size_t p);

struct MlpTrainConfig {
  std::size_t epochs = 15;
  double learning_rate = 1e-3;
  std::size_t batch_size = 2048;
  double scheduler_gamma = 0.1;
  std::size_t scheduler_step = 5;
  std::uint64_t seed = 0;
  std::size_t num_layers = 10;
  std::size_t hidden_width = 2048;
};

struct NeighborhoodMlp {
  BasicMlp<float> net;
  float temperature = 2.0f;
  std::size_t p = 9;
  std::size_t feature_dim = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
  double learning_rate = 0.0;
};

/**
 * Train p(c | N_p(x)): each sample is the neighborhood vector of a training
 * position, labelled with the nearest C_dist index of the center feature.
 * Mini-batch Adam on softmax cross-entropy, learning rate multiplied by
 * scheduler_gamma every scheduler_step epochs. Sample order comes from the
 * seed, so results are reproducible. Throws std::runtime_error naming the
 * epoch and batch if the loss becomes non-finite.
 */
NeighborhoodMlp train_neighborhood_mlp(std::span<const FeatureMap> train, const Matrix& c_dist, std::size_t p,
                                       const MlpTrainConfig& cfg,
                                       const std::function<void(const EpochStats&)>& on_epoch = {});

// Training on explicit (input, label) samples; used by the neighborhood
// trainer and by tests with synthetic tasks.
struct SampleSource {
  std::size_t count = 0;
  std::size_t input_width = 0;
  std::size_t classes = 0;
  std::function<void(std::size_t index, float* input)> fill;
  std::function<std::uint32_t(std::size_t index)> label;
};

BasicMlp<float> train_classifier(const SampleSource& samples, const MlpTrainConfig& cfg,
                                 const std::function<void(const EpochStats&)>& on_epoch = {});

// softmax(logits / temperature) for one input vector.
std::vector<float> mlp_forward(const NeighborhoodMlp& mlp, std::span<const float> input, float temperature);

// Same for a batch of rows; returns batch x classes probabilities.
std::vector<float> mlp_forward_batch(const NeighborhoodMlp& mlp, std::span<const float> inputs,
                                     std::size_t batch, float temperature);

// Elementwise mean of the position and neighborhood distributions.
std::vector<double> combined_prior(std::span<const double> position, std::span<const double> neighbor);

// Ablation switches for p(c | Omega).
struct PriorSwitches {
  bool use_position = true;
  bool use_neighbor = true;
};

void save_histogram(const std::filesystem::path& path, const PositionHistogram& h);
PositionHistogram load_histogram(const std::filesystem::path& path, std::size_t height, std::size_t width);

// header.txt plus one PNIT per parameter block inside `dir`.
void save_mlp(const std::filesystem::path& dir, const NeighborhoodMlp& mlp);
NeighborhoodMlp load_mlp(const std::filesystem::path& dir);

}  // namespace pni
