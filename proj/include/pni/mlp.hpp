#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pni {

struct MlpArchitecture {
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;
  // Number of fully-connected layers; batch normalization + ReLU sit between
  // consecutive layers.
  std::size_t num_layers = 0;
  std::size_t output_width = 0;

  bool operator==(const MlpArchitecture&) const = default;
};

/**
 * Fully-connected classifier: Linear -> BatchNorm -> ReLU -> ... -> Linear.
 *
 * All trainable parameters live in one flat buffer (per linear layer: weight
 * out x in, then bias; per normalization layer: gamma, then beta) so the
 * optimizer and gradient checks can treat them uniformly. Running mean and
 * variance are kept separately and only used in inference mode.
 */
template <typename T>
class BasicMlp {
 public:
  BasicMlp() = default;
  BasicMlp(const MlpArchitecture& arch, std::uint64_t seed);

  const MlpArchitecture& architecture() const { return arch_; }

  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  std::vector<T>& running_mean() { return running_mean_; }
  const std::vector<T>& running_mean() const { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }
  const std::vector<T>& running_var() const { return running_var_; }

  std::size_t num_norm_layers() const { return arch_.num_layers - 1; }

  // Offsets into params().
  std::size_t weight_offset(std::size_t layer) const { return linear_offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const;
  std::size_t gamma_offset(std::size_t norm) const { return norm_offsets_[norm]; }
  std::size_t beta_offset(std::size_t norm) const { return norm_offsets_[norm] + arch_.hidden_width; }
  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;

  // Inference: running statistics, returns logits (batch x output_width).
  std::vector<T> forward(std::span<const T> inputs, std::size_t batch) const;

  // Training step on one batch (batch >= 2): batch statistics, mean softmax
  // cross-entropy against `labels`. Writes d(loss)/d(params) into `grads`
  // (resized as needed) and returns the loss. With update_running set, the
  // running statistics move toward the batch statistics (momentum 0.1,
  // unbiased variance).
  T train_loss_and_grad(std::span<const T> inputs, std::span<const std::uint32_t> labels, std::size_t batch,
                        std::vector<T>& grads, bool update_running);

  // Same loss as above without gradients or side effects.
  T train_loss(std::span<const T> inputs, std::span<const std::uint32_t> labels, std::size_t batch) const;

  static constexpr T kNormEps = T(1e-5);
  static constexpr T kMomentum = T(0.1);

 private:
  void layout();

  MlpArchitecture arch_;
  std::vector<T> params_;
  std::vector<T> running_mean_;  // (num_layers - 1) x hidden_width
  std::vector<T> running_var_;
  std::vector<std::size_t> linear_offsets_;
  std::vector<std::size_t> norm_offsets_;
};

extern template class BasicMlp<float>;
extern template class BasicMlp<double>;

// Numerically stable softmax of logits / temperature.
template <typename T>
std::vector<T> softmax(std::span<const T> logits, T temperature = T(1));

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::size_t num_params, AdamConfig cfg = {}) : cfg_(cfg), m_(num_params, T(0)), v_(num_params, T(0)) {}

  void step(std::vector<T>& params, const std::vector<T>& grads, double lr);

 private:
  AdamConfig cfg_;
  std::vector<T> m_;
  std::vector<T> v_;
  std::uint64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace pni
