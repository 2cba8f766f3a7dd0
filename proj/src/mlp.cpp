#include "pni/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "pni/random.hpp"
#include "pni/simd/kernels.hpp"

namespace pni {

namespace {

template <typename T>
T dot_t(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return simd::dot(a, b, n);
  } else {
    T sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
  }
}

template <typename T>
void axpy_t(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    simd::axpy(alpha, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

}  // namespace

template <typename T>
BasicMlp<T>::BasicMlp(const MlpArchitecture& arch, std::uint64_t seed) : arch_(arch) {
  if (arch.num_layers < 1 || arch.input_width == 0 || arch.output_width == 0 ||
      (arch.num_layers > 1 && arch.hidden_width == 0)) {
    throw std::invalid_argument("invalid MLP architecture");
  }
  layout();
  Rng rng(seed);
  for (std::size_t l = 0; l < arch_.num_layers; ++l) {
    const std::size_t in = layer_in(l);
    const std::size_t out = layer_out(l);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    T* w = params_.data() + weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) w[i] = static_cast<T>(scale * rng.normal());
    std::fill_n(params_.data() + bias_offset(l), out, T(0));
  }
  for (std::size_t n = 0; n < num_norm_layers(); ++n) {
    std::fill_n(params_.data() + gamma_offset(n), arch_.hidden_width, T(1));
    std::fill_n(params_.data() + beta_offset(n), arch_.hidden_width, T(0));
  }
}

template <typename T>
void BasicMlp<T>::layout() {
  linear_offsets_.clear();
  norm_offsets_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch_.num_layers; ++l) {
    linear_offsets_.push_back(offset);
    offset += layer_in(l) * layer_out(l) + layer_out(l);
  }
  for (std::size_t n = 0; n < num_norm_layers(); ++n) {
    norm_offsets_.push_back(offset);
    offset += 2 * arch_.hidden_width;
  }
  params_.assign(offset, T(0));
  running_mean_.assign(num_norm_layers() * arch_.hidden_width, T(0));
  running_var_.assign(num_norm_layers() * arch_.hidden_width, T(1));
}

template <typename T>
std::size_t BasicMlp<T>::layer_in(std::size_t layer) const {
  return layer == 0 ? arch_.input_width : arch_.hidden_width;
}

template <typename T>
std::size_t BasicMlp<T>::layer_out(std::size_t layer) const {
  return layer + 1 == arch_.num_layers ? arch_.output_width : arch_.hidden_width;
}

template <typename T>
std::size_t BasicMlp<T>::bias_offset(std::size_t layer) const {
  return linear_offsets_[layer] + layer_in(layer) * layer_out(layer);
}

namespace {

template <typename T>
void linear_forward(const T* in, std::size_t batch, std::size_t in_w, const T* weights, const T* bias,
                    std::size_t out_w, T* out) {
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = in + b * in_w;
    T* z = out + b * out_w;
    for (std::size_t o = 0; o < out_w; ++o) z[o] = dot_t(weights + o * in_w, x, in_w) + bias[o];
  }
}

template <typename T>
T cross_entropy(const std::vector<T>& logits, std::span<const std::uint32_t> labels, std::size_t batch,
                std::size_t classes, std::vector<T>* probs_out) {
  T loss = 0;
  if (probs_out) probs_out->resize(batch * classes);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* z = logits.data() + b * classes;
    const T zmax = *std::max_element(z, z + classes);
    T sum = 0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    const T log_norm = zmax + std::log(sum);
    loss += log_norm - z[labels[b]];
    if (probs_out) {
      for (std::size_t k = 0; k < classes; ++k) (*probs_out)[b * classes + k] = std::exp(z[k] - log_norm);
    }
  }
  return loss / static_cast<T>(batch);
}

}  // namespace

template <typename T>
std::vector<T> BasicMlp<T>::forward(std::span<const T> inputs, std::size_t batch) const {
  if (inputs.size() != batch * arch_.input_width) {
    throw std::invalid_argument("MLP input width mismatch");
  }
  std::vector<T> act(inputs.begin(), inputs.end());
  std::vector<T> z;
  for (std::size_t l = 0; l < arch_.num_layers; ++l) {
    const std::size_t in = layer_in(l), out = layer_out(l);
    z.assign(batch * out, T(0));
    linear_forward(act.data(), batch, in, params_.data() + weight_offset(l), params_.data() + bias_offset(l), out,
                   z.data());
    if (l + 1 < arch_.num_layers) {
      const T* gamma = params_.data() + gamma_offset(l);
      const T* beta = params_.data() + beta_offset(l);
      const T* mean = running_mean_.data() + l * arch_.hidden_width;
      const T* var = running_var_.data() + l * arch_.hidden_width;
      for (std::size_t b = 0; b < batch; ++b) {
        T* row = z.data() + b * out;
        for (std::size_t j = 0; j < out; ++j) {
          const T y = gamma[j] * (row[j] - mean[j]) / std::sqrt(var[j] + kNormEps) + beta[j];
          row[j] = y > T(0) ? y : T(0);
        }
      }
    }
    act.swap(z);
  }
  return act;
}

namespace {

// Per-layer activations of a training-mode forward pass.
template <typename T>
struct TrainCache {
  std::vector<std::vector<T>> acts;     // acts[l] = input of linear layer l
  std::vector<std::vector<T>> xhat;     // normalized pre-activations
  std::vector<std::vector<T>> y;        // post-affine, pre-ReLU
  std::vector<std::vector<T>> inv_std;  // per unit
  std::vector<std::vector<T>> mean;
  std::vector<std::vector<T>> var;      // biased
  std::vector<T> logits;
};

template <typename T>
void train_forward(const BasicMlp<T>& net, std::span<const T> inputs, std::size_t batch, TrainCache<T>& cache) {
  const auto& arch = net.architecture();
  const auto& params = net.params();
  const std::size_t L = arch.num_layers;
  cache.acts.assign(L, {});
  cache.xhat.assign(L - 1, {});
  cache.y.assign(L - 1, {});
  cache.inv_std.assign(L - 1, {});
  cache.mean.assign(L - 1, {});
  cache.var.assign(L - 1, {});
  cache.acts[0].assign(inputs.begin(), inputs.end());
  const T eps = BasicMlp<T>::kNormEps;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = net.layer_in(l), out = net.layer_out(l);
    std::vector<T> z(batch * out);
    linear_forward(cache.acts[l].data(), batch, in, params.data() + net.weight_offset(l),
                   params.data() + net.bias_offset(l), out, z.data());
    if (l + 1 == L) {
      cache.logits = std::move(z);
      break;
    }
    auto& mean = cache.mean[l];
    auto& var = cache.var[l];
    auto& inv_std = cache.inv_std[l];
    mean.assign(out, T(0));
    var.assign(out, T(0));
    inv_std.resize(out);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < out; ++j) mean[j] += z[b * out + j];
    for (auto& m : mean) m /= static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < out; ++j) {
        const T c = z[b * out + j] - mean[j];
        var[j] += c * c;
      }
    }
    for (std::size_t j = 0; j < out; ++j) {
      var[j] /= static_cast<T>(batch);
      inv_std[j] = T(1) / std::sqrt(var[j] + eps);
    }
    const T* gamma = params.data() + net.gamma_offset(l);
    const T* beta = params.data() + net.beta_offset(l);
    auto& xhat = cache.xhat[l];
    auto& y = cache.y[l];
    xhat.resize(batch * out);
    y.resize(batch * out);
    std::vector<T> a(batch * out);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < out; ++j) {
        const std::size_t i = b * out + j;
        xhat[i] = (z[i] - mean[j]) * inv_std[j];
        y[i] = gamma[j] * xhat[i] + beta[j];
        a[i] = y[i] > T(0) ? y[i] : T(0);
      }
    }
    cache.acts[l + 1] = std::move(a);
  }
}

template <typename T>
void check_batch(const MlpArchitecture& arch, std::span<const T> inputs, std::span<const std::uint32_t> labels,
                 std::size_t batch) {
  if (batch < 2) {
    throw std::invalid_argument("training batches need at least 2 samples for batch normalization");
  }
  if (inputs.size() != batch * arch.input_width || labels.size() != batch) {
    throw std::invalid_argument("MLP batch shape mismatch");
  }
  for (auto label : labels) {
    if (label >= arch.output_width) throw std::invalid_argument("MLP label out of range");
  }
}

}  // namespace

template <typename T>
T BasicMlp<T>::train_loss(std::span<const T> inputs, std::span<const std::uint32_t> labels,
                          std::size_t batch) const {
  check_batch(arch_, inputs, labels, batch);
  TrainCache<T> cache;
  train_forward(*this, inputs, batch, cache);
  return cross_entropy(cache.logits, labels, batch, arch_.output_width, static_cast<std::vector<T>*>(nullptr));
}

template <typename T>
T BasicMlp<T>::train_loss_and_grad(std::span<const T> inputs, std::span<const std::uint32_t> labels,
                                   std::size_t batch, std::vector<T>& grads, bool update_running) {
  check_batch(arch_, inputs, labels, batch);
  TrainCache<T> cache;
  train_forward(*this, inputs, batch, cache);
  const std::size_t classes = arch_.output_width;
  std::vector<T> probs;
  const T loss = cross_entropy(cache.logits, labels, batch, classes, &probs);

  grads.assign(params_.size(), T(0));
  const T inv_batch = T(1) / static_cast<T>(batch);
  // dL/dlogits
  std::vector<T> dz = std::move(probs);
  for (std::size_t b = 0; b < batch; ++b) {
    dz[b * classes + labels[b]] -= T(1);
    for (std::size_t k = 0; k < classes; ++k) dz[b * classes + k] *= inv_batch;
  }

  for (std::size_t l = arch_.num_layers; l-- > 0;) {
    const std::size_t in = layer_in(l), out = layer_out(l);
    const T* weights = params_.data() + weight_offset(l);
    T* dw = grads.data() + weight_offset(l);
    T* db = grads.data() + bias_offset(l);
    const auto& a = cache.acts[l];
    std::vector<T> da(l > 0 ? batch * in : 0, T(0));
    for (std::size_t b = 0; b < batch; ++b) {
      const T* g = dz.data() + b * out;
      const T* x = a.data() + b * in;
      for (std::size_t o = 0; o < out; ++o) {
        if (g[o] == T(0)) continue;
        axpy_t(g[o], x, dw + o * in, in);
        db[o] += g[o];
        if (l > 0) axpy_t(g[o], weights + o * in, da.data() + b * in, in);
      }
    }
    if (l == 0) break;

    // ReLU and normalization layer l-1.
    const std::size_t n = l - 1;
    const std::size_t width = in;
    const T* gamma = params_.data() + gamma_offset(n);
    T* dgamma = grads.data() + gamma_offset(n);
    T* dbeta = grads.data() + beta_offset(n);
    const auto& xhat = cache.xhat[n];
    const auto& y = cache.y[n];
    const auto& inv_std = cache.inv_std[n];
    std::vector<T> dxhat(batch * width);
    std::vector<T> sum_dxhat(width, T(0)), sum_dxhat_xhat(width, T(0));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t i = b * width + j;
        const T dy = y[i] > T(0) ? da[i] : T(0);
        dgamma[j] += dy * xhat[i];
        dbeta[j] += dy;
        dxhat[i] = dy * gamma[j];
        sum_dxhat[j] += dxhat[i];
        sum_dxhat_xhat[j] += dxhat[i] * xhat[i];
      }
    }
    dz.assign(batch * width, T(0));
    const T bsz = static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t i = b * width + j;
        dz[i] = inv_std[j] * inv_batch * (bsz * dxhat[i] - sum_dxhat[j] - xhat[i] * sum_dxhat_xhat[j]);
      }
    }
  }

  if (update_running) {
    const T unbias = static_cast<T>(batch) / static_cast<T>(batch - 1);
    for (std::size_t n = 0; n < num_norm_layers(); ++n) {
      for (std::size_t j = 0; j < arch_.hidden_width; ++j) {
        const std::size_t i = n * arch_.hidden_width + j;
        running_mean_[i] = (T(1) - kMomentum) * running_mean_[i] + kMomentum * cache.mean[n][j];
        running_var_[i] = (T(1) - kMomentum) * running_var_[i] + kMomentum * cache.var[n][j] * unbias;
      }
    }
  }
  return loss;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits, T temperature) {
  if (!(temperature > T(0))) {
    throw std::invalid_argument("temperature must be positive");
  }
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T zmax = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - zmax) / temperature);
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
void Adam<T>::step(std::vector<T>& params, const std::vector<T>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam parameter count mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (T(1) - b1) * grads[i];
    v_[i] = b2 * v_[i] + (T(1) - b2) * grads[i] * grads[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
  }
}

template class BasicMlp<float>;
template class BasicMlp<double>;
template class Adam<float>;
template class Adam<double>;
template std::vector<float> softmax<float>(std::span<const float>, float);
template std::vector<double> softmax<double>(std::span<const double>, double);

}  // namespace pni
