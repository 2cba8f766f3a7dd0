#include "pni/distmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pni/coreset.hpp"
#include "pni/random.hpp"
#include "pni/tensorio.hpp"

namespace pni {

std::size_t neighborhood_width(std::size_t p, std::size_t channels) { return (p * p - 1) * channels; }

void neighborhood_vector_into(const FeatureMap& map, std::size_t y, std::size_t x, std::size_t p, float* out) {
  if (p % 2 == 0 || p < 3) {
    throw std::invalid_argument("neighborhood size must be odd and at least 3, got " + std::to_string(p));
  }
  if (y >= map.height() || x >= map.width()) {
    throw std::invalid_argument("neighborhood center out of bounds");
  }
  const auto r = static_cast<std::ptrdiff_t>(p / 2);
  const std::size_t c = map.channels();
  const auto h = static_cast<std::ptrdiff_t>(map.height());
  const auto w = static_cast<std::ptrdiff_t>(map.width());
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      if (dy == 0 && dx == 0) continue;
      const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
      const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
        std::fill_n(out, c, 0.0f);
      } else {
        std::copy_n(map.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)), c, out);
      }
      out += c;
    }
  }
}

std::vector<float> neighborhood_vector(const FeatureMap& map, std::size_t y, std::size_t x, std::size_t p) {
  std::vector<float> out(p % 2 == 1 && p >= 3 ? neighborhood_width(p, map.channels()) : 0);
  neighborhood_vector_into(map, y, x, p, out.data());
  return out;
}

std::vector<std::uint32_t> nearest_labels(const FeatureMap& map, const Matrix& c_dist) {
  std::vector<std::uint32_t> labels(map.positions());
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      labels[y * map.width() + x] = nearest(map.vector_at(y, x), c_dist).index;
    }
  }
  return labels;
}

PositionHistogram::PositionHistogram(std::size_t height, std::size_t width, std::size_t classes)
    : height_(height),
      width_(width),
      classes_(classes),
      counts_(height * width * classes, 0.0),
      probs_(height * width * classes, 0.0) {}

void PositionHistogram::add(std::size_t y, std::size_t x, std::uint32_t cls, double weight) {
  if (cls >= classes_) throw std::invalid_argument("histogram class out of range");
  counts_[(y * width_ + x) * classes_ + cls] += weight;
}

void PositionHistogram::normalize() {
  for (std::size_t cell = 0; cell < height_ * width_; ++cell) {
    const double* c = counts_.data() + cell * classes_;
    double* p = probs_.data() + cell * classes_;
    const double total = std::accumulate(c, c + classes_, 0.0);
    if (!(total > 0.0)) {
      throw std::runtime_error("histogram cell " + std::to_string(cell) + " has no counts");
    }
    for (std::size_t k = 0; k < classes_; ++k) p[k] = c[k] / total;
  }
}

PositionHistogram histogram_from_labels(std::span<const std::vector<std::uint32_t>> labels, std::size_t height,
                                        std::size_t width, std::size_t classes, std::size_t p) {
  if (labels.empty()) {
    throw std::invalid_argument("empty training set");
  }
  if (p % 2 == 0) {
    throw std::invalid_argument("histogram window must be odd");
  }
  PositionHistogram hist(height, width, classes);
  const auto r = static_cast<std::ptrdiff_t>(p / 2);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  for (const auto& grid : labels) {
    if (grid.size() != height * width) {
      throw std::invalid_argument("label grid shape mismatch");
    }
    // Each labelled position contributes to every cell whose window holds it.
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const std::uint32_t cls = grid[static_cast<std::size_t>(y * w + x)];
        for (std::ptrdiff_t cy = std::max<std::ptrdiff_t>(0, y - r); cy <= std::min(h - 1, y + r); ++cy) {
          for (std::ptrdiff_t cx = std::max<std::ptrdiff_t>(0, x - r); cx <= std::min(w - 1, x + r); ++cx) {
            hist.add(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx), cls);
          }
        }
      }
    }
  }
  hist.normalize();
  return hist;
}

PositionHistogram build_position_histogram(std::span<const FeatureMap> train, const Matrix& c_dist, std::size_t p) {
  if (train.empty()) {
    throw std::invalid_argument("empty training set");
  }
  const std::size_t h = train.front().height(), w = train.front().width();
  std::vector<std::vector<std::uint32_t>> labels;
  labels.reserve(train.size());
  for (const auto& m : train) {
    if (m.height() != h || m.width() != w || m.channels() != c_dist.cols()) {
      throw std::invalid_argument("training map shape does not match the coreset");
    }
    labels.push_back(nearest_labels(m, c_dist));
  }
  return histogram_from_labels(labels, h, w, c_dist.rows(), p);
}

BasicMlp<float> train_classifier(const SampleSource& samples, const MlpTrainConfig& cfg,
                                 const std::function<void(const EpochStats&)>& on_epoch) {
  if (samples.count < 2) {
    throw std::invalid_argument("need at least 2 training samples");
  }
  if (cfg.batch_size < 2 || cfg.epochs == 0 || cfg.scheduler_step == 0 || !(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("invalid MLP training configuration");
  }
  MlpArchitecture arch{samples.input_width, cfg.hidden_width, cfg.num_layers, samples.classes};
  BasicMlp<float> net(arch, derive_seed(cfg.seed, 11));
  Adam<float> adam(net.params().size());
  Rng order_rng(derive_seed(cfg.seed, 12));

  std::vector<std::size_t> order(samples.count);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::min(cfg.batch_size, samples.count);
  std::vector<float> inputs(bs * samples.input_width);
  std::vector<std::uint32_t> labels(bs);
  std::vector<float> grads;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.learning_rate * std::pow(cfg.scheduler_gamma, static_cast<double>(epoch / cfg.scheduler_step));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    for (std::size_t start = 0, batch_index = 0; start < order.size(); start += bs, ++batch_index) {
      const std::size_t n = std::min(bs, order.size() - start);
      if (n < 2) break;
      for (std::size_t b = 0; b < n; ++b) {
        samples.fill(order[start + b], inputs.data() + b * samples.input_width);
        labels[b] = samples.label(order[start + b]);
      }
      const std::span<const float> in_span(inputs.data(), n * samples.input_width);
      const std::span<const std::uint32_t> label_span(labels.data(), n);
      const float loss = net.train_loss_and_grad(in_span, label_span, n, grads, true);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("MLP training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
      }
      adam.step(net.params(), grads, lr);
      loss_sum += static_cast<double>(loss) * static_cast<double>(n);
      seen += n;
      if (on_epoch) {
        const auto logits = net.forward(in_span, n);
        for (std::size_t b = 0; b < n; ++b) {
          const float* row = logits.data() + b * samples.classes;
          const auto arg = static_cast<std::uint32_t>(std::max_element(row, row + samples.classes) - row);
          correct += arg == labels[b];
        }
      }
    }
    if (on_epoch) {
      on_epoch({epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0,
                seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0, lr});
    }
  }
  return net;
}

NeighborhoodMlp train_neighborhood_mlp(std::span<const FeatureMap> train, const Matrix& c_dist, std::size_t p,
                                       const MlpTrainConfig& cfg,
                                       const std::function<void(const EpochStats&)>& on_epoch) {
  if (train.empty()) {
    throw std::invalid_argument("empty training set");
  }
  if (p % 2 == 0 || p < 3) {
    throw std::invalid_argument("neighborhood size must be odd and at least 3, got " + std::to_string(p));
  }
  const std::size_t d = c_dist.cols();
  const std::size_t h = train.front().height(), w = train.front().width();
  std::vector<std::vector<std::uint32_t>> labels;
  for (const auto& m : train) {
    if (m.channels() != d || m.height() != h || m.width() != w) {
      throw std::invalid_argument("training map shape does not match the coreset");
    }
    labels.push_back(nearest_labels(m, c_dist));
  }
  const std::size_t per_map = h * w;
  SampleSource source;
  source.count = train.size() * per_map;
  source.input_width = neighborhood_width(p, d);
  source.classes = c_dist.rows();
  source.fill = [&](std::size_t i, float* out) {
    const std::size_t m = i / per_map, pos = i % per_map;
    neighborhood_vector_into(train[m], pos / w, pos % w, p, out);
  };
  source.label = [&](std::size_t i) { return labels[i / per_map][i % per_map]; };

  NeighborhoodMlp mlp;
  mlp.net = train_classifier(source, cfg, on_epoch);
  mlp.p = p;
  mlp.feature_dim = d;
  return mlp;
}

std::vector<float> mlp_forward_batch(const NeighborhoodMlp& mlp, std::span<const float> inputs,
                                     std::size_t batch, float temperature) {
  const auto& arch = mlp.net.architecture();
  if (inputs.size() != batch * arch.input_width) {
    throw std::invalid_argument("MLP input width mismatch: expected " + std::to_string(arch.input_width));
  }
  for (float v : inputs) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite MLP input");
  }
  const auto logits = mlp.net.forward(inputs, batch);
  std::vector<float> probs(logits.size());
  const std::size_t k = arch.output_width;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = softmax<float>(std::span<const float>(logits.data() + b * k, k), temperature);
    std::copy(row.begin(), row.end(), probs.begin() + static_cast<std::ptrdiff_t>(b * k));
  }
  return probs;
}

std::vector<float> mlp_forward(const NeighborhoodMlp& mlp, std::span<const float> input, float temperature) {
  return mlp_forward_batch(mlp, input, 1, temperature);
}

std::vector<double> combined_prior(std::span<const double> position, std::span<const double> neighbor) {
  if (position.size() != neighbor.size()) {
    throw std::invalid_argument("prior length mismatch");
  }
  std::vector<double> out(position.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (position[i] + neighbor[i]);
  return out;
}

void save_histogram(const std::filesystem::path& path, const PositionHistogram& h) {
  Tensor t({static_cast<std::uint32_t>(h.height() * h.width()), static_cast<std::uint32_t>(h.classes())});
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(h.raw_counts()[i]);
  write_tensor(path, t);
}

PositionHistogram load_histogram(const std::filesystem::path& path, std::size_t height, std::size_t width) {
  const Tensor t = read_tensor(path, {.strict = true});
  if (t.dims.size() != 2 || t.dims[0] != height * width) {
    throw std::runtime_error(path.string() + ": histogram shape does not match the feature grid");
  }
  PositionHistogram h(height, width, t.dims[1]);
  for (std::size_t cell = 0; cell < height * width; ++cell) {
    for (std::size_t k = 0; k < t.dims[1]; ++k) {
      const float c = t.data[cell * t.dims[1] + k];
      if (c < 0.0f) throw std::runtime_error(path.string() + ": negative histogram count");
      if (c > 0.0f) h.add(cell / width, cell % width, static_cast<std::uint32_t>(k), c);
    }
  }
  h.normalize();
  return h;
}

namespace {

Tensor block_tensor(const std::vector<float>& params, std::size_t offset, std::vector<std::uint32_t> dims) {
  Tensor t(std::move(dims));
  std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), t.data.size(), t.data.begin());
  return t;
}

void load_block(const std::filesystem::path& path, std::vector<float>& dst, std::size_t offset,
                std::size_t count) {
  const Tensor t = read_tensor(path, {.strict = true});
  if (t.data.size() != count) {
    throw std::runtime_error(path.string() + ": unexpected parameter count");
  }
  std::copy(t.data.begin(), t.data.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

void save_mlp(const std::filesystem::path& dir, const NeighborhoodMlp& mlp) {
  std::filesystem::create_directories(dir);
  const auto& net = mlp.net;
  const auto& arch = net.architecture();
  {
    std::ofstream out(dir / "header.txt", std::ios::trunc);
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.9g", static_cast<double>(mlp.temperature));
    out << "num_layers = " << arch.num_layers << "\n"
        << "input_width = " << arch.input_width << "\n"
        << "hidden_width = " << arch.hidden_width << "\n"
        << "output_width = " << arch.output_width << "\n"
        << "temperature = " << temp << "\n"
        << "p = " << mlp.p << "\n"
        << "feature_dim = " << mlp.feature_dim << "\n";
    if (!out) throw std::runtime_error("cannot write " + (dir / "header.txt").string());
  }
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    const auto in = static_cast<std::uint32_t>(net.layer_in(l));
    const auto out = static_cast<std::uint32_t>(net.layer_out(l));
    const std::string base = "layer" + std::to_string(l);
    write_tensor(dir / (base + "_weight.pnit"), block_tensor(net.params(), net.weight_offset(l), {out, in}));
    write_tensor(dir / (base + "_bias.pnit"), block_tensor(net.params(), net.bias_offset(l), {out}));
  }
  const auto width = static_cast<std::uint32_t>(arch.hidden_width);
  for (std::size_t n = 0; n < net.num_norm_layers(); ++n) {
    const std::string base = "norm" + std::to_string(n);
    write_tensor(dir / (base + "_gamma.pnit"), block_tensor(net.params(), net.gamma_offset(n), {width}));
    write_tensor(dir / (base + "_beta.pnit"), block_tensor(net.params(), net.beta_offset(n), {width}));
    write_tensor(dir / (base + "_mean.pnit"), block_tensor(net.running_mean(), n * width, {width}));
    write_tensor(dir / (base + "_var.pnit"), block_tensor(net.running_var(), n * width, {width}));
  }
}

NeighborhoodMlp load_mlp(const std::filesystem::path& dir) {
  std::ifstream in(dir / "header.txt");
  if (!in) {
    throw std::runtime_error("missing model file " + (dir / "header.txt").string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("MLP header missing key '" + key + "'");
    return it->second;
  };
  MlpArchitecture arch{std::stoul(get("input_width")), std::stoul(get("hidden_width")),
                       std::stoul(get("num_layers")), std::stoul(get("output_width"))};
  NeighborhoodMlp mlp;
  mlp.net = BasicMlp<float>(arch, 0);
  mlp.temperature = std::stof(get("temperature"));
  mlp.p = std::stoul(get("p"));
  mlp.feature_dim = std::stoul(get("feature_dim"));
  auto& net = mlp.net;
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    const std::string base = "layer" + std::to_string(l);
    load_block(dir / (base + "_weight.pnit"), net.params(), net.weight_offset(l), net.layer_in(l) * net.layer_out(l));
    load_block(dir / (base + "_bias.pnit"), net.params(), net.bias_offset(l), net.layer_out(l));
  }
  for (std::size_t n = 0; n < net.num_norm_layers(); ++n) {
    const std::string base = "norm" + std::to_string(n);
    load_block(dir / (base + "_gamma.pnit"), net.params(), net.gamma_offset(n), arch.hidden_width);
    load_block(dir / (base + "_beta.pnit"), net.params(), net.beta_offset(n), arch.hidden_width);
    load_block(dir / (base + "_mean.pnit"), net.running_mean(), n * arch.hidden_width, arch.hidden_width);
    load_block(dir / (base + "_var.pnit"), net.running_var(), n * arch.hidden_width, arch.hidden_width);
  }
  return mlp;
}

}  // namespace pni
