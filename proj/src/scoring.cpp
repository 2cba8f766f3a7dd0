#include "pni/scoring.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pni/resample.hpp"
#include "pni/simd/kernels.hpp"

namespace pni {

std::string to_string(RepresentativeMode mode) { return mode == RepresentativeMode::kVoronoi ? "voronoi" : "literal"; }

RepresentativeMode parse_representative_mode(const std::string& s) {
  if (s == "voronoi") return RepresentativeMode::kVoronoi;
  if (s == "literal") return RepresentativeMode::kLiteral;
  throw std::invalid_argument("representative_mode must be 'voronoi' or 'literal', got '" + s + "'");
}

double ScoreParams::tau_for(std::size_t dist_size) const {
  return tau > 0.0 ? tau : 1.0 / (2.0 * static_cast<double>(dist_size));
}

void ScoreParams::validate(std::size_t dist_size) const {
  if (dist_size == 0) throw std::invalid_argument("empty distribution coreset");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const double t = tau_for(dist_size);
  if (!(t > 0.0 && t < 1.0 / static_cast<double>(dist_size))) {
    throw std::invalid_argument("tau must lie in (0, 1/|C_dist|)");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
}

std::vector<double> representative_distances(std::span<const float> phi, const Coresets& coresets, RepresentativeMode mode) {
  const std::size_t k = coresets.dist.rows();
  if (phi.size() != coresets.dim()) {
    throw std::invalid_argument("feature dimension does not match the coreset");
  }
  std::vector<double> out(k, std::numeric_limits<double>::infinity());
  if (mode == RepresentativeMode::kLiteral) {
    for (std::size_t c = 0; c < k; ++c) {
      out[c] = std::sqrt(static_cast<double>(simd::squared_l2(phi.data(), coresets.dist.row(c), phi.size())));
    }
    return out;
  }
  if (coresets.voronoi.size() != coresets.emb.rows()) {
    throw std::invalid_argument("Voronoi assignment missing");
  }
  for (std::size_t m = 0; m < coresets.emb.rows(); ++m) {
    const double d = simd::squared_l2(phi.data(), coresets.emb.row(m), phi.size());
    double& slot = out[coresets.voronoi[m]];
    if (d < slot) slot = d;
  }
  for (double& d : out) d = std::sqrt(d);
  return out;
}

double feature_likelihood(std::span<const float> phi, std::span<const double> prior, const Coresets& coresets,
                          const ScoreParams& params) {
  if (prior.size() != coresets.dist.rows()) throw std::invalid_argument("prior length mismatch");
  const double tau = params.tau_for(prior.size());
  const auto dist = representative_distances(phi, coresets, params.representative_mode);
  double best = 0.0;
  for (std::size_t c = 0; c < dist.size(); ++c) {
    best = std::max(best, std::exp(-params.lambda * dist[c]) * threshold_fn(prior[c], tau));
  }
  assert(best > 0.0);
  return best;
}

namespace {

double surviving_min(std::span<const double> dist, std::span<const double> prior, double tau) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < dist.size(); ++c) {
    if (threshold_fn(prior[c], tau)) best = std::min(best, dist[c]);
  }
  if (!std::isfinite(best)) {
    throw std::logic_error("no prior entry above tau; prior is not normalized");
  }
  return best;
}

}  // namespace

double feature_score(std::span<const float> phi, std::span<const double> prior, const Coresets& coresets,
                     const ScoreParams& params) {
  if (prior.size() != coresets.dist.rows()) throw std::invalid_argument("prior length mismatch");
  const auto dist = representative_distances(phi, coresets, params.representative_mode);
  return params.lambda * surviving_min(dist, prior, params.tau_for(prior.size()));
}

std::vector<double> position_priors(const FeatureMap& map, const PriorModels& models, std::size_t dist_size) {
  const std::size_t n = map.positions();
  const bool pos = models.switches.use_position;
  const bool nbr = models.switches.use_neighbor;
  std::vector<double> out(n * dist_size, 1.0 / static_cast<double>(dist_size));
  if (!pos && !nbr) return out;

  if (pos) {
    const auto* h = models.histogram;
    if (!h) throw std::invalid_argument("position prior enabled but no histogram given");
    if (h->height() != map.height() || h->width() != map.width() || h->classes() != dist_size) {
      throw std::invalid_argument("histogram shape does not match the feature map");
    }
  }
  std::vector<float> mlp_probs;
  if (nbr) {
    const auto* mlp = models.mlp;
    if (!mlp) throw std::invalid_argument("neighborhood prior enabled but no MLP given");
    if (mlp->feature_dim != map.channels() || mlp->net.architecture().output_width != dist_size) {
      throw std::invalid_argument("MLP does not match the feature map");
    }
    const std::size_t width = neighborhood_width(mlp->p, map.channels());
    std::vector<float> inputs(n * width);
    for (std::size_t y = 0; y < map.height(); ++y) {
      for (std::size_t x = 0; x < map.width(); ++x) {
        neighborhood_vector_into(map, y, x, mlp->p, inputs.data() + (y * map.width() + x) * width);
      }
    }
    mlp_probs = mlp_forward_batch(*mlp, inputs, n, mlp->temperature);
  }

  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data() + i * dist_size;
    const std::size_t y = i / map.width(), x = i % map.width();
    if (pos && nbr) {
      const auto hp = models.histogram->probs(y, x);
      for (std::size_t c = 0; c < dist_size; ++c) {
        dst[c] = 0.5 * (hp[c] + static_cast<double>(mlp_probs[i * dist_size + c]));
      }
    } else if (pos) {
      const auto hp = models.histogram->probs(y, x);
      std::copy(hp.begin(), hp.end(), dst);
    } else {
      for (std::size_t c = 0; c < dist_size; ++c) dst[c] = mlp_probs[i * dist_size + c];
    }
  }
  return out;
}

AnomalyMap score_map(const FeatureMap& map, const PriorModels& models, const Coresets& coresets,
                     const ScoreParams& params) {
  const std::size_t k = coresets.dist.rows();
  params.validate(k);
  if (map.channels() != coresets.dim()) {
    throw std::invalid_argument("feature map has " + std::to_string(map.channels()) +
                                " channels, models expect " + std::to_string(coresets.dim()));
  }
  const auto priors = position_priors(map, models, k);
  const double tau = params.tau_for(k);
  AnomalyMap out;
  out.scores = Map2D(map.height(), map.width());
  for (std::size_t y = 0; y < map.height(); ++y) {
    for (std::size_t x = 0; x < map.width(); ++x) {
      const std::size_t i = y * map.width() + x;
      const auto dist = representative_distances(map.vector_at(y, x), coresets, params.representative_mode);
      const double s = params.lambda * surviving_min(dist, {priors.data() + i * k, k}, tau);
      out.scores(y, x) = static_cast<float>(s);
    }
  }
  out.image_score = map_max(out.scores);
  return out;
}

double map_max(const Map2D& map) {
  if (map.size() == 0) throw std::invalid_argument("empty map");
  return *std::max_element(map.values().begin(), map.values().end());
}

Map2D upsample_bilinear(const Map2D& map, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw std::invalid_argument("zero target size");
  if (map.size() == 0) throw std::invalid_argument("empty map");
  Map2D out(height, width);
  out.values() = resize_bilinear(map.values().data(), map.height(), map.width(), 1, height, width);
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  if (sigma == 0.0) return {1.0};
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

namespace {

// Symmetric reflection (a b c | c b a), periodic beyond one reflection.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

}  // namespace

Map2D gaussian_smooth(const Map2D& map, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  if (kernel.size() == 1) return map;
  const auto r = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t h = map.height(), w = map.width();
  std::vector<double> tmp(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -r; k <= r; ++k) {
        acc += kernel[static_cast<std::size_t>(k + r)] * map(y, reflect(static_cast<std::ptrdiff_t>(x) + k, w));
      }
      tmp[y * w + x] = acc;
    }
  }
  Map2D out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -r; k <= r; ++k) {
        acc += kernel[static_cast<std::size_t>(k + r)] * tmp[reflect(static_cast<std::ptrdiff_t>(y) + k, h) * w + x];
      }
      out(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

Map2D ensemble_average(std::span<const Map2D> maps) {
  if (maps.empty()) throw std::invalid_argument("no maps to average");
  std::vector<double> acc(maps.front().size(), 0.0);
  for (const auto& m : maps) {
    if (!m.same_shape(maps.front())) throw std::invalid_argument("ensemble shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m.values()[i];
  }
  Map2D out(maps.front().height(), maps.front().width());
  for (std::size_t i = 0; i < acc.size(); ++i) out.values()[i] = static_cast<float>(acc[i] / maps.size());
  return out;
}

}  // namespace pni
