#pragma once

#include <span>
#include <string>
#include <vector>

#include "pni/coreset.hpp"
#include "pni/distmodel.hpp"
#include "pni/tensor.hpp"

namespace pni {

enum class RepresentativeMode { kVoronoi, kLiteral };

std::string to_string(RepresentativeMode mode);
RepresentativeMode parse_representative_mode(const std::string& s);

struct ScoreParams {
  double lambda = 1.0;
  // <= 0 selects the default 1 / (2 |C_dist|).
  double tau = 0.0;
  double sigma = 8.0;
  RepresentativeMode representative_mode = RepresentativeMode::kVoronoi;

  double tau_for(std::size_t dist_size) const;
  // Throws std::invalid_argument unless lambda > 0, 0 < tau < 1/|C_dist|
  // and sigma >= 0.
  void validate(std::size_t dist_size) const;
};

inline int threshold_fn(double x, double tau) { return x > tau ? 1 : 0; }

// Distance from phi to the representative of every C_dist element:
// the nearest member of its Voronoi cell, or the element itself.
std::vector<double> representative_distances(std::span<const float> phi, const Coresets& coresets, RepresentativeMode mode);

// max_c exp(-lambda * dist_c) * T(prior[c], tau), evaluated term by term.
double feature_likelihood(std::span<const float> phi, std::span<const double> prior, const Coresets& coresets,
                          const ScoreParams& params);

// -log of the above, computed as lambda * min surviving distance.
double feature_score(std::span<const float> phi, std::span<const double> prior, const Coresets& coresets,
                     const ScoreParams& params);

struct PriorModels {
  const PositionHistogram* histogram = nullptr;
  const NeighborhoodMlp* mlp = nullptr;
  PriorSwitches switches;
};

// p(c | Omega) for every position of `map`, row-major, |C_dist| entries each.
std::vector<double> position_priors(const FeatureMap& map, const PriorModels& models, std::size_t dist_size);

struct AnomalyMap {
  Map2D scores;
  double image_score = 0.0;
};

// Per-position -log p(Phi(x) | Omega); image score is the maximum.
AnomalyMap score_map(const FeatureMap& map, const PriorModels& models, const Coresets& coresets,
                     const ScoreParams& params);

double map_max(const Map2D& map);

Map2D upsample_bilinear(const Map2D& map, std::size_t height, std::size_t width);

// Normalized kernel taps for offsets -r..r, r = ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian blur, symmetric reflection at the borders.
Map2D gaussian_smooth(const Map2D& map, double sigma);

Map2D ensemble_average(std::span<const Map2D> maps);

}  // namespace pni
