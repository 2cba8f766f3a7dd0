#include "pni/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pni/random.hpp"
#include "pni/simd/kernels.hpp"
#include "pni/tensorio.hpp"

namespace pni {

MemoryBank build_memory_bank(std::span<const FeatureMap> maps) {
  if (maps.empty()) {
    throw std::invalid_argument("empty training set");
  }
  const std::size_t d = maps.front().channels();
  std::size_t total = 0;
  for (const auto& m : maps) {
    if (m.channels() != d) {
      throw std::invalid_argument("dimension mismatch: feature maps have " + std::to_string(d) + " and " +
                                  std::to_string(m.channels()) + " channels");
    }
    total += m.positions();
  }
  MemoryBank bank;
  bank.vectors = Matrix(total, d);
  bank.provenance.reserve(total);
  std::size_t row = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& m = maps[i];
    for (std::size_t y = 0; y < m.height(); ++y) {
      for (std::size_t x = 0; x < m.width(); ++x) {
        std::copy_n(m.at(y, x), d, bank.vectors.row(row++));
        bank.provenance.push_back(
            {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x)});
      }
    }
  }
  return bank;
}

namespace {

Matrix random_projection(const Matrix& points, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5052));
  const std::size_t d = points.cols();
  Matrix proj(dim, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : proj.values()) v = static_cast<float>(scale * rng.normal());
  Matrix out(points.rows(), dim);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      out(i, k) = simd::dot(proj.row(k), points.row(i), d);
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint32_t> kcenter_greedy(const Matrix& points, std::size_t target_count, std::uint64_t seed,
                                          std::optional<std::size_t> projection_dim) {
  if (points.rows() == 0) {
    throw std::invalid_argument("target_count out of range: empty point set");
  }
  Rng rng(seed);
  const auto first = static_cast<std::uint32_t>(rng.below(points.rows()));
  return kcenter_greedy_from(points, target_count, first, seed, projection_dim);
}

std::vector<std::uint32_t> kcenter_greedy_from(const Matrix& points, std::size_t target_count,
                                               std::uint32_t first_index, std::uint64_t seed,
                                               std::optional<std::size_t> projection_dim) {
  const std::size_t n = points.rows();
  if (first_index >= n) {
    throw std::invalid_argument("first index out of range");
  }
  if (target_count < 1 || target_count > n) {
    throw std::invalid_argument("target_count " + std::to_string(target_count) + " out of range [1, " +
                                std::to_string(n) + "]");
  }
  Matrix projected;
  const Matrix* space = &points;
  if (projection_dim) {
    if (*projection_dim == 0) {
      throw std::invalid_argument("projection_dim must be positive");
    }
    projected = random_projection(points, *projection_dim, seed);
    space = &projected;
  }
  const std::size_t d = space->cols();
  const auto& kernels = simd::active_kernels();

  // Squared distance to the selected set; -1 marks selected points.
  std::vector<float> min_dist(n, std::numeric_limits<float>::infinity());
  std::vector<std::uint32_t> selected;
  selected.reserve(target_count);

  std::uint32_t current = first_index;
  while (true) {
    selected.push_back(current);
    min_dist[current] = -1.0f;
    if (selected.size() == target_count) break;
    const float* center = space->row(current);
    std::uint32_t best = 0;
    float best_dist = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (min_dist[i] < 0.0f) continue;
      const float dist = kernels.squared_l2(center, space->row(i), d);
      if (dist < min_dist[i]) min_dist[i] = dist;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = static_cast<std::uint32_t>(i);
      }
    }
    current = best;
  }
  return selected;
}

double coverage_radius(const Matrix& points, std::span<const std::uint32_t> selected) {
  double radius = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto s : selected) {
      best = std::min(best, static_cast<double>(simd::squared_l2(points.row(i), points.row(s), points.cols())));
    }
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

Neighbor nearest(std::span<const float> query, const Matrix& set) {
  if (set.rows() == 0) {
    throw std::invalid_argument("nearest: empty set");
  }
  if (query.size() != set.cols()) {
    throw std::invalid_argument("nearest: dimension mismatch (" + std::to_string(query.size()) + " vs " +
                                std::to_string(set.cols()) + ")");
  }
  const auto& kernels = simd::active_kernels();
  std::uint32_t best = 0;
  float best_dist = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < set.rows(); ++i) {
    const float dist = kernels.squared_l2(query.data(), set.row(i), set.cols());
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<std::uint32_t>(i);
    }
  }
  return {best, std::sqrt(best_dist)};
}

std::vector<std::uint32_t> assign_voronoi(const Matrix& c_emb, std::span<const std::uint32_t> dist_in_emb) {
  if (dist_in_emb.empty()) {
    throw std::invalid_argument("assign_voronoi: empty distribution coreset");
  }
  std::vector<char> is_center(c_emb.rows(), 0);
  Matrix centers(dist_in_emb.size(), c_emb.cols());
  for (std::size_t k = 0; k < dist_in_emb.size(); ++k) {
    const auto idx = dist_in_emb[k];
    if (idx >= c_emb.rows() || is_center[idx]) {
      throw std::invalid_argument("containment violated: distribution coreset index " + std::to_string(idx) +
                                  " is not a distinct embedding coreset row");
    }
    is_center[idx] = 1;
    std::copy_n(c_emb.row(idx), c_emb.cols(), centers.row(k));
  }
  std::vector<std::uint32_t> assignment(c_emb.rows());
  for (std::size_t i = 0; i < c_emb.rows(); ++i) {
    assignment[i] = nearest(c_emb.row_span(i), centers).index;
  }
  for (std::size_t k = 0; k < dist_in_emb.size(); ++k) {
    assignment[dist_in_emb[k]] = static_cast<std::uint32_t>(k);
  }
  return assignment;
}

void finalize_coresets(Coresets& c) {
  const std::size_t k = c.dist_in_emb.size();
  c.dist = Matrix(k, c.emb.cols());
  for (std::size_t j = 0; j < k; ++j) {
    std::copy_n(c.emb.row(c.dist_in_emb[j]), c.emb.cols(), c.dist.row(j));
  }
  c.cells.assign(k, {});
  for (std::size_t i = 0; i < c.voronoi.size(); ++i) {
    if (c.voronoi[i] >= k) {
      throw std::invalid_argument("voronoi assignment out of range");
    }
    c.cells[c.voronoi[i]].push_back(static_cast<std::uint32_t>(i));
  }
}

Coresets build_coresets(const MemoryBank& bank, const CoresetOptions& options) {
  if (bank.vectors.rows() == 0) {
    throw std::invalid_argument("empty training set");
  }
  if (!(options.emb_fraction > 0.0 && options.emb_fraction <= 1.0)) {
    throw std::invalid_argument("emb_fraction must be in (0, 1]");
  }
  if (options.dist_size == 0) {
    throw std::invalid_argument("dist_size must be positive");
  }
  const std::size_t n = bank.vectors.rows();
  const std::size_t n_emb =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(options.emb_fraction * n)), 1, n);

  Coresets c;
  c.emb_bank_index = kcenter_greedy(bank.vectors, n_emb, derive_seed(options.seed, 1), options.projection_dim);
  c.emb = Matrix(n_emb, bank.vectors.cols());
  for (std::size_t i = 0; i < n_emb; ++i) {
    std::copy_n(bank.vectors.row(c.emb_bank_index[i]), bank.vectors.cols(), c.emb.row(i));
    c.emb_provenance.push_back(bank.provenance[c.emb_bank_index[i]]);
  }
  const std::size_t n_dist = std::min(options.dist_size, n_emb);
  c.dist_in_emb = kcenter_greedy(c.emb, n_dist, derive_seed(options.seed, 2), options.projection_dim);
  c.voronoi = assign_voronoi(c.emb, c.dist_in_emb);
  finalize_coresets(c);
  return c;
}

void save_coresets(const std::filesystem::path& dir, const Coresets& c) {
  std::filesystem::create_directories(dir);
  Tensor emb({static_cast<std::uint32_t>(c.emb.rows()), static_cast<std::uint32_t>(c.emb.cols())});
  emb.data = c.emb.values();
  write_tensor(dir / "c_emb.pnit", emb);

  IndexArray prov{{static_cast<std::uint32_t>(c.emb.rows()), 4}, {}};
  for (std::size_t i = 0; i < c.emb.rows(); ++i) {
    const auto& p = c.emb_provenance[i];
    prov.data.insert(prov.data.end(), {c.emb_bank_index[i], p.image, p.y, p.x});
  }
  write_index(dir / "emb_index.pnix", prov);
  write_index(dir / "dist_index.pnix", {{static_cast<std::uint32_t>(c.dist_in_emb.size())}, c.dist_in_emb});
  write_index(dir / "voronoi.pnix", {{static_cast<std::uint32_t>(c.voronoi.size())}, c.voronoi});
}

Coresets load_coresets(const std::filesystem::path& dir) {
  Coresets c;
  const Tensor emb = read_tensor(dir / "c_emb.pnit", {.strict = true});
  if (emb.dims.size() != 2) {
    throw std::runtime_error("c_emb.pnit must be rank 2");
  }
  c.emb = Matrix(emb.dims[0], emb.dims[1]);
  c.emb.values() = emb.data;

  const IndexArray prov = read_index(dir / "emb_index.pnix");
  if (prov.dims.size() != 2 || prov.dims[0] != emb.dims[0] || prov.dims[1] != 4) {
    throw std::runtime_error("emb_index.pnix does not match c_emb.pnit");
  }
  for (std::size_t i = 0; i < prov.dims[0]; ++i) {
    c.emb_bank_index.push_back(prov.data[4 * i]);
    c.emb_provenance.push_back({prov.data[4 * i + 1], prov.data[4 * i + 2], prov.data[4 * i + 3]});
  }
  c.dist_in_emb = read_index(dir / "dist_index.pnix").data;
  c.voronoi = read_index(dir / "voronoi.pnix").data;
  if (c.voronoi.size() != c.emb.rows()) {
    throw std::runtime_error("voronoi.pnix does not match c_emb.pnit");
  }
  for (auto idx : c.dist_in_emb) {
    if (idx >= c.emb.rows()) throw std::runtime_error("dist_index.pnix references a missing C_emb row");
  }
  finalize_coresets(c);
  return c;
}

}  // namespace pni
