#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pni/tensor.hpp"

namespace pni {

struct Provenance {
  std::uint32_t image = 0;
  std::uint32_t y = 0;
  std::uint32_t x = 0;
  bool operator==(const Provenance&) const = default;
};

// Every patch feature of every training map, one row per position.
struct MemoryBank {
  Matrix vectors;
  std::vector<Provenance> provenance;
};

MemoryBank build_memory_bank(std::span<const FeatureMap> maps);

/**
 * Greedy k-center selection.
 *
 * The first index is drawn uniformly from a generator seeded with `seed`;
 * every later pick maximizes the distance to the already selected set, ties
 * going to the lowest index. With `projection_dim` set, distances are taken in
 * a seeded Gaussian random projection of that dimension instead of the input
 * space. Returns indices in selection order.
 */
std::vector<std::uint32_t> kcenter_greedy(const Matrix& points, std::size_t target_count, std::uint64_t seed,
                                          std::optional<std::size_t> projection_dim = std::nullopt);

// Same selection with an explicit first pick; `seed` then only feeds the
// random projection.
std::vector<std::uint32_t> kcenter_greedy_from(const Matrix& points, std::size_t target_count,
                                               std::uint32_t first_index, std::uint64_t seed = 0,
                                               std::optional<std::size_t> projection_dim = std::nullopt);

// Largest distance from any point to its nearest selected point.
double coverage_radius(const Matrix& points, std::span<const std::uint32_t> selected);

struct Neighbor {
  std::uint32_t index = 0;
  float distance = 0.0f;
};

// Exact Euclidean nearest row of `set`; ties go to the lowest index.
Neighbor nearest(std::span<const float> query, const Matrix& set);

// For every row of c_emb, the position (0..|C_dist|-1) of its nearest
// distribution-coreset element. `dist_in_emb[k]` is the C_emb row holding the
// k-th C_dist element; each center is assigned to itself.
std::vector<std::uint32_t> assign_voronoi(const Matrix& c_emb, std::span<const std::uint32_t> dist_in_emb);

struct CoresetOptions {
  double emb_fraction = 0.01;
  std::size_t dist_size = 2048;
  std::uint64_t seed = 0;
  std::optional<std::size_t> projection_dim;
};

// C_emb subsampled from the bank, C_dist subsampled from C_emb, and the
// Voronoi partition of C_emb around C_dist.
struct Coresets {
  Matrix emb;
  std::vector<std::uint32_t> emb_bank_index;
  std::vector<Provenance> emb_provenance;
  Matrix dist;
  std::vector<std::uint32_t> dist_in_emb;
  std::vector<std::uint32_t> voronoi;
  // cells[k] lists the C_emb rows assigned to C_dist element k.
  std::vector<std::vector<std::uint32_t>> cells;

  std::size_t dim() const { return emb.cols(); }
};

Coresets build_coresets(const MemoryBank& bank, const CoresetOptions& options);

// Rebuild `dist` and `cells` from emb/dist_in_emb/voronoi.
void finalize_coresets(Coresets& c);

// c_emb.pnit + emb_index.pnix (bank index, image, y, x) + dist_index.pnix +
// voronoi.pnix, all inside `dir`.
void save_coresets(const std::filesystem::path& dir, const Coresets& c);
Coresets load_coresets(const std::filesystem::path& dir);

}  // namespace pni
