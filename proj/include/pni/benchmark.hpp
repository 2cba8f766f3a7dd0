#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pni/tensor.hpp"

namespace pni {

enum class AnomalyKind { kNormal, kPermute, kBlob };

std::string to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(const std::string& s);

/**
 * Synthetic scene: a grid x grid board of square cells, each rendered as one
 * of `tokens` textures. Tokens occupy rectangular regions, so which token is
 * normal depends only on position. Every token uses the same four palette
 * colors, arranged differently over the 2x2 sub-blocks of each half-cell, so
 * tokens agree in coarse statistics and differ only in fine layout.
 */
struct BenchSpec {
  std::size_t grid = 8;
  std::size_t cell_px = 8;
  std::size_t tokens = 4;
  double noise = 0.04;
  std::size_t train_count = 60;
  std::size_t test_normal = 16;
  std::size_t test_permute = 12;
  std::size_t test_blob = 12;
  std::uint64_t seed = 0;

  std::size_t image_px() const { return grid * cell_px; }
  std::size_t test_count() const { return test_normal + test_permute + test_blob; }
  // Throws std::invalid_argument when the spec cannot be rendered.
  void validate() const;
};

struct BenchSample {
  Image image;
  Map2D mask;  // image resolution, 0/1
  AnomalyKind kind = AnomalyKind::kNormal;
};

struct Benchmark {
  BenchSpec spec;
  std::vector<BenchSample> train;
  std::vector<BenchSample> test;
};

// Token index of every cell in a normal scene, row-major grid x grid.
std::vector<std::size_t> token_layout(const BenchSpec& spec);

// Noise-free rendering of a board given per-cell tokens.
Image render_board(const BenchSpec& spec, const std::vector<std::size_t>& cell_tokens);

Benchmark generate_benchmark(const BenchSpec& spec);

/**
 * On disk: train/NNNN.ppm, test/NNNN.ppm, test/NNNN_mask.pgm and a
 * tab-separated manifest.tsv with columns split, kind, label, image, mask
 * (paths relative to the dataset root, "-" for no mask).
 */
struct ManifestEntry {
  std::string split;
  AnomalyKind kind = AnomalyKind::kNormal;
  std::string image;
  std::string mask;
};

void write_benchmark(const std::filesystem::path& root, const Benchmark& bench);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root);

}  // namespace pni
