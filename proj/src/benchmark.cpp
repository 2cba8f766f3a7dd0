#include "pni/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "pni/image.hpp"
#include "pni/random.hpp"

namespace pni {

namespace {

using Rgb = std::array<float, 3>;

constexpr std::array<Rgb, 4> kPalette = {{
    {0.90f, 0.15f, 0.15f},
    {0.15f, 0.80f, 0.20f},
    {0.15f, 0.25f, 0.90f},
    {0.90f, 0.85f, 0.15f},
}};

constexpr std::array<Rgb, 3> kBlobColors = {{
    {0.05f, 0.05f, 0.05f},
    {1.00f, 1.00f, 1.00f},
    {0.10f, 0.90f, 0.90f},
}};

// Color order over the four 2x2-pixel sub-blocks for each token. The first
// four are cyclic shifts, so any two of them differ in every sub-block.
std::vector<std::array<int, 4>> token_arrangements() {
  std::vector<std::array<int, 4>> out;
  for (int k = 0; k < 4; ++k) out.push_back({k % 4, (k + 1) % 4, (k + 2) % 4, (k + 3) % 4});
  std::array<int, 4> perm = {0, 1, 2, 3};
  do {
    if (std::find(out.begin(), out.end(), perm) == out.end()) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::pair<std::size_t, std::size_t> region_grid(std::size_t tokens) {
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= tokens; ++r) {
    if (tokens % r == 0) rows = r;
  }
  return {rows, tokens / rows};
}

std::string index_name(std::size_t i) {
  std::ostringstream s;
  s << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

void add_noise(Image& image, double amplitude, Rng& rng) {
  for (float& v : image.values()) {
    v = std::clamp(static_cast<float>(v + rng.uniform(-amplitude, amplitude)), 0.0f, 1.0f);
  }
}

// Cells whose in-bounds 8-neighbors all share the cell's token.
std::vector<std::size_t> interior_cells(const BenchSpec& spec, const std::vector<std::size_t>& layout,
                                        std::size_t token) {
  std::vector<std::size_t> out;
  const auto g = static_cast<std::ptrdiff_t>(spec.grid);
  for (std::ptrdiff_t r = 0; r < g; ++r) {
    for (std::ptrdiff_t c = 0; c < g; ++c) {
      if (layout[static_cast<std::size_t>(r * g + c)] != token) continue;
      bool ok = true;
      for (std::ptrdiff_t dr = -1; dr <= 1 && ok; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1 && ok; ++dc) {
          const std::ptrdiff_t rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= g || cc < 0 || cc >= g) continue;
          ok = layout[static_cast<std::size_t>(rr * g + cc)] == token;
        }
      }
      if (ok) out.push_back(static_cast<std::size_t>(r * g + c));
    }
  }
  return out;
}

}  // namespace

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kNormal: return "normal";
    case AnomalyKind::kPermute: return "permute";
    case AnomalyKind::kBlob: return "blob";
  }
  return "normal";
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
  if (s == "normal") return AnomalyKind::kNormal;
  if (s == "permute") return AnomalyKind::kPermute;
  if (s == "blob") return AnomalyKind::kBlob;
  throw std::invalid_argument("unknown anomaly kind '" + s + "'");
}

void BenchSpec::validate() const {
  if (tokens < 2) throw std::invalid_argument("benchmark needs at least 2 tokens (regions)");
  if (tokens > 24) throw std::invalid_argument("benchmark supports at most 24 tokens");
  if (cell_px < 4 || cell_px % 4 != 0) throw std::invalid_argument("cell_px must be a positive multiple of 4");
  if (!(noise >= 0.0 && noise < 0.2)) throw std::invalid_argument("noise must lie in [0, 0.2)");
  if (train_count == 0) throw std::invalid_argument("benchmark needs training images");
  const auto [rows, cols] = region_grid(tokens);
  if (grid % rows != 0 || grid % cols != 0) {
    throw std::invalid_argument("grid " + std::to_string(grid) + " cannot be split into " + std::to_string(rows) +
                                "x" + std::to_string(cols) + " token regions");
  }
  if (grid / rows < 3 || grid / cols < 3) {
    throw std::invalid_argument("token regions must be at least 3 cells wide");
  }
}

std::vector<std::size_t> token_layout(const BenchSpec& spec) {
  const auto [rows, cols] = region_grid(spec.tokens);
  std::vector<std::size_t> layout(spec.grid * spec.grid);
  for (std::size_t r = 0; r < spec.grid; ++r) {
    for (std::size_t c = 0; c < spec.grid; ++c) {
      layout[r * spec.grid + c] = (r / (spec.grid / rows)) * cols + c / (spec.grid / cols);
    }
  }
  return layout;
}

Image render_board(const BenchSpec& spec, const std::vector<std::size_t>& cell_tokens) {
  static const auto arrangements = token_arrangements();
  const std::size_t px = spec.image_px();
  Image image(px, px, 3);
  for (std::size_t y = 0; y < px; ++y) {
    for (std::size_t x = 0; x < px; ++x) {
      const std::size_t token = cell_tokens[(y / spec.cell_px) * spec.grid + x / spec.cell_px];
      const std::size_t sub = ((y / 2) % 2) * 2 + (x / 2) % 2;
      const Rgb& color = kPalette[static_cast<std::size_t>(arrangements[token][sub])];
      for (std::size_t ch = 0; ch < 3; ++ch) image(y, x, ch) = color[ch];
    }
  }
  return image;
}

Benchmark generate_benchmark(const BenchSpec& spec) {
  spec.validate();
  const auto layout = token_layout(spec);
  const std::size_t px = spec.image_px();
  Benchmark bench;
  bench.spec = spec;

  auto normal_sample = [&](Rng& rng) {
    BenchSample s;
    s.image = render_board(spec, layout);
    add_noise(s.image, spec.noise, rng);
    s.mask = Map2D(px, px);
    return s;
  };

  for (std::size_t i = 0; i < spec.train_count; ++i) {
    Rng rng(derive_seed(spec.seed, 1000 + i));
    bench.train.push_back(normal_sample(rng));
  }

  for (std::size_t i = 0; i < spec.test_count(); ++i) {
    Rng rng(derive_seed(spec.seed, 100000 + i));
    BenchSample s;
    if (i < spec.test_normal) {
      s = normal_sample(rng);
    } else if (i < spec.test_normal + spec.test_permute) {
      // Swap the tokens of two interior cells from different regions.
      const std::size_t ta = rng.below(spec.tokens);
      std::size_t tb = rng.below(spec.tokens - 1);
      if (tb >= ta) ++tb;
      const auto ca = interior_cells(spec, layout, ta);
      const auto cb = interior_cells(spec, layout, tb);
      const std::size_t a = ca[rng.below(ca.size())];
      const std::size_t b = cb[rng.below(cb.size())];
      auto cells = layout;
      std::swap(cells[a], cells[b]);
      s.kind = AnomalyKind::kPermute;
      s.image = render_board(spec, cells);
      add_noise(s.image, spec.noise, rng);
      s.mask = Map2D(px, px);
      for (std::size_t cell : {a, b}) {
        const std::size_t r0 = (cell / spec.grid) * spec.cell_px, c0 = (cell % spec.grid) * spec.cell_px;
        for (std::size_t y = r0; y < r0 + spec.cell_px; ++y) {
          for (std::size_t x = c0; x < c0 + spec.cell_px; ++x) s.mask(y, x) = 1.0f;
        }
      }
    } else {
      s = normal_sample(rng);
      s.kind = AnomalyKind::kBlob;
      const double scale = static_cast<double>(spec.cell_px) / 8.0;
      const double radius = rng.uniform(3.0, 6.0) * scale;
      const double cy = rng.uniform(radius, static_cast<double>(px) - radius);
      const double cx = rng.uniform(radius, static_cast<double>(px) - radius);
      const Rgb& color = kBlobColors[rng.below(kBlobColors.size())];
      for (std::size_t y = 0; y < px; ++y) {
        for (std::size_t x = 0; x < px; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
          if (dy * dy + dx * dx > radius * radius) continue;
          s.mask(y, x) = 1.0f;
          for (std::size_t ch = 0; ch < 3; ++ch) {
            s.image(y, x, ch) =
                std::clamp(static_cast<float>(color[ch] + rng.uniform(-spec.noise, spec.noise)), 0.0f, 1.0f);
          }
        }
      }
    }
    bench.test.push_back(std::move(s));
  }
  return bench;
}

void write_benchmark(const std::filesystem::path& root, const Benchmark& bench) {
  std::filesystem::create_directories(root / "train");
  std::filesystem::create_directories(root / "test");
  std::ofstream manifest(root / "manifest.tsv", std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write " + (root / "manifest.tsv").string());
  manifest << "split\tkind\tlabel\timage\tmask\n";
  for (std::size_t i = 0; i < bench.train.size(); ++i) {
    const std::string img = "train/" + index_name(i) + ".ppm";
    write_pnm(root / img, bench.train[i].image);
    manifest << "train\tnormal\t0\t" << img << "\t-\n";
  }
  for (std::size_t i = 0; i < bench.test.size(); ++i) {
    const auto& s = bench.test[i];
    const std::string img = "test/" + index_name(i) + ".ppm";
    const std::string mask = "test/" + index_name(i) + "_mask.pgm";
    write_pnm(root / img, s.image);
    Image m(s.mask.height(), s.mask.width(), 1);
    m.values() = s.mask.values();
    write_pnm(root / mask, m);
    manifest << "test\t" << to_string(s.kind) << "\t" << (s.kind == AnomalyKind::kNormal ? 0 : 1) << "\t" << img
             << "\t" << mask << "\n";
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.tsv");
  if (!in) throw std::runtime_error("missing manifest " + (root / "manifest.tsv").string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string kind, label;
    if (!std::getline(fields, e.split, '\t') || !std::getline(fields, kind, '\t') ||
        !std::getline(fields, label, '\t') || !std::getline(fields, e.image, '\t') ||
        !std::getline(fields, e.mask, '\t')) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + " is malformed");
    }
    e.kind = parse_anomaly_kind(kind);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace pni
