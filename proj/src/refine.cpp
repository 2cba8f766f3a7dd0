#include "pni/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "pni/tensorio.hpp"

namespace pni {

namespace {

constexpr std::size_t kPolygonVertices = 24;

struct Point {
  double x, y;
};

// Radii of a closed random walk, circularly smoothed so the outline stays blobby.
std::vector<double> walk_radii(Rng& rng) {
  std::vector<double> r(kPolygonVertices);
  double v = 0.0;
  for (auto& x : r) {
    v += 0.35 * rng.normal();
    x = v;
  }
  // Remove the drift so the walk closes on itself.
  const double drift = r.back() / static_cast<double>(kPolygonVertices);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= drift * static_cast<double>(i + 1);
  std::vector<double> s(kPolygonVertices);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::size_t n = r.size();
    s[i] = (r[(i + n - 1) % n] + 2.0 * r[i] + r[(i + 1) % n]) / 4.0;
  }
  for (auto& x : s) x = std::exp(std::clamp(x, -0.7, 0.7));
  const double mx = *std::max_element(s.begin(), s.end());
  for (auto& x : s) x /= mx;
  return s;
}

bool inside(const std::vector<Point>& poly, double px, double py) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

}  // namespace

Map2D generate_defect_mask(Rng& rng, std::size_t height, std::size_t width,
                           std::pair<std::size_t, std::size_t> n_patterns, std::pair<double, double> scale) {
  if (height < 8 || width < 8) throw std::invalid_argument("defect canvas must be at least 8x8");
  if (n_patterns.first < 1 || n_patterns.second < n_patterns.first) {
    throw std::invalid_argument("invalid pattern count range");
  }
  if (!(scale.first > 0.0) || scale.second < scale.first) throw std::invalid_argument("invalid scale range");

  Map2D mask(height, width);
  const std::size_t count = n_patterns.first + rng.below(n_patterns.second - n_patterns.first + 1);
  const double side = static_cast<double>(std::min(height, width));
  for (std::size_t p = 0; p < count; ++p) {
    const auto radii = walk_radii(rng);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = 0.5 * side * rng.uniform(scale.first, scale.second);
    const double cx = rng.uniform(0.0, static_cast<double>(width));
    const double cy = rng.uniform(0.0, static_cast<double>(height));
    std::vector<Point> poly(kPolygonVertices);
    for (std::size_t i = 0; i < kPolygonVertices; ++i) {
      const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / kPolygonVertices;
      poly[i] = {cx + radius * radii[i] * std::cos(a), cy + radius * radii[i] * std::sin(a)};
    }
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - radius)));
    const auto y1 = static_cast<std::size_t>(std::min(static_cast<double>(height), std::ceil(cy + radius) + 1));
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - radius)));
    const auto x1 = static_cast<std::size_t>(std::min(static_cast<double>(width), std::ceil(cx + radius) + 1));
    bool any = false;
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        if (inside(poly, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          mask(y, x) = 1.0f;
          any = true;
        }
      }
    }
    if (!any) {
      mask(std::min(height - 1, static_cast<std::size_t>(cy)), std::min(width - 1, static_cast<std::size_t>(cx))) =
          1.0f;
    }
  }
  return mask;
}

Image composite_anomaly(const Image& clean, const Image& defect, const Map2D& mask) {
  if (!clean.same_shape(defect) || mask.height() != clean.height() || mask.width() != clean.width()) {
    throw std::invalid_argument("composite shape mismatch");
  }
  Image out = clean;
  for (std::size_t y = 0; y < clean.height(); ++y) {
    for (std::size_t x = 0; x < clean.width(); ++x) {
      const float a = mask(y, x);
      if (a != 0.0f && a != 1.0f) throw std::invalid_argument("composite mask must be binary");
      if (a == 1.0f) {
        for (std::size_t c = 0; c < clean.channels(); ++c) out(y, x, c) = defect(y, x, c);
      }
    }
  }
  return out;
}

RefineLoss refine_loss(const Map2D& refined, const Map2D& target) {
  if (!refined.same_shape(target)) throw std::invalid_argument("refine loss shape mismatch");
  const std::size_t h = target.height(), w = target.width();
  const double hw = static_cast<double>(h * w);
  double reg = 0.0, gv = 0.0, gh = 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double e = static_cast<double>(refined(y, x)) - target(y, x);
      reg += e * e;
      if (y + 1 < h) {
        const double d = (static_cast<double>(refined(y + 1, x)) - refined(y, x)) -
                         (static_cast<double>(target(y + 1, x)) - target(y, x));
        gv += d * d;
      }
      if (x + 1 < w) {
        const double d = (static_cast<double>(refined(y, x + 1)) - refined(y, x)) -
                         (static_cast<double>(target(y, x + 1)) - target(y, x));
        gh += d * d;
      }
    }
  }
  RefineLoss out;
  out.reg = std::sqrt(reg) / hw;
  out.grad = (std::sqrt(gv) + std::sqrt(gh)) / hw;
  out.total = out.reg + out.grad;
  return out;
}

Map2D normalize_map(const Map2D& map, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("normalization requires min < max");
  Map2D out(map.height(), map.width());
  for (std::size_t i = 0; i < map.size(); ++i) {
    out.values()[i] = static_cast<float>(std::clamp((map.values()[i] - lo) / (hi - lo), 0.0, 1.0));
  }
  return out;
}

std::vector<double> fuse_refined(std::span<const double> a_hat, std::span<const double> a_tilde, double ratio) {
  if (a_hat.size() != a_tilde.size()) throw std::invalid_argument("fuse shape mismatch");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("fuse ratio must lie in [0, 1]");
  std::vector<double> out(a_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - ratio) * a_hat[i] + ratio * a_tilde[i];
  return out;
}

Map2D fuse_refined(const Map2D& a_hat, const Map2D& a_tilde, double ratio) {
  if (!a_hat.same_shape(a_tilde)) throw std::invalid_argument("fuse shape mismatch");
  const std::vector<double> h(a_hat.values().begin(), a_hat.values().end());
  const std::vector<double> t(a_tilde.values().begin(), a_tilde.values().end());
  const auto fused = fuse_refined(h, t, ratio);
  Map2D out(a_hat.height(), a_hat.width());
  std::transform(fused.begin(), fused.end(), out.values().begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

Map2D FileBridgeRefiner::refine(const Image& image, const Map2D& a_hat) {
  std::filesystem::create_directories(dir_);
  const auto out_path = dir_ / "refined_map.pnit";
  std::filesystem::remove(out_path);
  write_tensor(dir_ / "input_image.pnit", to_tensor(image));
  write_tensor(dir_ / "input_map.pnit", to_tensor(a_hat));
  const std::string cmd = command_ + " '" + dir_.string() + "'";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw std::runtime_error("bridge command exited with status " + std::to_string(rc));
  if (!std::filesystem::exists(out_path)) {
    throw std::runtime_error("bridge did not write " + out_path.string());
  }
  return map_from_tensor(read_tensor(out_path, {.strict = true}));
}

std::unique_ptr<Refiner> refiner_from_env(const std::filesystem::path& bridge_dir) {
  const char* cmd = std::getenv("PNI_BRIDGE_CMD");
  if (!cmd || !*cmd) return nullptr;
  return std::make_unique<FileBridgeRefiner>(bridge_dir, cmd);
}

Map2D apply_refiner(Refiner& refiner, const Image& image, const Map2D& a_hat) {
  if (image.height() != a_hat.height() || image.width() != a_hat.width()) {
    throw std::invalid_argument("image and map resolution differ");
  }
  Map2D out;
  try {
    out = refiner.refine(image, a_hat);
  } catch (const std::exception& e) {
    throw std::runtime_error("refiner '" + refiner.name() + "' failed: " + e.what());
  }
  if (!out.same_shape(a_hat)) {
    throw std::runtime_error("refiner '" + refiner.name() + "' returned a map of the wrong shape");
  }
  for (float v : out.values()) {
    if (!std::isfinite(v)) throw std::runtime_error("refiner '" + refiner.name() + "' returned non-finite values");
  }
  return out;
}

}  // namespace pni
