// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "pni/benchmark.hpp"
#include "pni/commands.hpp"
#include "pni/coreset.hpp"
#include "pni/eval.hpp"
#include "pni/pipeline.hpp"
#include "pni/refine.hpp"
#include "pni/scoring.hpp"
#include "pni/tensorio.hpp"

using namespace pni;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and limits.
constexpr double kCoresetSeconds = 1.0;
constexpr double kNearestSeconds = 1.0;
constexpr double kGradSeconds = 30.0;
constexpr double kGradRelErr = 1e-3;
constexpr std::size_t kGradMaxParams = 1000;
constexpr double kLikelihoodFormTol = 1e-9;
constexpr double kAurocTol = 1e-12;
constexpr double kClaimSeconds = 300.0;
constexpr double kFullPermuteMin = 0.90;
constexpr double kBaselinePermuteMax = 0.60;
constexpr double kBlobMin = 0.90;
constexpr double kKernelSumTol = 1e-9;
constexpr double kConstantTol = 1e-6;
constexpr double kFuseTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << secs << " s)  " << o.detail;
  std::cout << line.str() << std::endl;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Matrix m(n, d);
  Rng rng(seed);
  for (auto& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Outcome coreset_oracle() {
  const auto t0 = Clock::now();
  const Matrix pts = random_points(100, 2, 2024);
  bool ok = true;
  for (std::size_t k : {5u, 10u, 25u}) {
    const auto got = kcenter_greedy(pts, k, 2024);
    Rng rng(2024);
    ok &= got == oracle::kcenter(pts, k, static_cast<std::uint32_t>(rng.below(100)));
  }
  const double secs = seconds_since(t0);
  return {ok && secs < kCoresetSeconds, std::string(ok ? "indices match" : "index mismatch") + " for k=5,10,25"};
}

Outcome nearest_oracle() {
  const auto t0 = Clock::now();
  const Matrix set = random_points(500, 64, 31);
  const Matrix queries = random_points(500, 64, 32);
  std::size_t bad = 0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    bad += nearest(queries.row_span(q), set).index != oracle::nearest(queries.row(q), set);
  }
  const auto centers = kcenter_greedy(set, 50, 33);
  const auto vor = assign_voronoi(set, centers);
  Matrix cset(centers.size(), 64);
  for (std::size_t k = 0; k < centers.size(); ++k) std::copy_n(set.row(centers[k]), 64, cset.row(k));
  for (std::size_t i = 0; i < set.rows(); ++i) bad += vor[i] != oracle::nearest(set.row(i), cset);
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < kNearestSeconds, std::to_string(bad) + " mismatches over 500 queries + 500 assignments"};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t max_params = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    // Alternate a 3-layer and a 2-layer instance.
    const MlpArchitecture arch = seed % 2 ? MlpArchitecture{6, 8, 3, 4} : MlpArchitecture{8, 12, 2, 5};
    const auto r = oracle::mlp_gradient_check(seed, arch);
    worst = std::max(worst, r.max_rel_err);
    max_params = std::max(max_params, r.params);
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelErr && max_params <= kGradMaxParams && secs < kGradSeconds,
          "max rel err " + fmt(worst) + ", params <= " + std::to_string(max_params)};
}

Outcome likelihood_contract() {
  const Matrix emb = random_points(200, 8, 41);
  Coresets c;
  c.emb = emb;
  c.emb_bank_index.resize(emb.rows());
  c.emb_provenance.resize(emb.rows());
  c.dist_in_emb = kcenter_greedy(emb, 16, 41);
  c.voronoi = assign_voronoi(c.emb, c.dist_in_emb);
  finalize_coresets(c);
  const std::size_t K = c.dist.rows();
  Rng rng(42);
  ScoreParams params;
  const double tau = params.tau_for(K);
  std::size_t out_of_range = 0, empty = 0;
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<float> phi(8);
    const double spread = 0.1 + 3.0 * rng.uniform();
    for (auto& v : phi) v = static_cast<float>(spread * rng.normal());
    // Priors from dense to nearly one-hot.
    std::vector<double> prior(K);
    const double sharp = std::exp(4.0 * rng.uniform());
    double sum = 0.0;
    for (auto& v : prior) {
      v = std::pow(rng.uniform(), sharp);
      sum += v;
    }
    for (auto& v : prior) v /= sum;
    std::size_t alive = 0;
    for (double v : prior) alive += threshold_fn(v, tau);
    empty += alive == 0;
    const double l = feature_likelihood(phi, prior, c, params);
    out_of_range += !(l > 0.0 && l <= 1.0);
    if (alive > 0) worst = std::max(worst, std::abs(feature_score(phi, prior, c, params) + std::log(l)));
  }
  return {out_of_range == 0 && empty == 0 && worst <= kLikelihoodFormTol,
          std::to_string(out_of_range) + " out of (0,1], " + std::to_string(empty) +
              " empty thresholds, max |simplified - direct| " + fmt(worst)};
}

Outcome metric_oracle() {
  Rng rng(51);
  LabeledScores s;
  for (int i = 0; i < 200; ++i) {
    const bool pos = rng.uniform() < 0.5;
    s.add(std::round((rng.normal() + (pos ? 0.7 : 0.0)) * 4.0) / 4.0, pos);
  }
  const double diff = std::abs(auroc(s) - oracle::auroc_pairs(s.scores, s.labels));
  LabeledScores ex;
  const double sc[] = {0.1, 0.4, 0.35, 0.8};
  const bool lb[] = {false, false, true, true};
  for (int i = 0; i < 4; ++i) ex.add(sc[i], lb[i]);
  const double a = auroc(ex);
  return {diff <= kAurocTol && a == 0.75, "|rank - pairwise| " + fmt(diff) + ", example " + fmt(a)};
}

PipelineConfig desk_config(std::uint64_t seed) {
  PipelineConfig cfg = load_config(fs::path(PNI_SOURCE_DIR) / "configs" / "desk.conf");
  cfg.seed = seed;
  return cfg;
}

struct ClaimMetrics {
  double image_auroc = 0.0;
  double pixel_permute = 0.0;
  double pixel_blob = 0.0;
};

// Pixel AUROC of one anomaly kind is pooled with the normal test images.
ClaimMetrics evaluate(const Benchmark& bench, const std::vector<ScoredMap>& maps) {
  LabeledScores image, normal_px;
  std::map<AnomalyKind, LabeledScores> kind_px;
  for (std::size_t i = 0; i < bench.test.size(); ++i) {
    const auto& s = bench.test[i];
    image.add(maps[i].image_score, s.kind != AnomalyKind::kNormal);
    LabeledScores& px = s.kind == AnomalyKind::kNormal ? normal_px : kind_px[s.kind];
    for (std::size_t p = 0; p < s.mask.size(); ++p) px.add(maps[i].map.values()[p], s.mask.values()[p] > 0.5f);
  }
  auto pooled = [&](AnomalyKind k) {
    LabeledScores all = normal_px;
    all.scores.insert(all.scores.end(), kind_px[k].scores.begin(), kind_px[k].scores.end());
    all.labels.insert(all.labels.end(), kind_px[k].labels.begin(), kind_px[k].labels.end());
    return auroc(all);
  };
  return {auroc(image), pooled(AnomalyKind::kPermute), pooled(AnomalyKind::kBlob)};
}

Outcome central_claim() {
  const auto t0 = Clock::now();
  const std::pair<bool, bool> settings[] = {{true, true}, {true, false}, {false, true}, {false, false}};
  std::size_t ordering_holds = 0;
  ClaimMetrics seed0[4];
  std::ostringstream seeds;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PipelineConfig cfg = desk_config(seed);
    const Benchmark bench = generate_benchmark(cfg.bench_spec());
    std::vector<FeatureMap> train, test;
    for (const auto& s : bench.train) train.push_back(image_features(cfg, s.image));
    for (const auto& s : bench.test) test.push_back(image_features(cfg, s.image));
    const TrainedModels models = fit_models(cfg, train);
    const std::size_t px = cfg.crop_to;
    ClaimMetrics m[4];
    for (int k = 0; k < 4; ++k) {
      PipelineConfig sc = cfg;
      sc.use_position = settings[k].first;
      sc.use_neighbor = settings[k].second;
      std::vector<ScoredMap> maps;
      for (const auto& f : test) maps.push_back(score_features(sc, models, f, px, px));
      m[k] = evaluate(bench, maps);
      if (seed == 0) seed0[k] = m[k];
    }
    const double full = m[0].image_auroc, pos = m[1].image_auroc, nbr = m[2].image_auroc, base = m[3].image_auroc;
    const bool holds = base < pos && base < nbr && pos <= full && nbr <= full;
    ordering_holds += holds;
    seeds << " s" << seed << "[" << fmt(full) << "/" << fmt(pos) << "/" << fmt(nbr) << "/" << fmt(base)
          << (holds ? "" : " x") << "]";
  }
  const double secs = seconds_since(t0);
  const bool pixel_ok = seed0[0].pixel_permute >= kFullPermuteMin && seed0[3].pixel_permute <= kBaselinePermuteMax &&
                        seed0[0].pixel_blob >= kBlobMin && seed0[3].pixel_blob >= kBlobMin;
  const bool order_ok = ordering_holds >= 3;
  return {pixel_ok && order_ok && secs < kClaimSeconds,
          "seed 0 permute px full " + fmt(seed0[0].pixel_permute) + " base " + fmt(seed0[3].pixel_permute) +
              "; blob px full " + fmt(seed0[0].pixel_blob) + " base " + fmt(seed0[3].pixel_blob) +
              "; image AUROC full/pos/nbr/base" + seeds.str() + "; ordering " + std::to_string(ordering_holds) +
              "/5"};
}

Outcome post_processing() {
  double worst_sum = 0.0;
  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto k = gaussian_kernel(s);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(k.begin(), k.end(), 0.0) - 1.0));
  }
  const Map2D flat(20, 17, 0.37f);
  double worst_const = 0.0;
  for (float v : gaussian_smooth(flat, 8.0).values()) worst_const = std::max(worst_const, std::abs(v - 0.37));
  const Map2D up = upsample_bilinear(flat, 61, 43);
  for (float v : up.values()) worst_const = std::max(worst_const, std::abs(v - 0.37));
  Map2D r(9, 11);
  Rng rng(61);
  for (auto& v : r.values()) v = static_cast<float>(rng.normal());
  const Map2D same = upsample_bilinear(r, 9, 11);
  double worst_id = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) worst_id = std::max(worst_id, std::abs(double(same.values()[i]) - r.values()[i]));
  return {worst_sum <= kKernelSumTol && worst_const <= kConstantTol && worst_id <= kConstantTol,
          "kernel sum err " + fmt(worst_sum) + ", constant err " + fmt(worst_const) + ", identity err " +
              fmt(worst_id)};
}

class TruthRefiner final : public Refiner {
 public:
  explicit TruthRefiner(Map2D t) : t_(std::move(t)) {}
  std::string name() const override { return "truth"; }
  Map2D refine(const Image&, const Map2D&) override { return t_; }

 private:
  Map2D t_;
};

Outcome refinement_math() {
  Map2D a(6, 7);
  Rng rng(71);
  for (auto& v : a.values()) v = static_cast<float>(rng.uniform());
  const auto zero = refine_loss(a, a);
  const bool zero_ok = zero.reg == 0.0 && zero.grad == 0.0 && zero.total == 0.0;

  Map2D one(1, 2), nil(1, 2, 0.0f);
  one(0, 0) = 1.0f;
  const double hand = refine_loss(one, nil).total;

  Image clean(8, 8, 3), defect(8, 8, 3, 0.9f);
  for (auto& v : clean.values()) v = static_cast<float>(rng.uniform());
  const bool composite_ok = composite_anomaly(clean, defect, Map2D(8, 8, 0.0f)) == clean;

  const std::vector<double> ah(16, 0.5), at(16, 1.0);
  double fuse_err = 0.0;
  for (double v : fuse_refined(ah, at, 0.1)) fuse_err = std::max(fuse_err, std::abs(v - 0.55));

  Rng mrng(72);
  const Map2D mask = generate_defect_mask(mrng, 48, 48, {2, 3}, {0.2, 0.4});
  Map2D est(48, 48);
  for (std::size_t i = 0; i < est.size(); ++i) {
    est.values()[i] = static_cast<float>(std::clamp(0.35 + 0.3 * mask.values()[i] + 0.2 * mrng.normal(), 0.0, 1.0));
  }
  TruthRefiner truth(mask);
  const Map2D fused = fuse_refined(est, apply_refiner(truth, Image(48, 48, 3), est), 0.1);
  LabeledScores before, after;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    before.add(est.values()[i], mask.values()[i] == 1.0f);
    after.add(fused.values()[i], mask.values()[i] == 1.0f);
  }
  const double b = auroc(before), f = auroc(after);
  return {zero_ok && hand == 1.0 && composite_ok && fuse_err <= kFuseTol && f > b,
          "1x2 total " + fmt(hand) + ", fuse err " + fmt(fuse_err) + ", AUROC " + fmt(b) + " -> " + fmt(f)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "pni_acceptance_determinism";
  fs::remove_all(root);
  const PipelineConfig cfg = desk_config(0);
  std::ostringstream log;
  cmd_synth(cfg, root / "data", log);
  cmd_fit(cfg, root / "data", root / "a", log);
  cmd_fit(cfg, root / "data", root / "b", log);
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    differ += slurp(e.path()) != slurp(root / "b" / fs::relative(e.path(), root / "a"));
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "b")) files_b += e.is_regular_file();
  fs::remove_all(root);
  return {differ == 0 && files == files_b && files > 0,
          std::to_string(files) + " model files, " + std::to_string(differ) + " differ"};
}

Outcome serialization() {
  Rng rng(81);
  std::size_t bad = 0;
  const fs::path dir = fs::temp_directory_path() / "pni_acceptance_pnit";
  fs::create_directories(dir);
  for (int i = 0; i < 100; ++i) {
    const std::size_t rank = 1 + static_cast<std::size_t>(i % 4);
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::uint32_t>(1 + rng.below(rank == 1 ? 300 : 12));
    Tensor t(dims);
    for (auto& v : t.data) {
      std::uint32_t bits = static_cast<std::uint32_t>(rng.next_u64());
      std::memcpy(&v, &bits, 4);
      if (!std::isfinite(v)) v = static_cast<float>(rng.normal());
    }
    write_tensor(dir / "t.pnit", t);
    const Tensor back = read_tensor(dir / "t.pnit");
    bad += back.dims != t.dims || std::memcmp(back.data.data(), t.data.data(), t.data.size() * 4) != 0;
  }
  fs::remove_all(dir);
  return {bad == 0, std::to_string(bad) + " of 100 tensors differ"};
}

}  // namespace

int main() {
  report("coreset k-center oracle", coreset_oracle);
  report("nearest/Voronoi oracle", nearest_oracle);
  report("MLP gradient check", gradient_check);
  report("likelihood contract", likelihood_contract);
  report("AUROC oracle", metric_oracle);
  report("central claim at desk scale", central_claim);
  report("post-processing", post_processing);
  report("refinement math", refinement_math);
  report("fit determinism", determinism);
  report("PNIT serialization", serialization);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
