#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pni/eval.hpp"
#include "pni/random.hpp"

using namespace pni;

namespace {

LabeledScores make(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  LabeledScores out;
  for (std::size_t i = 0; i < s.size(); ++i) out.add(s[i], y[i] != 0);
  return out;
}

LabeledScores random_scores(Rng& rng, std::size_t n, bool ties) {
  LabeledScores out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = rng.uniform() < 0.4;
    double s = rng.normal() + (pos ? 0.8 : 0.0);
    if (ties) s = std::round(s * 2.0) / 2.0;
    out.add(s, pos);
  }
  if (std::count(out.labels.begin(), out.labels.end(), 1) == 0) out.labels[0] = 1;
  if (std::count(out.labels.begin(), out.labels.end(), 0) == 0) out.labels[0] = 0;
  return out;
}

// Area under the ROC polyline traced by sweeping the threshold over distinct scores.
double trapezoid_auroc(const LabeledScores& s) {
  std::set<double, std::greater<>> cuts(s.scores.begin(), s.scores.end());
  const double P = static_cast<double>(std::count(s.labels.begin(), s.labels.end(), 1));
  const double N = static_cast<double>(s.size()) - P;
  double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  for (double c : cuts) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i] >= c) (s.labels[i] ? tp : fp) += 1.0;
    }
    const double tpr = tp / P, fpr = fp / N;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

}  // namespace

TEST_CASE("AUROC examples") {
  CHECK(auroc(make({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})) == 1.0);
  CHECK(auroc(make({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})) == doctest::Approx(0.75));
  CHECK(auroc(make({1, 1, 1, 1}, {0, 1, 0, 1})) == 0.5);
  CHECK_THROWS_AS(auroc(make({1, 2}, {1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(auroc(make({1, 2}, {0, 0})), std::invalid_argument);
}

TEST_CASE("AUROC agrees with oracles and invariants") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_scores(rng, 200, t % 2 == 0);
    const double a = auroc(s);
    CHECK(a == doctest::Approx(oracle::auroc_pairs(s.scores, s.labels)).epsilon(1e-12));
    CHECK(std::abs(a - trapezoid_auroc(s)) <= 1e-12);

    LabeledScores mono = s;
    for (auto& v : mono.scores) v = std::exp(0.5 * v) * 3.0 + 1.0;
    CHECK(auroc(mono) == doctest::Approx(a).epsilon(1e-12));
  }
  const auto s = random_scores(rng, 150, false);
  LabeledScores flipped = s;
  for (auto& y : flipped.labels) y = 1 - y;
  CHECK(auroc(s) + auroc(flipped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("F1-optimal threshold") {
  const auto basic = f1_optimal_threshold(make({0, 1}, {0, 1}));
  CHECK(basic.threshold == 0.5);
  CHECK(basic.f1 == 1.0);

  const auto all = f1_optimal_threshold(make({0.3, 0.7, 0.5}, {1, 1, 1}));
  CHECK(all.threshold < 0.3);
  CHECK(all.f1 == 1.0);
  CHECK_THROWS_AS(f1_optimal_threshold(make({0.3, 0.7}, {0, 0})), std::invalid_argument);

  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    const auto s = random_scores(rng, 40, t % 3 == 0);
    std::vector<double> distinct(s.scores);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> cands = {std::nextafter(distinct.front(), -INFINITY)};
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) cands.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    double best = -1, best_t = 0;
    for (double c : cands) {
      const double f = oracle::f1_at(s.scores, s.labels, c);
      if (f > best) {
        best = f;
        best_t = c;
      }
    }
    const auto got = f1_optimal_threshold(s);
    CHECK(got.f1 == doctest::Approx(best).epsilon(1e-12));
    CHECK(got.threshold == best_t);
  }
}

TEST_CASE("error rates") {
  const auto s = make({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1});
  CHECK(error_rates(s, 0.5).fpr == 0.0);
  CHECK(error_rates(s, 0.5).fnr == 0.0);
  CHECK(error_rates(s, 1.0).fpr == 0.0);
  CHECK(error_rates(s, 1.0).fnr == 1.0);
  Rng rng(3);
  const auto r = random_scores(rng, 100, true);
  double fp = 0, tn = 0, fn = 0, tp = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool pred = r.scores[i] > 0.25;
    if (r.labels[i]) (pred ? tp : fn) += 1;
    else (pred ? fp : tn) += 1;
  }
  CHECK(error_rates(r, 0.25).fpr == doctest::Approx(fp / (fp + tn)));
  CHECK(error_rates(r, 0.25).fnr == doctest::Approx(fn / (fn + tp)));
  CHECK_THROWS_AS(error_rates(make({1}, {1}), 0.0), std::invalid_argument);
}

TEST_CASE("score histogram") {
  const auto one = score_histogram(make({2, 2, 2}, {0, 1, 1}), 4);
  CHECK(std::count_if(one.normal.begin(), one.normal.end(), [](std::size_t c) { return c > 0; }) == 1);
  CHECK(std::count_if(one.anomalous.begin(), one.anomalous.end(), [](std::size_t c) { return c > 0; }) == 1);

  Rng rng(4);
  const auto s = random_scores(rng, 300, false);
  const auto h = score_histogram(s, 7);
  REQUIRE(h.edges.size() == 8);
  const double lo = *std::min_element(s.scores.begin(), s.scores.end());
  const double hi = *std::max_element(s.scores.begin(), s.scores.end());
  CHECK(h.edges.front() == lo);
  CHECK(h.edges.back() == hi);
  std::vector<std::size_t> normal(7, 0), anomalous(7, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t b = 0;
    while (b + 1 < 7 && s.scores[i] >= h.edges[b + 1]) ++b;
    (s.labels[i] ? anomalous : normal)[b] += 1;
  }
  CHECK(h.normal == normal);
  CHECK(h.anomalous == anomalous);
  const auto np = static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), 1));
  CHECK(std::accumulate(h.anomalous.begin(), h.anomalous.end(), std::size_t{0}) == np);
  CHECK_THROWS_AS(score_histogram(LabeledScores{}, 4), std::invalid_argument);
  CHECK_THROWS_AS(score_histogram(s, 0), std::invalid_argument);
}
