#include "pni/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pni {

namespace {

void check_shape(const LabeledScores& s) {
  if (s.scores.size() != s.labels.size()) throw std::invalid_argument("scores and labels differ in length");
  for (double v : s.scores) {
    if (std::isnan(v)) throw std::invalid_argument("NaN score");
  }
}

std::pair<std::size_t, std::size_t> class_counts(const LabeledScores& s) {
  std::size_t pos = 0;
  for (auto l : s.labels) pos += l != 0;
  return {s.size() - pos, pos};
}

void require_both_classes(const LabeledScores& s) {
  const auto [neg, pos] = class_counts(s);
  if (neg == 0 || pos == 0) throw std::invalid_argument("both classes must be present");
}

}  // namespace

double auroc(const LabeledScores& s) {
  check_shape(s);
  require_both_classes(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (s.labels[order[k]]) rank_sum += midrank;
    }
    i = j;
  }
  const auto [neg, pos] = class_counts(s);
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

F1Threshold f1_optimal_threshold(const LabeledScores& s) {
  check_shape(s);
  const auto [neg, pos] = class_counts(s);
  if (pos == 0) throw std::invalid_argument("F1 threshold needs at least one positive");
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Sweep thresholds upward; below the minimum everything is predicted positive.
  std::size_t tp = pos, fp = neg;
  auto f1_of = [&](std::size_t tp_, std::size_t fp_) {
    const double fn = static_cast<double>(pos - tp_);
    return tp_ == 0 ? 0.0 : 2.0 * tp_ / (2.0 * tp_ + static_cast<double>(fp_) + fn);
  };
  const double lowest = s.scores[order.front()];
  F1Threshold best{std::nextafter(lowest, -std::numeric_limits<double>::infinity()), f1_of(tp, fp)};
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && s.scores[order[j]] == s.scores[order[i]]) {
      if (s.labels[order[j]]) --tp; else --fp;
      ++j;
    }
    if (j == order.size()) break;
    const double t = 0.5 * (s.scores[order[i]] + s.scores[order[j]]);
    const double f = f1_of(tp, fp);
    if (f > best.f1) best = {t, f};
    i = j;
  }
  return best;
}

ErrorRates error_rates(const LabeledScores& s, double threshold) {
  check_shape(s);
  require_both_classes(s);
  std::size_t fp = 0, tn = 0, fn = 0, tp = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool predicted = s.scores[i] > threshold;
    if (s.labels[i]) {
      (predicted ? tp : fn)++;
    } else {
      (predicted ? fp : tn)++;
    }
  }
  return {static_cast<double>(fp) / static_cast<double>(fp + tn), static_cast<double>(fn) / static_cast<double>(fn + tp)};
}

ScoreHistogram score_histogram(const LabeledScores& s, std::size_t bins) {
  check_shape(s);
  if (bins == 0) throw std::invalid_argument("bins must be positive");
  if (s.size() == 0) throw std::invalid_argument("empty score set");
  const auto [mn, mx] = std::minmax_element(s.scores.begin(), s.scores.end());
  const double lo = *mn, hi = *mx;
  ScoreHistogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  h.edges.back() = hi;
  h.normal.assign(bins, 0);
  h.anomalous.assign(bins, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t b = 0;
    if (hi > lo) {
      b = static_cast<std::size_t>((s.scores[i] - lo) / (hi - lo) * static_cast<double>(bins));
      b = std::min(b, bins - 1);
    }
    (s.labels[i] ? h.anomalous : h.normal)[b]++;
  }
  return h;
}

}  // namespace pni
