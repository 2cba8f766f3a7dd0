#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pni {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;  // 0 normal, 1 anomalous

  void add(double score, bool anomalous) {
    scores.push_back(score);
    labels.push_back(anomalous ? 1 : 0);
  }
  std::size_t size() const { return scores.size(); }
};

// Mann-Whitney estimate of P(positive score > negative score), ties 0.5.
double auroc(const LabeledScores& s);

struct F1Threshold {
  double threshold = 0.0;
  double f1 = 0.0;
};

// Best F1 of (score > threshold) over midpoints between consecutive distinct
// scores plus one threshold below the minimum; ties go to the lowest threshold.
F1Threshold f1_optimal_threshold(const LabeledScores& s);

struct ErrorRates {
  double fpr = 0.0;
  double fnr = 0.0;
};

ErrorRates error_rates(const LabeledScores& s, double threshold);

struct ScoreHistogram {
  std::vector<double> edges;  // bins + 1 edges spanning [min, max]
  std::vector<std::size_t> normal;
  std::vector<std::size_t> anomalous;
};

ScoreHistogram score_histogram(const LabeledScores& s, std::size_t bins);

}  // namespace pni
