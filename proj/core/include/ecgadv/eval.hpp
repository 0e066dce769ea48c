#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>

#include "ecgadv/attacks.hpp"
#include "ecgadv/data.hpp"
#include "ecgadv/nn.hpp"

namespace ecgadv {

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(RhythmClass truth, RhythmClass predicted) { ++counts[index_of(truth)][index_of(predicted)]; }
  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

using Predictor = std::function<RhythmClass(const Signal&)>;

ConfusionMatrix confusion(const Model& model, const Dataset& dataset);
ConfusionMatrix confusion(const Dataset& dataset, const Predictor& predictor);

struct F1Scores {
  std::array<double, kNumClasses> f1{};
  /// Class absent from both truth and predictions; its F1 is reported as 0.
  std::array<bool, kNumClasses> degenerate{};
  /// Mean over Normal, AF and Other (Noise excluded). Degenerate classes count as 0.
  double mean_rhythm = 0.0;
};

F1Scores f1_scores(const ConfusionMatrix& cm);

struct SuccessRate {
  std::size_t n_eligible = 0;
  std::size_t n_success = 0;
  std::optional<double> rate;  // nullopt when nothing was eligible
};

/// Only results whose pre-attack prediction was correct enter the denominator.
SuccessRate success_rate(std::span<const AttackResult> results);

/// max_t |p[t+1] - 2 p[t] + p[t-1]|; 0 for fewer than 3 samples.
double max_abs_second_difference(std::span<const double> p);
/// sum_t |p[t+1] - p[t]|.
double total_variation(std::span<const double> p);

struct Distribution {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double max = 0.0;
};

/// Linear-interpolation percentiles; all zeros for an empty input.
Distribution describe(std::vector<double> values);

struct SmoothnessStats {
  std::size_t count = 0;
  Distribution max_second_diff;
  Distribution total_variation;
};

SmoothnessStats smoothness_stats(std::span<const AttackResult> results);

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  F1Scores f1;
  std::optional<SuccessRate> attack_success;
  std::optional<SmoothnessStats> smoothness;
};

MetricsReport make_metrics_report(const ConfusionMatrix& cm);

}  // namespace ecgadv
