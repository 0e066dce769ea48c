#include "ecgadv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ecgadv {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

ConfusionMatrix confusion(const Dataset& dataset, const Predictor& predictor) {
  ConfusionMatrix cm;
  for (const auto& ex : dataset) cm.add(ex.label, predictor(ex.signal));
  return cm;
}

ConfusionMatrix confusion(const Model& model, const Dataset& dataset) {
  return confusion(dataset, [&](const Signal& s) { return predict(model.spec, model.params, s).cls; });
}

F1Scores f1_scores(const ConfusionMatrix& cm) {
  F1Scores out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t tp = cm.counts[c][c];
    std::size_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += cm.counts[o][c];
      fn += cm.counts[c][o];
    }
    if (tp + fp + fn == 0) {
      out.degenerate[c] = true;
      out.f1[c] = 0.0;
      continue;
    }
    // 2PR/(P+R) written in counts; stays defined when P or R is 0/0.
    out.f1[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  out.mean_rhythm = (out.f1[index_of(RhythmClass::Normal)] + out.f1[index_of(RhythmClass::AF)] +
                     out.f1[index_of(RhythmClass::Other)]) /
                    3.0;
  return out;
}

SuccessRate success_rate(std::span<const AttackResult> results) {
  SuccessRate sr;
  for (const auto& r : results) {
    if (!r.eligible) continue;
    ++sr.n_eligible;
    if (r.success) ++sr.n_success;
  }
  if (sr.n_eligible > 0) sr.rate = static_cast<double>(sr.n_success) / static_cast<double>(sr.n_eligible);
  return sr;
}

double max_abs_second_difference(std::span<const double> p) {
  double best = 0.0;
  for (std::size_t t = 1; t + 1 < p.size(); ++t) {
    best = std::max(best, std::abs(p[t + 1] - 2.0 * p[t] + p[t - 1]));
  }
  return best;
}

double total_variation(std::span<const double> p) {
  double tv = 0.0;
  for (std::size_t t = 1; t < p.size(); ++t) tv += std::abs(p[t] - p[t - 1]);
  return tv;
}

Distribution describe(std::vector<double> values) {
  Distribution d;
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  d.p50 = quantile(0.5);
  d.p90 = quantile(0.9);
  d.max = values.back();
  return d;
}

SmoothnessStats smoothness_stats(std::span<const AttackResult> results) {
  std::vector<double> msd, tv;
  msd.reserve(results.size());
  tv.reserve(results.size());
  for (const auto& r : results) {
    msd.push_back(max_abs_second_difference(r.perturbation));
    tv.push_back(total_variation(r.perturbation));
  }
  return {results.size(), describe(std::move(msd)), describe(std::move(tv))};
}

MetricsReport make_metrics_report(const ConfusionMatrix& cm) {
  MetricsReport report;
  report.confusion = cm;
  report.accuracy = cm.accuracy();
  report.f1 = f1_scores(cm);
  return report;
}

}  // namespace ecgadv
