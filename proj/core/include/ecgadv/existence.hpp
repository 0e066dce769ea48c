#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ecgadv/attacks.hpp"
#include "ecgadv/data.hpp"
#include "ecgadv/kernels.hpp"
#include "ecgadv/nn.hpp"

namespace ecgadv {

/// delta ~ N(0, variance), i.i.d. per timestep. The default variance of 25
/// is a standard deviation of 5 raw units.
struct NoiseSpec {
  double variance = 25.0;
};

/// Per-timestep envelope of a population of signals.
struct Band {
  std::vector<double> min;
  std::vector<double> max;
  std::size_t n = 0;

  std::size_t size() const noexcept { return min.size(); }
  bool contains(std::span<const double> s) const noexcept;
};

using Rng = std::mt19937_64;

/// Independent stream for draw `index` of kind `stream` under `seed`.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// x + clip(bank_smooth(x_adv + delta - x), 0, epsilon) for a given delta.
Signal resample_with_noise(const Signal& x, const Signal& x_adv, std::span<const double> delta,
                           const KernelBank& bank, double epsilon);

/// As resample_with_noise with a fresh Gaussian delta drawn from `rng`.
Signal resample_gaussian(const Signal& x, const Signal& x_adv, const NoiseSpec& noise, const KernelBank& bank,
                         double epsilon, Rng& rng);

/// Requires at least two samples of equal length.
Band build_band(std::span<const Signal> samples);

/// Split points t (1-based, so x1 contributes the first t samples) where the
/// difference x1 - x2 is exactly zero at t, or changes sign between t and t+1.
std::vector<std::size_t> find_intersections(std::span<const double> x1, std::span<const double> x2);
std::vector<std::size_t> find_intersections(const Signal& x1, const Signal& x2);

/// First t samples from x1, the rest from x2. Requires 1 <= t < length.
Signal concatenate_at(const Signal& x1, const Signal& x2, std::size_t t);

/// a[t] ~ U(min[t], max[t]) independently; a point mass where min == max.
std::vector<double> draw_from_band(const Band& band, Rng& rng);

/// x + clip(bank_smooth(a - x), 0, epsilon) for a = draw_from_band(band).
Signal sample_uniform_band(const Signal& x, const Band& band, const KernelBank& bank, double epsilon, Rng& rng);
Signal smooth_band_draw(const Signal& x, std::span<const double> a, const KernelBank& bank, double epsilon);

struct ExistenceConfig {
  std::size_t n = 1000;
  double epsilon = 10.0;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  std::size_t max_concat_pairs = 100;
};

struct ExistenceReport {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double frac_gaussian_adversarial = 0.0;
  double frac_uniform_adversarial = 0.0;
  /// nullopt when no pair of resamples intersected.
  std::optional<double> frac_concat_adversarial;
  std::size_t n_concat = 0;
  Band band;

  friend bool operator==(const ExistenceReport& a, const ExistenceReport& b) {
    return a.n == b.n && a.seed == b.seed && a.frac_gaussian_adversarial == b.frac_gaussian_adversarial &&
           a.frac_uniform_adversarial == b.frac_uniform_adversarial &&
           a.frac_concat_adversarial == b.frac_concat_adversarial && a.n_concat == b.n_concat &&
           a.band.min == b.band.min && a.band.max == b.band.max && a.band.n == b.band.n;
  }
};

/// Gaussian resampling, band construction, uniform band sampling and
/// concatenation of intersecting resample pairs around one adversarial example.
/// A variant counts as adversarial when it meets the goal (label, target).
///
/// The band is built from all n Gaussian resamples. Concatenation walks pairs
/// (i, j), i < j, in order, splits each intersecting pair at the crossing
/// closest to the middle, and stops after max_concat_pairs hybrids.
ExistenceReport existence_experiment(const Model& model, const Signal& x, const Signal& x_adv, RhythmClass label,
                                     std::optional<RhythmClass> target, const KernelBank& bank,
                                     const ExistenceConfig& cfg);

}  // namespace ecgadv
