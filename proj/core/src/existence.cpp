#include "ecgadv/existence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "ecgadv/error.hpp"

namespace ecgadv {

namespace {

enum Stream : std::uint64_t { kGaussianStream = 1, kUniformStream = 2 };

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": lengths differ (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

Signal add_clipped_smooth(const Signal& x, std::span<const double> raw_perturbation, const KernelBank& bank,
                          double epsilon) {
  const auto smoothed = clip_inf(bank_smooth(raw_perturbation, bank), epsilon);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + smoothed[i];
  return Signal(std::move(out), x.sample_rate_hz());
}

}  // namespace

bool Band::contains(std::span<const double> s) const noexcept {
  if (s.size() != min.size()) return false;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] < min[t] || s[t] > max[t]) return false;
  }
  return true;
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),   static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

Signal resample_with_noise(const Signal& x, const Signal& x_adv, std::span<const double> delta,
                           const KernelBank& bank, double epsilon) {
  require_same_length(x.size(), x_adv.size(), "resample");
  require_same_length(x.size(), delta.size(), "resample noise");
  std::vector<double> raw(x.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (x_adv[i] + delta[i]) - x[i];
  return add_clipped_smooth(x, raw, bank, epsilon);
}

Signal resample_gaussian(const Signal& x, const Signal& x_adv, const NoiseSpec& noise, const KernelBank& bank,
                         double epsilon, Rng& rng) {
  if (!(noise.variance > 0.0)) throw InvalidArgument("noise variance must be positive");
  require_same_length(x.size(), x_adv.size(), "resample");
  std::normal_distribution<double> dist(0.0, std::sqrt(noise.variance));
  std::vector<double> delta(x.size());
  for (double& d : delta) d = dist(rng);
  return resample_with_noise(x, x_adv, delta, bank, epsilon);
}

Band build_band(std::span<const Signal> samples) {
  if (samples.size() < 2) throw InvalidArgument("a band needs at least two samples");
  Band band{samples[0].samples(), samples[0].samples(), samples.size()};
  for (const auto& s : samples.subspan(1)) {
    require_same_length(band.size(), s.size(), "build_band");
    for (std::size_t t = 0; t < s.size(); ++t) {
      band.min[t] = std::min(band.min[t], s[t]);
      band.max[t] = std::max(band.max[t], s[t]);
    }
  }
  return band;
}

std::vector<std::size_t> find_intersections(std::span<const double> x1, std::span<const double> x2) {
  require_same_length(x1.size(), x2.size(), "find_intersections");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = x1[i] - x2[i];
    const bool crosses = i + 1 < x1.size() && d * (x1[i + 1] - x2[i + 1]) < 0.0;
    if (d == 0.0 || crosses) out.push_back(i + 1);
  }
  return out;
}

std::vector<std::size_t> find_intersections(const Signal& x1, const Signal& x2) {
  return find_intersections(std::span<const double>(x1.samples()), std::span<const double>(x2.samples()));
}

Signal concatenate_at(const Signal& x1, const Signal& x2, std::size_t t) {
  require_same_length(x1.size(), x2.size(), "concatenate_at");
  if (t < 1 || t >= x1.size()) {
    throw InvalidArgument("split point must satisfy 1 <= t < length, got " + std::to_string(t));
  }
  std::vector<double> out(x1.samples().begin(), x1.samples().begin() + static_cast<std::ptrdiff_t>(t));
  out.insert(out.end(), x2.samples().begin() + static_cast<std::ptrdiff_t>(t), x2.samples().end());
  return Signal(std::move(out), x1.sample_rate_hz());
}

std::vector<double> draw_from_band(const Band& band, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> a(band.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double lo = band.min[t], hi = band.max[t];
    const double u = unit(rng);
    a[t] = lo == hi ? lo : std::min(hi, lo + u * (hi - lo));
  }
  return a;
}

Signal smooth_band_draw(const Signal& x, std::span<const double> a, const KernelBank& bank, double epsilon) {
  require_same_length(x.size(), a.size(), "band draw");
  std::vector<double> raw(x.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = a[i] - x[i];
  return add_clipped_smooth(x, raw, bank, epsilon);
}

Signal sample_uniform_band(const Signal& x, const Band& band, const KernelBank& bank, double epsilon, Rng& rng) {
  require_same_length(x.size(), band.size(), "sample_uniform_band");
  const auto a = draw_from_band(band, rng);
  return smooth_band_draw(x, a, bank, epsilon);
}

ExistenceReport existence_experiment(const Model& model, const Signal& x, const Signal& x_adv, RhythmClass label,
                                     std::optional<RhythmClass> target, const KernelBank& bank,
                                     const ExistenceConfig& cfg) {
  if (cfg.n < 2) throw InvalidArgument("existence experiment needs n >= 2");
  require_same_length(x.size(), x_adv.size(), "existence_experiment");

  auto adversarial = [&](const Signal& s) {
    return is_adversarial(predict(model.spec, model.params, s).cls, label, target);
  };

  std::vector<Signal> resamples;
  resamples.reserve(cfg.n);
  std::size_t gaussian_hits = 0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto rng = derive_rng(cfg.seed, kGaussianStream, i);
    resamples.push_back(resample_gaussian(x, x_adv, cfg.noise, bank, cfg.epsilon, rng));
    if (adversarial(resamples.back())) ++gaussian_hits;
  }

  ExistenceReport report;
  report.n = cfg.n;
  report.seed = cfg.seed;
  report.frac_gaussian_adversarial = static_cast<double>(gaussian_hits) / static_cast<double>(cfg.n);
  report.band = build_band(resamples);

  std::size_t uniform_hits = 0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto rng = derive_rng(cfg.seed, kUniformStream, i);
    if (adversarial(sample_uniform_band(x, report.band, bank, cfg.epsilon, rng))) ++uniform_hits;
  }
  report.frac_uniform_adversarial = static_cast<double>(uniform_hits) / static_cast<double>(cfg.n);

  const std::size_t length = x.size();
  const double middle = static_cast<double>(length) / 2.0;
  std::size_t concat_hits = 0;
  for (std::size_t i = 0; i < resamples.size() && report.n_concat < cfg.max_concat_pairs; ++i) {
    for (std::size_t j = i + 1; j < resamples.size() && report.n_concat < cfg.max_concat_pairs; ++j) {
      std::optional<std::size_t> split;
      for (std::size_t t : find_intersections(resamples[i], resamples[j])) {
        if (t >= length) continue;
        if (!split || std::abs(static_cast<double>(t) - middle) < std::abs(static_cast<double>(*split) - middle)) {
          split = t;
        }
      }
      if (!split) continue;
      ++report.n_concat;
      if (adversarial(concatenate_at(resamples[i], resamples[j], *split))) ++concat_hits;
    }
  }
  if (report.n_concat > 0) {
    report.frac_concat_adversarial = static_cast<double>(concat_hits) / static_cast<double>(report.n_concat);
  }
  return report;
}

}  // namespace ecgadv
