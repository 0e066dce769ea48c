#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ecgadv {

enum class RhythmClass : std::uint8_t { Normal = 0, AF = 1, Other = 2, Noise = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<RhythmClass, kNumClasses> kAllClasses = {
    RhythmClass::Normal, RhythmClass::AF, RhythmClass::Other, RhythmClass::Noise};

std::string_view to_string(RhythmClass c) noexcept;
std::optional<RhythmClass> rhythm_from_string(std::string_view s) noexcept;
inline std::size_t index_of(RhythmClass c) noexcept { return static_cast<std::size_t>(c); }
RhythmClass class_at(std::size_t index);

/// A single-lead recording in raw (ADC-like) units.
///
/// Construction validates the invariants: at least kMinLength samples, every
/// sample finite and a positive sample rate.
class Signal {
 public:
  static constexpr std::size_t kMinLength = 16;

  Signal(std::vector<double> samples, double sample_rate_hz);

  const std::vector<double>& samples() const noexcept { return samples_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double operator[](std::size_t i) const noexcept { return samples_[i]; }

  friend bool operator==(const Signal&, const Signal&) = default;

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
};

struct LabeledExample {
  std::string id;
  RhythmClass label;
  Signal signal;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

class Dataset {
 public:
  /// Throws ValidationError when empty or when ids collide.
  explicit Dataset(std::vector<LabeledExample> examples, std::uint64_t split_seed = 0);

  const std::vector<LabeledExample>& examples() const noexcept { return examples_; }
  std::size_t size() const noexcept { return examples_.size(); }
  const LabeledExample& operator[](std::size_t i) const noexcept { return examples_[i]; }
  std::uint64_t split_seed() const noexcept { return split_seed_; }

  std::array<std::size_t, kNumClasses> class_counts() const noexcept;

  auto begin() const noexcept { return examples_.begin(); }
  auto end() const noexcept { return examples_.end(); }

  // The split seed is provenance metadata; equality is over the examples.
  friend bool operator==(const Dataset& a, const Dataset& b) { return a.examples_ == b.examples_; }

 private:
  std::vector<LabeledExample> examples_;
  std::uint64_t split_seed_;
};

/// Nominal sample rate attached to synthetic recordings.
inline constexpr double kSyntheticSampleRateHz = 128.0;

/// Deterministic synthetic corpus with n_per_class recordings of every class.
///
/// Normal: evenly spaced beats with P and T waves and low noise.
/// AF:     irregular inter-beat intervals, no P wave, fibrillatory baseline.
/// Other:  evenly spaced beats with alternating R amplitude.
/// Noise:  white noise without beats.
///
/// Amplitudes are raw units with R peaks between 110 and 140, so an
/// infinity-norm budget of 10 is under a tenth of the QRS height.
Dataset generate_synthetic(std::size_t n_per_class, std::size_t length, std::uint64_t seed);

/// JSONL: one {"id", "label", "fs", "samples"} object per line.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view jsonl);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& dataset);

/// Stratified split. Each class contributes round(test_fraction * n_class)
/// examples to the test side; ordering inside each side follows the input.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Zero-pads or truncates at the tail.
std::vector<double> fit_length(const std::vector<double>& samples, std::size_t length);

}  // namespace ecgadv
