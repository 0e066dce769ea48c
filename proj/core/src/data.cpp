#include "ecgadv/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "ecgadv/error.hpp"
#include "json.hpp"

namespace ecgadv {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"Normal", "AF", "Other", "Noise"};

// Per-example generator stream so that every recording depends only on
// (seed, class, index).
std::mt19937_64 example_rng(std::uint64_t seed, std::size_t cls, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cls), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

void add_bump(std::vector<double>& out, double center, double amplitude, double width) {
  const double reach = 5.0 * width;
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - reach));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(center + reach));
  for (std::ptrdiff_t t = std::max<std::ptrdiff_t>(lo, 0);
       t <= hi && t < static_cast<std::ptrdiff_t>(out.size()); ++t) {
    const double d = static_cast<double>(t) - center;
    out[static_cast<std::size_t>(t)] += amplitude * std::exp(-d * d / (2.0 * width * width));
  }
}

struct BeatShape {
  double r_amplitude;
  bool with_p_wave;
  double qrs_width = 1.5;
};

void add_beat(std::vector<double>& out, double r_pos, const BeatShape& shape) {
  const double a = shape.r_amplitude;
  const double w = shape.qrs_width;
  if (shape.with_p_wave) add_bump(out, r_pos - 16.0, 0.14 * a, 3.5);
  add_bump(out, r_pos - 2.0 * w, -0.15 * a, 0.8 * w);
  add_bump(out, r_pos, a, w);
  add_bump(out, r_pos + 2.0 * w, -0.25 * a, w);
  add_bump(out, r_pos + 22.0, 0.30 * a, 6.0);
}

void add_baseline(std::vector<double>& out, std::mt19937_64& rng, double noise_sd) {
  std::uniform_real_distribution<double> wander_amp(0.0, 7.5);
  std::uniform_real_distribution<double> wander_period(200.0, 400.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, noise_sd);
  const double amp = wander_amp(rng);
  const double period = wander_period(rng);
  const double phi = phase(rng);
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] += amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phi) + noise(rng);
  }
}

std::vector<double> synth_regular(std::size_t length, std::mt19937_64& rng, bool alternating) {
  std::vector<double> out(length, 0.0);
  std::uniform_real_distribution<double> rr_base(70.0, 90.0);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_real_distribution<double> amp(110.0, 140.0);
  const double rr = rr_base(rng);
  const double a = amp(rng);
  double pos = std::uniform_real_distribution<double>(0.0, rr)(rng);
  for (std::size_t beat = 0; pos < static_cast<double>(length) + 30.0; ++beat) {
    // Every second beat of the alternating rhythm is a low, wide ectopic
    // complex without a P wave.
    if (alternating && beat % 2 == 1) {
      add_beat(out, pos, {0.45 * a, false, 4.0});
    } else {
      add_beat(out, pos, {a, true});
    }
    pos += rr + jitter(rng);
  }
  add_baseline(out, rng, 1.5);
  return out;
}

std::vector<double> synth_af(std::size_t length, std::mt19937_64& rng) {
  std::vector<double> out(length, 0.0);
  std::uniform_real_distribution<double> rr(40.0, 120.0);
  std::uniform_real_distribution<double> amp(110.0, 140.0);
  std::uniform_real_distribution<double> beat_amp(0.9, 1.1);
  const double a = amp(rng);
  double pos = std::uniform_real_distribution<double>(0.0, 60.0)(rng);
  while (pos < static_cast<double>(length) + 30.0) {
    add_beat(out, pos, {a * beat_amp(rng), false});
    pos += rr(rng);
  }
  // Fibrillatory baseline: a fast, slowly drifting oscillation.
  std::uniform_real_distribution<double> f_period(6.0, 9.0);
  std::uniform_real_distribution<double> f_amp(7.5, 12.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double period = f_period(rng);
  const double fa = f_amp(rng);
  const double phi = phase(rng);
  for (std::size_t t = 0; t < length; ++t) {
    out[t] += fa * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phi);
  }
  add_baseline(out, rng, 1.5);
  return out;
}

std::vector<double> synth_noise(std::size_t length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> sd(5.0, 15.0);
  std::vector<double> out(length, 0.0);
  add_baseline(out, rng, sd(rng));
  return out;
}

std::string make_id(RhythmClass c, std::size_t index) {
  std::string number = std::to_string(index);
  if (number.size() < 4) number.insert(0, 4 - number.size(), '0');
  std::string name(to_string(c));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return name + "-" + number;
}

}  // namespace

std::string_view to_string(RhythmClass c) noexcept { return kClassNames[index_of(c)]; }

std::optional<RhythmClass> rhythm_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == s) return kAllClasses[i];
  }
  return std::nullopt;
}

RhythmClass class_at(std::size_t index) {
  if (index >= kNumClasses) throw InvalidArgument("class index out of range: " + std::to_string(index));
  return kAllClasses[index];
}

Signal::Signal(std::vector<double> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (samples_.size() < kMinLength) {
    throw InvalidArgument("signal has " + std::to_string(samples_.size()) + " samples, need at least " +
                          std::to_string(kMinLength));
  }
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
    throw InvalidArgument("sample rate must be positive and finite");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw InvalidArgument("non-finite sample at index " + std::to_string(i));
    }
  }
}

Dataset::Dataset(std::vector<LabeledExample> examples, std::uint64_t split_seed)
    : examples_(std::move(examples)), split_seed_(split_seed) {
  if (examples_.empty()) throw ValidationError("empty dataset");
  std::set<std::string_view> ids;
  for (const auto& ex : examples_) {
    if (!ids.insert(ex.id).second) throw ValidationError("duplicate example id '" + ex.id + "'");
  }
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const noexcept {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& ex : examples_) ++counts[index_of(ex.label)];
  return counts;
}

Dataset generate_synthetic(std::size_t n_per_class, std::size_t length, std::uint64_t seed) {
  if (n_per_class == 0) throw InvalidArgument("n_per_class must be positive");
  if (length < 64) throw InvalidArgument("synthetic length must be at least 64, got " + std::to_string(length));

  std::vector<LabeledExample> examples;
  examples.reserve(n_per_class * kNumClasses);
  for (RhythmClass c : kAllClasses) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      auto rng = example_rng(seed, index_of(c), i);
      std::vector<double> samples;
      switch (c) {
        case RhythmClass::Normal: samples = synth_regular(length, rng, false); break;
        case RhythmClass::AF: samples = synth_af(length, rng); break;
        case RhythmClass::Other: samples = synth_regular(length, rng, true); break;
        case RhythmClass::Noise: samples = synth_noise(length, rng); break;
      }
      examples.push_back({make_id(c, i), c, Signal(std::move(samples), kSyntheticSampleRateHz)});
    }
  }
  return Dataset(std::move(examples), seed);
}

Dataset parse_dataset(std::string_view jsonl) {
  std::vector<LabeledExample> examples;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("record is not an object", line_no);
    for (const char* key : {"id", "label", "fs", "samples"}) {
      if (!record.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line_no);
    }
    if (!record["id"].is_string()) throw ParseError("'id' must be a string", line_no);
    if (!record["label"].is_string()) throw ParseError("'label' must be a string", line_no);
    if (!record["fs"].is_number()) throw ParseError("'fs' must be a number", line_no);
    if (!record["samples"].is_array()) throw ParseError("'samples' must be an array", line_no);

    const auto label_text = record["label"].get<std::string>();
    const auto label = rhythm_from_string(label_text);
    if (!label) {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown label '" + label_text + "'");
    }
    std::vector<double> samples;
    samples.reserve(record["samples"].size());
    for (const auto& v : record["samples"]) {
      if (!v.is_number()) throw ParseError("non-numeric sample", line_no);
      samples.push_back(v.get<double>());
    }
    auto id = record["id"].get<std::string>();
    if (!ids.insert(id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    try {
      examples.push_back({std::move(id), *label, Signal(std::move(samples), record["fs"].get<double>())});
    } catch (const InvalidArgument& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (examples.empty()) throw ValidationError("empty dataset");
  return Dataset(std::move(examples));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str());
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset) {
    nlohmann::ordered_json record;
    record["id"] = ex.id;
    record["label"] = std::string(to_string(ex.label));
    record["fs"] = ex.signal.sample_rate_hz();
    record["samples"] = ex.signal.samples();
    out += record.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset file " + path.string());
  out << serialize_dataset(dataset);
  if (!out) throw Error("write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[index_of(dataset[i].label)].push_back(i);

  std::vector<bool> is_test(dataset.size(), false);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw StratificationError("class " + std::string(to_string(class_at(c))) +
                                " has a single example; stratified split needs at least 2");
    }
    const auto n = members.size();
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < n_test; ++k) is_test[members[k]] = true;
  }

  std::vector<LabeledExample> train, test;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (is_test[i] ? test : train).push_back(dataset[i]);
  }
  return {Dataset(std::move(train), seed), Dataset(std::move(test), seed)};
}

std::vector<double> fit_length(const std::vector<double>& samples, std::size_t length) {
  std::vector<double> out(length, 0.0);
  std::copy_n(samples.begin(), std::min(length, samples.size()), out.begin());
  return out;
}

}  // namespace ecgadv
