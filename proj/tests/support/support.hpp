#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ecgadv/data.hpp"
#include "ecgadv/nn.hpp"

namespace ecgadv::testing {

/// Outcome of comparing analytic and central-difference gradients.
struct GradCheck {
  std::size_t checked = 0;   // coordinates compared
  std::size_t passed = 0;
  std::size_t excluded = 0;  // +-h crosses a ReLU or MaxPool decision
  double worst_rel = 0.0;

  double pass_fraction() const { return checked ? static_cast<double>(passed) / static_cast<double>(checked) : 1.0; }
  GradCheck& operator+=(const GradCheck& o);
};

inline constexpr double kFdStep = 1e-3;
inline constexpr double kFdRelTol = 1e-4;
// Agreement below this absolute difference counts as a pass; it sits far
// above rounding noise of a central difference on an O(1) loss.
inline constexpr double kFdAbsFloor = 1e-9;

bool gradients_agree(double analytic, double numeric, double* rel = nullptr);

/// ReLU on/off bits and MaxPool winners for one forward pass.
std::vector<std::size_t> decision_pattern(const ModelSpec& spec, const ModelParams& params,
                                          std::span<const double> x);

/// Compares grad_input against central differences on `n_coords` random
/// coordinates (all when n_coords >= length).
GradCheck check_input_gradient(const ModelSpec& spec, const ModelParams& params, std::span<const double> x,
                               RhythmClass y, std::size_t n_coords, std::mt19937_64& rng);

/// Same for grad_params on `n_coords` random scalar parameters.
GradCheck check_param_gradient(const ModelSpec& spec, const ModelParams& params, std::span<const double> x,
                               RhythmClass y, std::size_t n_coords, std::mt19937_64& rng);

/// Random small valid architecture (conv / relu / optional maxpool, then
/// global average pooling or a flattening dense head).
ModelSpec random_tiny_spec(std::mt19937_64& rng);

/// init_params plus random non-zero biases so that ReLU kinks do not all sit at 0.
ModelParams random_params(const ModelSpec& spec, std::mt19937_64& rng);

std::vector<double> random_signal(std::size_t n, double sd, std::mt19937_64& rng);

/// Small model trained once per process on a 256-sample synthetic corpus.
struct ToyFixture {
  Dataset train;
  Dataset test;
  Model model;
};
const ToyFixture& toy();

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);

}  // namespace ecgadv::testing
