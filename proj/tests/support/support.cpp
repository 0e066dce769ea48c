#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ecgadv::testing {

namespace fs = std::filesystem;

namespace {

// Perturbations this close to a ReLU or MaxPool decision are not compared.
constexpr double kKinkRadius = 1e-6;

double loss_at(const ModelSpec& spec, const ModelParams& params, std::span<const double> x, RhythmClass y) {
  return loss(forward(spec, params, x).logits.data, y);
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double*> scalar_refs(ModelParams& p) {
  std::vector<double*> refs;
  p.for_each([&](double& v) { refs.push_back(&v); });
  return refs;
}

}  // namespace

GradCheck& GradCheck::operator+=(const GradCheck& o) {
  checked += o.checked;
  passed += o.passed;
  excluded += o.excluded;
  worst_rel = std::max(worst_rel, o.worst_rel);
  return *this;
}

bool gradients_agree(double analytic, double numeric, double* rel) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double r = scale > 0.0 ? diff / scale : 0.0;
  if (rel) *rel = r;
  return diff <= kFdAbsFloor || r <= kFdRelTol;
}

std::vector<std::size_t> decision_pattern(const ModelSpec& spec, const ModelParams& params,
                                          std::span<const double> x) {
  const auto fr = forward(spec, params, x);
  const auto& acts = fr.trace.activations;
  std::vector<std::size_t> pattern;
  for (std::size_t i = 0; i < spec.layers().size(); ++i) {
    const auto& layer = spec.layers()[i];
    const Tensor& in = acts[i];
    if (std::holds_alternative<ReLU>(layer)) {
      for (double v : in.data) pattern.push_back(v > 0.0 ? 1 : 0);
    } else if (const auto* mp = std::get_if<MaxPool>(&layer)) {
      const std::size_t channels = in.shape[0], len = in.shape[1];
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t o = 0; o < len / mp->width; ++o) {
          std::size_t best = o * mp->width;
          for (std::size_t j = best + 1; j < (o + 1) * mp->width; ++j) {
            if (in.data[c * len + j] > in.data[c * len + best]) best = j;
          }
          pattern.push_back(best);
        }
      }
    }
  }
  return pattern;
}

GradCheck check_input_gradient(const ModelSpec& spec, const ModelParams& params, std::span<const double> x,
                               RhythmClass y, std::size_t n_coords, std::mt19937_64& rng) {
  GradCheck out;
  const Tensor analytic = grad_input(spec, params, x, y);
  const auto base = decision_pattern(spec, params, x);
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t k : sample_indices(x.size(), n_coords, rng)) {
    const double orig = probe[k];
    probe[k] = orig + kKinkRadius;
    const bool kink_hi = decision_pattern(spec, params, probe) != base;
    probe[k] = orig - kKinkRadius;
    const bool kink_lo = decision_pattern(spec, params, probe) != base;
    if (kink_hi || kink_lo) {
      probe[k] = orig;
      ++out.excluded;
      continue;
    }
    probe[k] = orig + kFdStep;
    const double up = loss_at(spec, params, probe, y);
    probe[k] = orig - kFdStep;
    const double down = loss_at(spec, params, probe, y);
    probe[k] = orig;
    const double numeric = (up - down) / (2.0 * kFdStep);
    double rel = 0.0;
    ++out.checked;
    if (gradients_agree(analytic[k], numeric, &rel)) ++out.passed;
    out.worst_rel = std::max(out.worst_rel, rel);
  }
  return out;
}

GradCheck check_param_gradient(const ModelSpec& spec, const ModelParams& params, std::span<const double> x,
                               RhythmClass y, std::size_t n_coords, std::mt19937_64& rng) {
  GradCheck out;
  std::vector<double> fitted(spec.input_length(), 0.0);
  std::copy_n(x.begin(), std::min(x.size(), fitted.size()), fitted.begin());
  ModelParams analytic = grad_params(spec, params, Signal(fitted, 1.0), y);
  const auto grads = scalar_refs(analytic);

  ModelParams probe = params;
  const auto refs = scalar_refs(probe);
  const auto base = decision_pattern(spec, params, fitted);
  for (std::size_t k : sample_indices(refs.size(), n_coords, rng)) {
    double& p = *refs[k];
    const double orig = p;
    p = orig + kKinkRadius;
    const bool kink_hi = decision_pattern(spec, probe, fitted) != base;
    p = orig - kKinkRadius;
    const bool kink_lo = decision_pattern(spec, probe, fitted) != base;
    if (kink_hi || kink_lo) {
      p = orig;
      ++out.excluded;
      continue;
    }
    p = orig + kFdStep;
    const double up = loss_at(spec, probe, fitted, y);
    p = orig - kFdStep;
    const double down = loss_at(spec, probe, fitted, y);
    p = orig;
    const double numeric = (up - down) / (2.0 * kFdStep);
    double rel = 0.0;
    ++out.checked;
    if (gradients_agree(*grads[k], numeric, &rel)) ++out.passed;
    out.worst_rel = std::max(out.worst_rel, rel);
  }
  return out;
}

ModelSpec random_tiny_spec(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::bernoulli_distribution coin(0.5);
  for (;;) {
    const std::size_t input_length = pick(16, 40);
    std::vector<Layer> layers;
    std::size_t len = input_length;
    const std::size_t n_conv = pick(1, 3);
    bool ok = true;
    for (std::size_t i = 0; i < n_conv && ok; ++i) {
      const Conv1D conv{pick(1, 4), pick(2, 5), pick(1, 2)};
      if (len < conv.kernel_size) {
        ok = false;
        break;
      }
      len = (len - conv.kernel_size) / conv.stride + 1;
      layers.push_back(conv);
      layers.push_back(ReLU{});
      if (coin(rng) && len >= 4) {
        layers.push_back(MaxPool{2});
        len /= 2;
      }
    }
    if (!ok) continue;
    if (coin(rng)) layers.push_back(GlobalAveragePool{});
    layers.push_back(Dense{kNumClasses});
    try {
      return ModelSpec(std::move(layers), input_length);
    } catch (const std::exception&) {
      continue;
    }
  }
}

ModelParams random_params(const ModelSpec& spec, std::mt19937_64& rng) {
  ModelParams params = init_params(spec, rng());
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (auto& lp : params.layers) {
    for (double& b : lp.bias.data) b = bias(rng);
  }
  return params;
}

std::vector<double> random_signal(std::size_t n, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> out(n);
  for (double& v : out) v = d(rng);
  return out;
}

const ToyFixture& toy() {
  static const ToyFixture fixture = [] {
    auto [train_set, test_set] = split(generate_synthetic(50, 512, 3), 0.1, 3);
    const auto spec = ModelSpec::default_architecture(512);
    auto params = train(spec, train_set, TrainHyper{50, 16, 4e-3, 1});
    return ToyFixture{std::move(train_set), std::move(test_set), Model{spec, std::move(params)}};
  }();
  return fixture;
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  for (;;) {
    std::ostringstream name;
    name << "ecgadv-" << tag << "-" << std::hex << rd();
    path_ = fs::temp_directory_path() / name.str();
    if (fs::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace ecgadv::testing
