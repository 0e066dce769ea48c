#include "ecgadv/kernels.hpp"

#include <cmath>
#include <string>

#include "ecgadv/error.hpp"

namespace ecgadv {

GaussianKernel::GaussianKernel(std::size_t size, double sigma) : half_width_(size / 2), sigma_(sigma) {
  if (size == 0 || size % 2 == 0) {
    throw InvalidArgument("Gaussian kernel size must be odd and positive, got " + std::to_string(size));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("Gaussian kernel sigma must be positive");

  weights_.resize(size);
  const double denom = 2.0 * sigma * sigma;
  double total = 0.0;
  for (std::size_t m = 0; m < size; ++m) {
    const double d = static_cast<double>(m) - static_cast<double>(half_width_);
    weights_[m] = std::exp(-d * d / denom);
    total += weights_[m];
  }
  for (double& w : weights_) w /= total;
}

KernelBank::KernelBank(std::vector<GaussianKernel> kernels) : kernels_(std::move(kernels)) {
  if (kernels_.empty()) throw InvalidArgument("kernel bank must not be empty");
}

KernelBank::KernelBank(std::span<const std::size_t> sizes, std::span<const double> sigmas) {
  if (sizes.size() != sigmas.size()) {
    throw InvalidArgument("kernel bank needs as many sigmas as sizes (" + std::to_string(sizes.size()) + " vs " +
                          std::to_string(sigmas.size()) + ")");
  }
  if (sizes.empty()) throw InvalidArgument("kernel bank must not be empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) kernels_.emplace_back(sizes[i], sigmas[i]);
}

KernelBank KernelBank::standard() {
  static constexpr std::size_t sizes[] = {5, 7, 11, 15, 19};
  static constexpr double sigmas[] = {1.0, 3.0, 5.0, 7.0, 10.0};
  return KernelBank(sizes, sigmas);
}

std::vector<double> convolve_same(std::span<const double> a, const GaussianKernel& kernel) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  const auto k = static_cast<std::ptrdiff_t>(kernel.half_width());
  const auto& w = kernel.weights();
  std::vector<double> out(a.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = -k; j <= k; ++j) {
      const std::ptrdiff_t src = i - j;
      if (src >= 0 && src < n) acc += a[static_cast<std::size_t>(src)] * w[static_cast<std::size_t>(j + k)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::vector<double> correlate_same(std::span<const double> g, const GaussianKernel& kernel) {
  const auto n = static_cast<std::ptrdiff_t>(g.size());
  const auto k = static_cast<std::ptrdiff_t>(kernel.half_width());
  const auto& w = kernel.weights();
  std::vector<double> out(g.size(), 0.0);
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (std::ptrdiff_t j = -k; j <= k; ++j) {
      const std::ptrdiff_t src = p + j;
      if (src >= 0 && src < n) acc += g[static_cast<std::size_t>(src)] * w[static_cast<std::size_t>(j + k)];
    }
    out[static_cast<std::size_t>(p)] = acc;
  }
  return out;
}

namespace {

template <typename Op>
std::vector<double> bank_mean(std::span<const double> x, const KernelBank& bank, Op op) {
  std::vector<double> acc(x.size(), 0.0);
  for (const auto& kernel : bank.kernels()) {
    const auto part = op(x, kernel);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += part[i];
  }
  const double inv = 1.0 / static_cast<double>(bank.size());
  for (double& v : acc) v *= inv;
  return acc;
}

}  // namespace

std::vector<double> bank_smooth(std::span<const double> theta, const KernelBank& bank) {
  return bank_mean(theta, bank, convolve_same);
}

std::vector<double> bank_smooth_adjoint(std::span<const double> grad, const KernelBank& bank) {
  return bank_mean(grad, bank, correlate_same);
}

}  // namespace ecgadv
