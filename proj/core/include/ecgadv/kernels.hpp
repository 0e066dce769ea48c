#pragma once

#include <span>
#include <vector>

namespace ecgadv {

/// Normalized discrete Gaussian with 2K+1 taps.
class GaussianKernel {
 public:
  /// `size` must be odd and positive, `sigma` positive.
  GaussianKernel(std::size_t size, double sigma);

  std::size_t half_width() const noexcept { return half_width_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double sigma() const noexcept { return sigma_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::size_t half_width_;
  double sigma_;
  std::vector<double> weights_;
};

inline GaussianKernel gaussian_kernel(std::size_t size, double sigma) { return GaussianKernel(size, sigma); }

class KernelBank {
 public:
  explicit KernelBank(std::vector<GaussianKernel> kernels);
  /// Pairs sizes[i] with sigmas[i].
  KernelBank(std::span<const std::size_t> sizes, std::span<const double> sigmas);

  /// Sizes {5, 7, 11, 15, 19} with sigmas {1, 3, 5, 7, 10}.
  static KernelBank standard();

  const std::vector<GaussianKernel>& kernels() const noexcept { return kernels_; }
  std::size_t size() const noexcept { return kernels_.size(); }

 private:
  std::vector<GaussianKernel> kernels_;
};

/// Same-length convolution with zero padding:
///   out[n] = sum_j a[n - j] * w[j + K],  j in [-K, K].
std::vector<double> convolve_same(std::span<const double> a, const GaussianKernel& kernel);

/// Transpose of convolve_same (correlation with the kernel). Equals
/// convolve_same for symmetric kernels.
std::vector<double> correlate_same(std::span<const double> g, const GaussianKernel& kernel);

/// Mean over the bank of convolve_same(theta, kernel).
std::vector<double> bank_smooth(std::span<const double> theta, const KernelBank& bank);

/// Adjoint of bank_smooth: maps a gradient on the smoothed signal back to theta.
std::vector<double> bank_smooth_adjoint(std::span<const double> grad, const KernelBank& bank);

}  // namespace ecgadv
