#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpkf/types.hpp"

namespace gpkf {

enum class KernelFamily { White, RBF, Exponential, Matern32, Matern52 };

std::string_view to_string(KernelFamily family);
/// Accepts the lowercase names used in config files ("white", "rbf", ...).
std::optional<KernelFamily> parse_kernel_family(std::string_view name);

/**
 * Stationary covariance function k(t, t') = variance * rho(|t - t'| / lengthscale).
 *
 * Correlation profiles:
 *   White        1 if r = 0 else 0
 *   RBF          exp(-r^2 / (2 l^2))
 *   Exponential  exp(-r / l)
 *   Matern32     (1 + sqrt(3) r / l) exp(-sqrt(3) r / l)
 *   Matern52     (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l)
 *
 * Lengthscale is in sample units and is pinned to 1 for White.
 */
class KernelSpec {
 public:
  /// Throws std::invalid_argument unless variance > 0 and lengthscale > 0.
  KernelSpec(KernelFamily family, double variance, double lengthscale = 1.0);

  KernelFamily family() const noexcept { return family_; }
  double variance() const noexcept { return variance_; }
  double lengthscale() const noexcept { return lengthscale_; }

  /// Covariance at lag r >= 0.
  double at_lag(double r) const noexcept;
  double operator()(TimeIndex t, TimeIndex t_prime) const noexcept;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelFamily family_;
  double variance_;
  double lengthscale_;
};

inline double eval_kernel(const KernelSpec& spec, TimeIndex t, TimeIndex t_prime) {
  return spec(t, t_prime);
}

/// Covariance at lags 0..count-1; the first row of the Toeplitz Gram matrix.
std::vector<double> autocovariance(const KernelSpec& spec, std::size_t count);

/// Gram matrix over arbitrary integer times. Rows are filled in parallel.
Matrix gram(const KernelSpec& spec, std::span<const TimeIndex> times);
/// Single-threaded reference for gram(); kept for equivalence tests and benchmarks.
Matrix gram_serial(const KernelSpec& spec, std::span<const TimeIndex> times);

/// Gram matrix over the consecutive times 0..count-1.
Matrix gram_consecutive(const KernelSpec& spec, std::size_t count);

}  // namespace gpkf
