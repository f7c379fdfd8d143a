#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "gpkf/kernels.hpp"
#include "gpkf/series.hpp"

namespace gpkf {

// Likelihood of residuals under a zero-mean GP noise model. Each column of a
// ResidualSeries is an independent draw from the same kernel, so
// multi-axis likelihoods are sums of per-axis terms.

/// Uses the Levinson-Durbin recursion on the Toeplitz Gram matrix.
double log_marginal_likelihood(const KernelSpec& spec, const ResidualSeries& residuals);
/// Same quantity through a dense Cholesky factorization (jitter ladder applies).
double log_marginal_likelihood_dense(const KernelSpec& spec, const ResidualSeries& residuals);

/// Uniform prior, optionally restricted to a box; outside the box the log density is -inf.
struct FlatPrior {
  double variance_min = 0.0;
  double variance_max = std::numeric_limits<double>::infinity();
  double lengthscale_min = 0.0;
  double lengthscale_max = std::numeric_limits<double>::infinity();
};

/// Independent log-normal priors on variance and lengthscale.
/// The lengthscale term is skipped for the White family.
struct LogNormalPrior {
  double log_variance_location = 0.0;
  double log_variance_scale = 1.0;
  double log_lengthscale_location = 0.0;
  double log_lengthscale_scale = 1.0;
};

using Hyperprior = std::variant<FlatPrior, LogNormalPrior>;

double log_prior_density(const KernelSpec& spec, const Hyperprior& prior);

/// Unnormalized log posterior: log likelihood plus log prior density.
double log_posterior(const KernelSpec& spec, const ResidualSeries& residuals,
                     const Hyperprior& prior = FlatPrior{});

struct FitOptions {
  std::size_t restarts = 5;
  std::size_t max_iterations = 500;
  double simplex_tolerance = 1e-6;  ///< simplex diameter in log-hyperparameter space
};

struct FitResult {
  KernelSpec spec;
  double log_likelihood;
  std::size_t iterations;  ///< of the winning restart
  bool converged;
};

inline constexpr std::size_t kMinFitLength = 8;

/**
 * ML-II estimate of (variance, lengthscale) for a kernel family.
 *
 * Nelder-Mead over (log variance, log lengthscale), started from `restarts`
 * points log-spaced over lengthscale in [1, n/2] and variance in
 * [0.01, 100] x the residuals' mean square. Restarts run in parallel and are
 * merged by likelihood, ties going to the lower restart index. A restart whose
 * likelihood evaluations all fail is skipped.
 *
 * Throws InsufficientData if n < 8 or the residuals are identically zero, and
 * NumericalFailure if every restart fails.
 */
FitResult fit_ml2(KernelFamily family, const ResidualSeries& residuals,
                  const FitOptions& options = {});

/// `axes` independent draws of N(0, gram(spec, 0..n-1)), deterministic in `seed`.
ResidualSeries sample_gp(const KernelSpec& spec, std::size_t n, std::size_t axes,
                         std::uint64_t seed);

/// Standard normals in the order sample_gp consumes them (n x axes, filled row by row).
Matrix standard_normals(std::size_t n, std::size_t axes, std::uint64_t seed);

/// Colors `normals` (n x axes) with the kernel via the Toeplitz recursion.
Matrix color_normals(const KernelSpec& spec, const Matrix& normals);
/// Dense reference for color_normals: Cholesky factor times the normals.
Matrix color_normals_dense(const KernelSpec& spec, const Matrix& normals);

struct AcfResult {
  std::vector<std::size_t> lags;
  std::vector<double> coefficients;
  double confidence_band;  ///< 1.96 / sqrt(n)
};

/// Biased sample autocorrelation at lags 0..max_lag, computed in parallel over lags.
/// Throws std::invalid_argument unless n > max_lag >= 1, DegenerateSeries on zero variance.
AcfResult acf(std::span<const double> series, std::size_t max_lag);
/// Single-threaded reference for acf().
AcfResult acf_serial(std::span<const double> series, std::size_t max_lag);

}  // namespace gpkf
