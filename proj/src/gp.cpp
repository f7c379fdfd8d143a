#include "gpkf/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

#include "gpkf/errors.hpp"
#include "gpkf/numerics.hpp"
#include "gpkf/toeplitz.hpp"
#include "nelder_mead.hpp"

namespace gpkf {
namespace {

void require_nonempty(const ResidualSeries& residuals) {
  if (residuals.length() < 1 || residuals.dim() < 1)
    throw std::invalid_argument("residual series is empty");
}

double log_normal_density(double x, double location, double scale) {
  const double z = (std::log(x) - location) / scale;
  return -0.5 * z * z - std::log(x * scale * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

double log_marginal_likelihood(const KernelSpec& spec, const ResidualSeries& residuals) {
  require_nonempty(residuals);
  const auto r = autocovariance(spec, static_cast<std::size_t>(residuals.length()));
  return toeplitz_log_likelihood(r, residuals.values).value;
}

double log_marginal_likelihood_dense(const KernelSpec& spec, const ResidualSeries& residuals) {
  require_nonempty(residuals);
  const Eigen::Index n = residuals.length();
  const auto factor = psd_factor(gram_consecutive(spec, static_cast<std::size_t>(n)));
  const Matrix& v = residuals.values;
  const Matrix whitened = factor.lower().triangularView<Eigen::Lower>().solve(v);
  const double axes = static_cast<double>(v.cols());
  return -0.5 * whitened.squaredNorm() - 0.5 * axes * logdet(factor) -
         0.5 * axes * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

double log_prior_density(const KernelSpec& spec, const Hyperprior& prior) {
  const double var = spec.variance();
  const double len = spec.lengthscale();
  const bool has_length = spec.family() != KernelFamily::White;
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FlatPrior>) {
          const bool inside = var >= p.variance_min && var <= p.variance_max &&
                              (!has_length || (len >= p.lengthscale_min && len <= p.lengthscale_max));
          return inside ? 0.0 : -std::numeric_limits<double>::infinity();
        } else {
          double lp = log_normal_density(var, p.log_variance_location, p.log_variance_scale);
          if (has_length)
            lp += log_normal_density(len, p.log_lengthscale_location, p.log_lengthscale_scale);
          return lp;
        }
      },
      prior);
}

double log_posterior(const KernelSpec& spec, const ResidualSeries& residuals,
                     const Hyperprior& prior) {
  const double lp = log_prior_density(spec, prior);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  return log_marginal_likelihood(spec, residuals) + lp;
}

FitResult fit_ml2(KernelFamily family, const ResidualSeries& residuals, const FitOptions& options) {
  require_nonempty(residuals);
  const Eigen::Index n = residuals.length();
  if (n < static_cast<Eigen::Index>(kMinFitLength))
    throw InsufficientData("ML-II fit needs at least 8 samples per axis, got " + std::to_string(n));
  if (options.restarts < 1) throw std::invalid_argument("fit_ml2: restarts must be >= 1");

  const double mean_square = residuals.values.squaredNorm() / static_cast<double>(residuals.values.size());
  if (!(mean_square > 0.0)) throw InsufficientData("residuals are identically zero");

  if (family == KernelFamily::White) {
    // Closed form: the likelihood is maximized at the mean square.
    KernelSpec spec(family, mean_square);
    return {spec, log_marginal_likelihood(spec, residuals), 0, true};
  }

  const double log_ms = std::log(mean_square);
  const double log_len_max = std::log(1e3 * static_cast<double>(n));
  auto objective = [&](const Vector& p) {
    if (!(std::abs(p(0) - log_ms) < 30.0) || !(p(1) > std::log(1e-3)) || !(p(1) < log_len_max))
      return std::numeric_limits<double>::infinity();
    try {
      const double ll = log_marginal_likelihood(KernelSpec(family, std::exp(p(0)), std::exp(p(1))), residuals);
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    } catch (const NumericalFailure&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const std::size_t restarts = options.restarts;
  const double len_span = std::log(0.5 * static_cast<double>(n));
  std::vector<std::optional<detail::NelderMeadResult>> results(restarts);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < restarts; ++i) {
    const double f = restarts == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(restarts - 1);
    double g = 0.5 + 0.6180339887498949 * static_cast<double>(i);
    g -= std::floor(g);
    Vector start(2);
    start << log_ms + std::log(0.01) + g * std::log(1e4), f * len_span;
    auto r = detail::nelder_mead(objective, start, 0.5, options.simplex_tolerance,
                                 options.max_iterations);
    if (std::isfinite(r.minimum)) results[i] = std::move(r);
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < restarts; ++i) {
    if (!results[i]) continue;
    if (!best || results[i]->minimum < results[*best]->minimum) best = i;
  }
  if (!best) throw NumericalFailure("every ML-II restart failed to evaluate the likelihood");
  const auto& r = *results[*best];
  const bool any_converged = std::any_of(results.begin(), results.end(),
                                         [](const auto& x) { return x && x->converged; });
  return {KernelSpec(family, std::exp(r.minimizer(0)), std::exp(r.minimizer(1))), -r.minimum,
          r.iterations, any_converged};
}

Matrix standard_normals(std::size_t n, std::size_t axes, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(axes));
  for (Eigen::Index t = 0; t < out.rows(); ++t)
    for (Eigen::Index a = 0; a < out.cols(); ++a) out(t, a) = normal(rng);
  return out;
}

Matrix color_normals(const KernelSpec& spec, const Matrix& normals) {
  const auto r = autocovariance(spec, static_cast<std::size_t>(normals.rows()));
  return toeplitz_sample(r, normals).values;
}

Matrix color_normals_dense(const KernelSpec& spec, const Matrix& normals) {
  const auto factor = psd_factor(gram_consecutive(spec, static_cast<std::size_t>(normals.rows())));
  return factor.lower().triangularView<Eigen::Lower>() * normals;
}

ResidualSeries sample_gp(const KernelSpec& spec, std::size_t n, std::size_t axes,
                         std::uint64_t seed) {
  if (n < 1 || axes < 1) throw std::invalid_argument("sample_gp: n and axes must be >= 1");
  ResidualSeries out;
  out.start_time = 0;
  out.values = color_normals(spec, standard_normals(n, axes, seed));
  return out;
}

namespace {

struct Centered {
  std::vector<double> x;
  double denominator;
};

Centered center(std::span<const double> series, std::size_t max_lag) {
  if (max_lag < 1 || series.size() <= max_lag)
    throw std::invalid_argument("acf: need series length > max_lag >= 1");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  Centered c{std::vector<double>(series.size()), 0.0};
  for (std::size_t i = 0; i < series.size(); ++i) {
    c.x[i] = series[i] - mean;
    c.denominator += c.x[i] * c.x[i];
  }
  if (!(c.denominator > 0.0)) throw DegenerateSeries("series has zero sample variance");
  return c;
}

AcfResult make_result(std::size_t n, std::size_t max_lag) {
  AcfResult r;
  r.lags.resize(max_lag + 1);
  r.coefficients.resize(max_lag + 1);
  for (std::size_t h = 0; h <= max_lag; ++h) r.lags[h] = h;
  r.coefficients[0] = 1.0;
  r.confidence_band = 1.96 / std::sqrt(static_cast<double>(n));
  return r;
}

}  // namespace

AcfResult acf(std::span<const double> series, std::size_t max_lag) {
  const auto c = center(series, max_lag);
  auto r = make_result(series.size(), max_lag);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const auto lags = static_cast<std::ptrdiff_t>(max_lag);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t h = 1; h <= lags; ++h) {
    double s = 0.0;
    for (std::ptrdiff_t t = 0; t + h < n; ++t) s += c.x[t] * c.x[t + h];
    r.coefficients[h] = s / c.denominator;
  }
  return r;
}

AcfResult acf_serial(std::span<const double> series, std::size_t max_lag) {
  const auto c = center(series, max_lag);
  auto r = make_result(series.size(), max_lag);
  for (std::size_t h = 1; h <= max_lag; ++h) {
    double s = 0.0;
    for (std::size_t t = 0; t + h < series.size(); ++t) s += c.x[t] * c.x[t + h];
    r.coefficients[h] = s / c.denominator;
  }
  return r;
}

}  // namespace gpkf
