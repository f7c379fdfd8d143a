#include "gpkf/toeplitz.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gpkf/errors.hpp"
#include "gpkf/numerics.hpp"

namespace gpkf {
namespace {

// Prediction error variances below this fraction of autocov[0] are treated as
// a breakdown; the recursion loses all precision well before reaching zero.
constexpr double kRelativeVarianceFloor = 1e-14;

// Runs the Durbin recursion over orders 0..n-1, calling
// visit(k, coefficients a_{k,1..k}, v_k) at each order. Returns false on breakdown.
template <typename Visit>
bool durbin(std::span<const double> r, double jitter, Visit&& visit) {
  const std::size_t n = r.size();
  const double r0 = r[0] + jitter;
  const double floor = kRelativeVarianceFloor * r0;
  std::vector<double> a;
  a.reserve(n);
  double v = r0;
  if (!(v > floor)) return false;
  visit(std::size_t{0}, std::span<const double>(), v);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = r[k];
    for (std::size_t j = 1; j < k; ++j) acc -= a[j - 1] * r[k - j];
    const double kappa = acc / v;
    if (!(std::abs(kappa) < 1.0)) return false;
    // a_{k,j} = a_{k-1,j} - kappa * a_{k-1,k-j}, updated pairwise in place.
    for (std::size_t j = 1, i = k - 1; j <= i; ++j, --i) {
      const double aj = a[j - 1];
      const double ai = a[i - 1];
      a[j - 1] = aj - kappa * ai;
      if (i != j) a[i - 1] = ai - kappa * aj;
    }
    a.push_back(kappa);
    v *= (1.0 - kappa * kappa);
    if (!(v > floor) || !std::isfinite(v)) return false;
    visit(k, std::span<const double>(a), v);
  }
  return true;
}

void check_shapes(std::span<const double> autocov, const Matrix& m) {
  if (autocov.empty() || static_cast<Eigen::Index>(autocov.size()) != m.rows())
    throw std::invalid_argument("toeplitz: autocovariance length must equal series length");
}

}  // namespace

ToeplitzLogLikelihood toeplitz_log_likelihood(std::span<const double> autocov,
                                              const Matrix& series) {
  check_shapes(autocov, series);
  const Eigen::Index axes = series.cols();
  const double n = static_cast<double>(series.rows());
  for (double level : kJitterLadder) {
    const double jitter = level * autocov[0];
    double quad = 0.0;
    double log_det = 0.0;
    const bool ok = durbin(autocov, jitter, [&](std::size_t k, std::span<const double> a, double v) {
      log_det += std::log(v);
      for (Eigen::Index c = 0; c < axes; ++c) {
        double e = series(static_cast<Eigen::Index>(k), c);
        for (std::size_t j = 1; j <= k; ++j)
          e -= a[j - 1] * series(static_cast<Eigen::Index>(k - j), c);
        quad += e * e / v;
      }
    });
    if (!ok) continue;
    const double value = -0.5 * quad - 0.5 * static_cast<double>(axes) * log_det -
                         0.5 * static_cast<double>(axes) * n * std::log(2.0 * std::numbers::pi);
    return {value, jitter};
  }
  throw NumericalFailure("Levinson-Durbin recursion failed at every jitter level");
}

ToeplitzSample toeplitz_sample(std::span<const double> autocov, const Matrix& normals) {
  check_shapes(autocov, normals);
  const Eigen::Index axes = normals.cols();
  Matrix x(normals.rows(), axes);
  for (double level : kJitterLadder) {
    const double jitter = level * autocov[0];
    const bool ok = durbin(autocov, jitter, [&](std::size_t k, std::span<const double> a, double v) {
      const double sd = std::sqrt(v);
      const auto row = static_cast<Eigen::Index>(k);
      for (Eigen::Index c = 0; c < axes; ++c) {
        double mean = 0.0;
        for (std::size_t j = 1; j <= k; ++j) mean += a[j - 1] * x(row - static_cast<Eigen::Index>(j), c);
        x(row, c) = mean + sd * normals(row, c);
      }
    });
    if (ok) return {std::move(x), jitter};
  }
  throw NumericalFailure("Levinson-Durbin recursion failed at every jitter level");
}

}  // namespace gpkf
