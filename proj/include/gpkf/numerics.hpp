#pragma once

#include <array>

#include "gpkf/types.hpp"

namespace gpkf {

/// Multipliers of mean(diagonal) tried, in order, as diagonal jitter.
inline constexpr std::array<double, 5> kJitterLadder{0.0, 1e-12, 1e-10, 1e-8, 1e-6};

/// Inner systems with a larger condition number are reported as singular.
inline constexpr double kMaxConditionNumber = 1e12;

/// Cholesky factor of (K + jitter * I).
class PsdFactor {
 public:
  PsdFactor(Matrix lower, double jitter_used);

  const Matrix& lower() const noexcept { return lower_; }
  double jitter_used() const noexcept { return jitter_; }
  Eigen::Index dimension() const noexcept { return lower_.rows(); }

 private:
  Matrix lower_;
  double jitter_;
};

/**
 * Factors a symmetric matrix, escalating diagonal jitter through kJitterLadder
 * (scaled by the mean diagonal) until the Cholesky factorization succeeds.
 *
 * Throws std::invalid_argument if the input is not square or not symmetric to
 * 1e-10 relative tolerance, and NumericalFailure if every jitter level fails.
 */
PsdFactor psd_factor(const Matrix& matrix);

/// Solves (K + jitter * I) X = rhs.
Matrix solve_psd(const PsdFactor& factor, const Matrix& rhs);

/// log det(K + jitter * I).
double logdet(const PsdFactor& factor);

/**
 * (A + U V)^-1 from A^-1 via the Woodbury identity
 *   A^-1 - A^-1 U (I + V A^-1 U)^-1 V A^-1.
 * Only the m x m inner system is solved. Throws NumericalFailure if its
 * condition number exceeds kMaxConditionNumber.
 */
Matrix smw_inverse(const Matrix& a_inverse, const Matrix& u, const Matrix& v);

/// Solves a small general square system, guarding against near-singularity.
Matrix guarded_solve(const Matrix& lhs, const Matrix& rhs);

}  // namespace gpkf
