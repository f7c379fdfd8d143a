#pragma once

#include <span>

#include "gpkf/types.hpp"

// Symmetric positive-definite Toeplitz covariances (a stationary kernel on
// consecutive integer times) handled through the Levinson-Durbin recursion:
// O(n^2) time and O(n) memory instead of a dense O(n^3) Cholesky.
//
// The recursion yields, for every k, the one-step predictor of x_k from
// x_{k-1}..x_0 and its error variance v_k. Those are the rows of the
// Cholesky factor of K expressed in innovations form, so a sample built from
// them with the same standard-normal draws equals L * eps, and the likelihood
// equals the dense formula.

namespace gpkf {

struct ToeplitzLogLikelihood {
  double value;        ///< sum over columns of the zero-mean Gaussian log density
  double jitter_used;  ///< added to autocov[0]
};

/// `series` is n x axes; each column is an independent draw from N(0, K).
/// Throws NumericalFailure if the recursion breaks down at every jitter level.
ToeplitzLogLikelihood toeplitz_log_likelihood(std::span<const double> autocov,
                                              const Matrix& series);

struct ToeplitzSample {
  Matrix values;  ///< n x axes
  double jitter_used;
};

/// Maps i.i.d. standard normals (n x axes) to draws from N(0, K).
ToeplitzSample toeplitz_sample(std::span<const double> autocov, const Matrix& normals);

}  // namespace gpkf
