#include "gpkf/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gpkf/errors.hpp"

namespace gpkf {

PsdFactor::PsdFactor(Matrix lower, double jitter_used)
    : lower_(std::move(lower)), jitter_(jitter_used) {}

PsdFactor psd_factor(const Matrix& matrix) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("psd_factor: matrix not square");
  const Eigen::Index n = matrix.rows();
  if (n == 0) return PsdFactor(Matrix(0, 0), 0.0);

  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("psd_factor: matrix not symmetric");

  const double mean_diag = matrix.diagonal().mean();
  for (double level : kJitterLadder) {
    const double jitter = level * mean_diag;
    if (level > 0.0 && !(jitter > 0.0)) break;  // nonpositive diagonal; jitter cannot help
    Matrix shifted = matrix;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Matrix lower = llt.matrixL();
    if ((lower.diagonal().array() > 0.0).all() && lower.allFinite())
      return PsdFactor(std::move(lower), jitter);
  }
  throw NumericalFailure("Cholesky factorization failed at every jitter level (n=" +
                         std::to_string(n) + ")");
}

Matrix solve_psd(const PsdFactor& factor, const Matrix& rhs) {
  if (rhs.rows() != factor.dimension())
    throw std::invalid_argument("solve_psd: dimension mismatch");
  const auto lower = factor.lower().triangularView<Eigen::Lower>();
  Matrix x = lower.solve(rhs);
  return lower.transpose().solve(x);
}

double logdet(const PsdFactor& factor) {
  return 2.0 * factor.lower().diagonal().array().log().sum();
}

Matrix guarded_solve(const Matrix& lhs, const Matrix& rhs) {
  if (lhs.rows() != lhs.cols() || lhs.rows() != rhs.rows())
    throw std::invalid_argument("guarded_solve: dimension mismatch");
  if (lhs.rows() == 0) return rhs;
  Eigen::JacobiSVD<Matrix> svd(lhs);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || !std::isfinite(smax) || smax / smin > kMaxConditionNumber)
    throw NumericalFailure("inner system numerically singular");
  return lhs.partialPivLu().solve(rhs);
}

Matrix smw_inverse(const Matrix& a_inverse, const Matrix& u, const Matrix& v) {
  const Eigen::Index n = a_inverse.rows();
  if (a_inverse.cols() != n || u.rows() != n || v.cols() != n || u.cols() != v.rows())
    throw std::invalid_argument("smw_inverse: dimension mismatch");
  const Eigen::Index m = u.cols();
  const Matrix a_inv_u = a_inverse * u;  // N x m
  const Matrix v_a_inv = v * a_inverse;  // m x N
  Matrix inner = Matrix::Identity(m, m) + v * a_inv_u;
  return a_inverse - a_inv_u * guarded_solve(inner, v_a_inv);
}

}  // namespace gpkf
