#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace gpkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Integer sample index. Kernel lengthscales are expressed in these units.
using TimeIndex = std::int64_t;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace gpkf
