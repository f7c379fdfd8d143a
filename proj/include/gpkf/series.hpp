#pragma once

#include <string>
#include <vector>

#include "gpkf/types.hpp"

namespace gpkf {

/// Uniformly sampled vector series. Row i holds the sample at start_time + i.
struct TimeSeries {
  TimeIndex start_time = 0;
  Matrix values;                      ///< length x dim
  std::vector<std::string> columns;   ///< optional names of the value columns

  Eigen::Index length() const noexcept { return values.rows(); }
  Eigen::Index dim() const noexcept { return values.cols(); }
  TimeIndex time_at(Eigen::Index row) const noexcept { return start_time + row; }
  Vector row(Eigen::Index i) const { return values.row(i).transpose(); }
};

/// Measurement-error residuals v_t; one column per axis.
using ResidualSeries = TimeSeries;

}  // namespace gpkf
