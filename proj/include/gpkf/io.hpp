#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpkf/filter.hpp"
#include "gpkf/series.hpp"

// File formats.
//
// Time series (measurements, residuals, states): CSV with a header row whose
// first column is `t`; `t` must be consecutive ascending integers. Numbers may
// be plain or scientific; LF and CRLF line endings are accepted.
//
// Run configs: INI-style text, `[section]` headers and `key = value` lines,
// `#` or `;` starting a comment. Unknown sections or keys are rejected.
//
//   [model]    n, m, F (n*n), H (m*n), W (n*n), x0 (n), P0 (n*n); matrices row-major,
//              entries separated by commas and/or spaces
//   [kernel]   family (white|rbf|exponential|matern32|matern52), variance, lengthscale
//   [window]   exactly one of: fixed = N | k_min = x | tau = x | unbounded = true
//   [run]      horizon (default 100), seed (default 0)
//   [fit]      log_likelihood, iterations, converged (written by `gpkf fit`)

namespace gpkf {

/// Constant-matrix model as written in config files.
struct ModelConfig {
  Eigen::Index n = 1;
  Eigen::Index m = 1;
  Matrix F, H, W;
  Vector x0;
  Matrix P0;

  StateSpaceModel to_model() const;
  friend bool operator==(const ModelConfig& a, const ModelConfig& b);
};

struct FitInfo {
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  friend bool operator==(const FitInfo&, const FitInfo&) = default;
};

struct RunConfig {
  ModelConfig model;
  KernelSpec kernel{KernelFamily::White, 1.0};
  WindowPolicy window = FixedWindow{1};
  std::size_t horizon = 100;
  std::uint64_t seed = 0;
  std::optional<FitInfo> fit;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// A kernel on its own, as produced by `gpkf fit`. Only [kernel] and [fit] are allowed.
struct KernelConfig {
  KernelSpec kernel;
  std::optional<FitInfo> fit;
  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// Formats with 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

RunConfig read_config(std::istream& in);
RunConfig read_config(const std::string& path);
void write_config(std::ostream& out, const RunConfig& config);
void write_config(const std::string& path, const RunConfig& config);

KernelConfig read_kernel_config(std::istream& in);
KernelConfig read_kernel_config(const std::string& path);
void write_kernel_config(std::ostream& out, const KernelConfig& config);
void write_kernel_config(const std::string& path, const KernelConfig& config);

TimeSeries read_timeseries(std::istream& in);
TimeSeries read_timeseries(const std::string& path);
/// Header `t,<prefix>1..<prefix>m` unless the series carries column names.
void write_timeseries(std::ostream& out, const TimeSeries& series, std::string_view prefix);
void write_timeseries(const std::string& path, const TimeSeries& series, std::string_view prefix);

/// Header `t,xhat_1..xhat_n,P_11..P_nn,innov_1..innov_m,L_11..L_mm`, matrices row-major.
void write_estimates_header(std::ostream& out, Eigen::Index n, Eigen::Index m);
void write_estimate_row(std::ostream& out, const Estimate& estimate);
void write_estimates(std::ostream& out, std::span<const Estimate> estimates, Eigen::Index n,
                     Eigen::Index m);
void write_estimates(const std::string& path, std::span<const Estimate> estimates, Eigen::Index n,
                     Eigen::Index m);

/// The persisted subset of an Estimate.
struct EstimateRow {
  TimeIndex time;
  Vector mean;
  Matrix covariance;
  Vector innovation;
  Matrix innovation_covariance;
};

struct EstimateTable {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::vector<EstimateRow> rows;
};

EstimateTable read_estimates(std::istream& in);

}  // namespace gpkf
