#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "gpkf/kernels.hpp"
#include "gpkf/series.hpp"

namespace gpkf {

/**
 * Linear state-space model
 *
 *   x_t = F(t-1) x_{t-1} + w_t,   w_t ~ N(0, W(t))
 *   z_t = H(t) x_t + v_t,         v ~ GP(0, k)
 *
 * with x at the filter's start time minus one distributed as N(x0, P0).
 * Providers must be pure functions of t.
 */
struct StateSpaceModel {
  using MatrixProvider = std::function<Matrix(TimeIndex)>;

  Eigen::Index state_dim = 0;
  Eigen::Index meas_dim = 0;
  MatrixProvider transition;     ///< F(t), n x n, maps x_t to x_{t+1}
  MatrixProvider observation;    ///< H(t), m x n
  MatrixProvider process_noise;  ///< W(t), n x n, covariance of the noise entering x_t
  Vector x0;
  Matrix P0;

  static StateSpaceModel constant(Matrix F, Matrix H, Matrix W, Vector x0, Matrix P0);

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

/// One past measurement and the prediction that was current when it arrived.
struct WindowEntry {
  TimeIndex time;
  Vector measurement;           ///< z_i
  Vector predicted_measurement; ///< H_i x_i^-
  Matrix predicted_meas_cov;    ///< H_i P_i^- H_i^T
  Matrix h_p;                   ///< H_i P_i^-
};

/// Cached inverse of the window's joint measurement covariance, kept by the
/// sliding-window path. `first_time` is the time of the oldest covered entry.
struct WindowInverse {
  TimeIndex first_time = 0;
  Matrix inverse;
  std::size_t updates_since_refresh = 0;
};

/**
 * Filter state after processing the measurement at `time`.
 *
 * A window capacity N means the estimate at t conditions on the N most recent
 * measurements z_{t-N+1}..z_t, i.e. on at most N-1 past ones. N = 1 is the
 * classical Kalman filter. The buffer holds up to N entries ending at `time`.
 */
struct FilterState {
  TimeIndex time = 0;
  Vector mean;
  Matrix covariance;
  std::vector<WindowEntry> window;
  std::optional<std::size_t> window_capacity;  ///< nullopt: unbounded
  std::optional<WindowInverse> cache;

  /// Prior state at `time` (the step before the first measurement).
  static FilterState initial(const StateSpaceModel& model,
                             std::optional<std::size_t> window_capacity, TimeIndex time = 0);
};

struct Prediction {
  Vector mean;
  Matrix covariance;
};

struct Estimate {
  TimeIndex time = 0;
  Vector mean;
  Matrix covariance;
  Vector predicted_mean;
  Matrix predicted_covariance;
  Vector innovation;             ///< z_t - zhat_t
  Matrix innovation_covariance;  ///< L_t
  Matrix gain;                   ///< K_t
  std::size_t window_length = 0; ///< buffered measurements after this step, including z_t
  bool window_frozen = false;    ///< set on the step where a covariance-threshold policy froze N
};

struct StepResult {
  FilterState state;
  Estimate estimate;
};

/// x_t^- = F x_{t-1},  P_t^- = F P_{t-1} F^T + W(t), for t = state.time + 1.
Prediction predict(const StateSpaceModel& model, const FilterState& state);

/// Classical Kalman update with white measurement covariance V. Leaves the window untouched.
StepResult kf_step(const StateSpaceModel& model, FilterState state, const Vector& z,
                   const Matrix& V);

/**
 * One step of the GP-noise filter with the window covariance factored directly.
 *
 *   zhat = H x^- + C S^-1 (Z_past - E[Z_past])
 *   L    = H P^- H^T + k(t,t) I - C S^-1 C^T
 *   K    = P^- H^T L^-1
 *   x    = x^- + K (z - zhat),  P = P^- - K (P^- H^T)^T
 *
 * C holds k(t, t_j) I_m per past entry and S = assemble_var_z(past entries).
 * Throws WindowCorrupt if the window is not consecutive up to state.time and
 * NumericalFailure if a factorization fails.
 */
StepResult gpkf_step(const StateSpaceModel& model, const KernelSpec& kernel, FilterState state,
                     const Vector& z);

/// blockdiag(H_i P_i^- H_i^T) + gram(kernel, times) (x) I_m, symmetrized.
Matrix assemble_var_z(std::span<const WindowEntry> window, const KernelSpec& kernel);

/// Direct re-factorizations of the cached inverse happen at least this often.
inline constexpr std::size_t kWindowInverseRefreshInterval = 256;

/**
 * Same contract as gpkf_step for a bounded window, but keeps S^-1 across steps.
 * Each step borders the inverse with the new measurement (its Schur complement
 * is exactly L_t) and drops the oldest block with a block downdate, so only
 * m x m systems are solved per step. Requires a bounded window_capacity.
 */
StepResult gpkf_step_windowed_fast(const StateSpaceModel& model, const KernelSpec& kernel,
                                   FilterState state, const Vector& z);

/// Smallest N >= 1 with k(0, l) < k_min for every lag l >= N.
/// Throws InvalidThreshold unless 0 < k_min < variance.
std::size_t window_by_correlation(const KernelSpec& kernel, double k_min);

struct FixedWindow {
  std::size_t length;
  friend bool operator==(const FixedWindow&, const FixedWindow&) = default;
};
struct CorrelationWindow {
  double k_min;
  friend bool operator==(const CorrelationWindow&, const CorrelationWindow&) = default;
};
/// Unbounded until trace(P_t) < trace_threshold, then N freezes at the current window length.
struct CovarianceWindow {
  double trace_threshold;
  friend bool operator==(const CovarianceWindow&, const CovarianceWindow&) = default;
};
struct UnboundedWindow {
  friend bool operator==(const UnboundedWindow&, const UnboundedWindow&) = default;
};

using WindowPolicy = std::variant<FixedWindow, CorrelationWindow, CovarianceWindow, UnboundedWindow>;

/// Policy object returned by window_by_covariance.
inline CovarianceWindow window_by_covariance(double trace_threshold) {
  if (!(trace_threshold >= 0.0)) throw std::invalid_argument("covariance threshold must be >= 0");
  return CovarianceWindow{trace_threshold};
}

std::string_view policy_name(const WindowPolicy& policy);

enum class SolvePath { Direct, Sliding };

/// Streams measurements through the GP-noise filter under a window policy.
class GpFilter {
 public:
  /// `first_time` is the time stamp of the first measurement.
  GpFilter(StateSpaceModel model, KernelSpec kernel, WindowPolicy policy,
           SolvePath path = SolvePath::Sliding, TimeIndex first_time = 1);

  Estimate step(const Vector& z);

  const FilterState& state() const noexcept { return state_; }
  /// Current N, or nullopt while the window is unbounded.
  std::optional<std::size_t> window_capacity() const noexcept { return state_.window_capacity; }
  std::optional<TimeIndex> frozen_at() const noexcept { return frozen_at_; }

 private:
  StateSpaceModel model_;
  KernelSpec kernel_;
  WindowPolicy policy_;
  SolvePath path_;
  FilterState state_;
  std::optional<TimeIndex> frozen_at_;
};

std::vector<Estimate> run_gp_filter(const StateSpaceModel& model, const KernelSpec& kernel,
                                    const WindowPolicy& policy, const TimeSeries& measurements,
                                    SolvePath path = SolvePath::Sliding);

std::vector<Estimate> run_kalman_filter(const StateSpaceModel& model, const Matrix& V,
                                        const TimeSeries& measurements);

struct Posterior {
  TimeIndex time;
  Vector mean;
  Matrix covariance;
};

inline constexpr Eigen::Index kBatchOracleMaxHorizon = 200;

/**
 * Exact filtering distributions p(x_t | z_1..z_t) by Gaussian conditioning on
 * the dense joint covariance of all states and measurements. Independent of
 * the recursive filters; meant for tests and small runs (T <= 200).
 */
std::vector<Posterior> batch_oracle(const StateSpaceModel& model, const KernelSpec& kernel,
                                    const TimeSeries& measurements);

}  // namespace gpkf
