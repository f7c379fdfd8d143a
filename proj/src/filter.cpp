#include "gpkf/filter.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gpkf/errors.hpp"
#include "gpkf/numerics.hpp"

namespace gpkf {

StateSpaceModel StateSpaceModel::constant(Matrix F, Matrix H, Matrix W, Vector x0, Matrix P0) {
  StateSpaceModel m;
  m.state_dim = F.rows();
  m.meas_dim = H.rows();
  m.transition = [F = std::move(F)](TimeIndex) { return F; };
  m.observation = [H = std::move(H)](TimeIndex) { return H; };
  m.process_noise = [W = std::move(W)](TimeIndex) { return W; };
  m.x0 = std::move(x0);
  m.P0 = std::move(P0);
  m.validate();
  return m;
}

void StateSpaceModel::validate() const {
  const Eigen::Index n = state_dim;
  const Eigen::Index m = meas_dim;
  if (n < 1 || m < 1) throw std::invalid_argument("model dimensions must be >= 1");
  if (!transition || !observation || !process_noise)
    throw std::invalid_argument("model providers must be set");
  if (x0.size() != n) throw std::invalid_argument("x0 must have state_dim entries");
  if (P0.rows() != n || P0.cols() != n) throw std::invalid_argument("P0 must be n x n");
  const Matrix F = transition(0);
  const Matrix H = observation(0);
  const Matrix W = process_noise(0);
  if (F.rows() != n || F.cols() != n) throw std::invalid_argument("F must be n x n");
  if (H.rows() != m || H.cols() != n) throw std::invalid_argument("H must be m x n");
  if (W.rows() != n || W.cols() != n) throw std::invalid_argument("W must be n x n");
}

FilterState FilterState::initial(const StateSpaceModel& model,
                                 std::optional<std::size_t> window_capacity, TimeIndex time) {
  if (window_capacity && *window_capacity < 1)
    throw std::invalid_argument("window capacity must be >= 1");
  FilterState s;
  s.time = time;
  s.mean = model.x0;
  s.covariance = model.P0;
  s.window_capacity = window_capacity;
  return s;
}

Prediction predict(const StateSpaceModel& model, const FilterState& state) {
  const TimeIndex t = state.time + 1;
  const Matrix F = model.transition(t - 1);
  return {F * state.mean, symmetrized(F * state.covariance * F.transpose() + model.process_noise(t))};
}

namespace {

struct Observation {
  Matrix H;
  Matrix h_p;       // H P^-
  Matrix b;         // H P^- H^T
  Vector predicted; // H x^-
};

Observation observe(const StateSpaceModel& model, TimeIndex t, const Prediction& pred) {
  Observation o;
  o.H = model.observation(t);
  o.h_p = o.H * pred.covariance;
  o.b = symmetrized(o.h_p * o.H.transpose());
  o.predicted = o.H * pred.mean;
  return o;
}

struct Update {
  Vector mean;
  Matrix covariance;
  Matrix gain;
  PsdFactor l_factor;
};

// x = x^- + K (z - zhat),  P = P^- - K J^T with J = P^- H^T and K = J L^-1.
Update apply_update(const Prediction& pred, const Observation& obs, const Vector& innovation,
                    const Matrix& L) {
  auto l_factor = psd_factor(L);
  const Matrix J = obs.h_p.transpose();
  Matrix K = solve_psd(l_factor, J.transpose()).transpose();
  Vector mean = pred.mean + K * innovation;
  Matrix cov = symmetrized(pred.covariance - K * J.transpose());
  return {std::move(mean), std::move(cov), std::move(K), std::move(l_factor)};
}

void check_measurement(const StateSpaceModel& model, const Vector& z) {
  if (z.size() != model.meas_dim) throw std::invalid_argument("measurement has wrong dimension");
}

void check_window(const FilterState& state) {
  const auto& w = state.window;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const TimeIndex expected = state.time - static_cast<TimeIndex>(w.size() - 1 - i);
    if (w[i].time != expected)
      throw WindowCorrupt("window entry " + std::to_string(i) + " has time " +
                          std::to_string(w[i].time) + ", expected " + std::to_string(expected));
  }
}

// Leaves only the entries conditioned on at the next step: at most N - 1.
void trim_to_history(FilterState& state) {
  if (!state.window_capacity) return;
  const std::size_t keep = *state.window_capacity - 1;
  if (state.window.size() > keep)
    state.window.erase(state.window.begin(),
                       state.window.begin() + static_cast<std::ptrdiff_t>(state.window.size() - keep));
}

// C = Cov(z_t, Z_past): block j is k(t, t_j) I_m.
Matrix cross_covariance(std::span<const WindowEntry> past, const KernelSpec& kernel, TimeIndex t,
                        Eigen::Index m) {
  Matrix c = Matrix::Zero(m, m * static_cast<Eigen::Index>(past.size()));
  for (std::size_t j = 0; j < past.size(); ++j) {
    const double k = kernel(t, past[j].time);
    for (Eigen::Index a = 0; a < m; ++a) c(a, static_cast<Eigen::Index>(j) * m + a) = k;
  }
  return c;
}

Vector stacked_deviation(std::span<const WindowEntry> past, Eigen::Index m) {
  Vector dev(m * static_cast<Eigen::Index>(past.size()));
  for (std::size_t j = 0; j < past.size(); ++j)
    dev.segment(static_cast<Eigen::Index>(j) * m, m) = past[j].measurement - past[j].predicted_measurement;
  return dev;
}

// Shared tail of both GP steps. `x` is S^-1 C^T (km x m) for the past window.
StepResult finish_gp_step(FilterState state, const KernelSpec& kernel, const Prediction& pred,
                          const Observation& obs, const Matrix& c, const Matrix& x,
                          const Vector& z, Matrix* l_inverse_out) {
  const TimeIndex t = state.time + 1;
  const Eigen::Index m = obs.H.rows();
  const std::span<const WindowEntry> past(state.window);

  Vector z_hat = obs.predicted;
  Matrix L = obs.b;
  L.diagonal().array() += kernel.variance();
  if (!past.empty()) {
    z_hat += x.transpose() * stacked_deviation(past, m);
    L -= c * x;
  }
  L = symmetrized(L);
  const Vector innovation = z - z_hat;
  auto upd = apply_update(pred, obs, innovation, L);
  if (l_inverse_out) *l_inverse_out = solve_psd(upd.l_factor, Matrix::Identity(m, m));

  state.window.push_back({t, z, obs.predicted, obs.b, obs.h_p});
  state.time = t;
  state.mean = upd.mean;
  state.covariance = upd.covariance;

  Estimate e;
  e.time = t;
  e.mean = std::move(upd.mean);
  e.covariance = std::move(upd.covariance);
  e.predicted_mean = pred.mean;
  e.predicted_covariance = pred.covariance;
  e.innovation = innovation;
  e.innovation_covariance = std::move(L);
  e.gain = std::move(upd.gain);
  e.window_length = state.window.size();
  return {std::move(state), std::move(e)};
}

}  // namespace

StepResult kf_step(const StateSpaceModel& model, FilterState state, const Vector& z,
                   const Matrix& V) {
  check_measurement(model, z);
  if (V.rows() != model.meas_dim || V.cols() != model.meas_dim)
    throw std::invalid_argument("V must be m x m");
  const TimeIndex t = state.time + 1;
  const Prediction pred = predict(model, state);
  const Observation obs = observe(model, t, pred);
  const Matrix L = symmetrized(V + obs.b);
  const Vector innovation = z - obs.predicted;
  auto upd = apply_update(pred, obs, innovation, L);

  state.time = t;
  state.mean = upd.mean;
  state.covariance = upd.covariance;
  Estimate e;
  e.time = t;
  e.mean = std::move(upd.mean);
  e.covariance = std::move(upd.covariance);
  e.predicted_mean = pred.mean;
  e.predicted_covariance = pred.covariance;
  e.innovation = innovation;
  e.innovation_covariance = L;
  e.gain = std::move(upd.gain);
  e.window_length = state.window.size();
  return {std::move(state), std::move(e)};
}

Matrix assemble_var_z(std::span<const WindowEntry> window, const KernelSpec& kernel) {
  if (window.empty()) throw std::invalid_argument("assemble_var_z: empty window");
  const Eigen::Index m = window.front().predicted_meas_cov.rows();
  const auto k = static_cast<Eigen::Index>(window.size());
  // Consecutive windows only need one kernel evaluation per lag.
  bool consecutive = true;
  for (Eigen::Index i = 1; i < k && consecutive; ++i)
    consecutive = window[static_cast<std::size_t>(i)].time == window.front().time + i;
  const std::vector<double> lags =
      consecutive ? autocovariance(kernel, static_cast<std::size_t>(k)) : std::vector<double>{};

  Matrix s = Matrix::Zero(k * m, k * m);
  for (Eigen::Index i = 0; i < k; ++i) {
    s.block(i * m, i * m, m, m) = window[static_cast<std::size_t>(i)].predicted_meas_cov;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double kij = consecutive ? lags[static_cast<std::size_t>(std::abs(i - j))]
                                     : kernel(window[static_cast<std::size_t>(i)].time,
                                              window[static_cast<std::size_t>(j)].time);
      for (Eigen::Index a = 0; a < m; ++a) s(i * m + a, j * m + a) += kij;
    }
  }
  return symmetrized(s);
}

StepResult gpkf_step(const StateSpaceModel& model, const KernelSpec& kernel, FilterState state,
                     const Vector& z) {
  check_measurement(model, z);
  check_window(state);
  trim_to_history(state);
  state.cache.reset();

  const TimeIndex t = state.time + 1;
  const Prediction pred = predict(model, state);
  const Observation obs = observe(model, t, pred);
  const std::span<const WindowEntry> past(state.window);
  Matrix c, x;
  if (!past.empty()) {
    c = cross_covariance(past, kernel, t, model.meas_dim);
    x = solve_psd(psd_factor(assemble_var_z(past, kernel)), c.transpose());
  }
  return finish_gp_step(std::move(state), kernel, pred, obs, c, x, z, nullptr);
}

namespace {

constexpr double kMaxBorderingCondition = 1e6;

bool cache_covers(const FilterState& state, Eigen::Index m) {
  if (!state.cache) return false;
  const auto& cache = *state.cache;
  if (cache.updates_since_refresh >= kWindowInverseRefreshInterval) return false;
  const auto size = m * static_cast<Eigen::Index>(state.window.size());
  if (cache.inverse.rows() != size) return false;
  return state.window.empty() || cache.first_time == state.window.front().time;
}

// Removes the first m x m block from the inverse of a symmetric matrix:
// (S_22)^-1 = M_22 - M_21 M_11^-1 M_12.
Matrix drop_leading_block(const Matrix& inv, Eigen::Index m) {
  const Eigen::Index rest = inv.rows() - m;
  const Matrix m11 = inv.topLeftCorner(m, m);
  const Matrix m12 = inv.topRightCorner(m, rest);
  Matrix out = inv.bottomRightCorner(rest, rest);
  out.noalias() -= m12.transpose() * guarded_solve(m11, m12);
  return symmetrized(out);
}

}  // namespace

StepResult gpkf_step_windowed_fast(const StateSpaceModel& model, const KernelSpec& kernel,
                                   FilterState state, const Vector& z) {
  if (!state.window_capacity)
    throw std::invalid_argument("gpkf_step_windowed_fast needs a bounded window");
  check_measurement(model, z);
  check_window(state);
  trim_to_history(state);

  const Eigen::Index m = model.meas_dim;
  const TimeIndex t = state.time + 1;
  const Prediction pred = predict(model, state);
  const Observation obs = observe(model, t, pred);

  const std::span<const WindowEntry> past(state.window);
  Matrix c, x;
  if (!past.empty()) c = cross_covariance(past, kernel, t, m);
  // A refresh solves for X through the factor rather than the explicit inverse,
  // which keeps nearly singular windows (smooth kernels, m > n) usable.
  const auto refresh = [&](WindowInverse& target) {
    target.first_time = past.empty() ? t : past.front().time;
    if (past.empty()) {
      target.inverse = Matrix(0, 0);
      return;
    }
    const PsdFactor factor = psd_factor(assemble_var_z(past, kernel));
    x = solve_psd(factor, c.transpose());
    target.inverse = symmetrized(solve_psd(factor, Matrix::Identity(factor.dimension(), factor.dimension())));
  };

  bool fresh = !cache_covers(state, m);
  WindowInverse cache;
  if (fresh) refresh(cache);
  else {
    cache = std::move(*state.cache);
    if (!past.empty()) x = cache.inverse * c.transpose();
  }
  state.cache.reset();

  Matrix l_inverse;
  std::optional<StepResult> attempt;
  while (!attempt) {
    try {
      attempt = fresh ? finish_gp_step(std::move(state), kernel, pred, obs, c, x, z, &l_inverse)
                      : finish_gp_step(state, kernel, pred, obs, c, x, z, &l_inverse);
    } catch (const NumericalFailure&) {
      if (fresh) throw;
      refresh(cache);  // the sliding inverse drifted too far
      fresh = true;
    }
  }
  StepResult result = std::move(*attempt);

  // Bordering with an ill-conditioned L amplifies round-off in every later
  // step, so such windows are re-factored directly instead.
  const double l_condition =
      result.estimate.innovation_covariance.norm() * l_inverse.norm();
  if (!(l_condition < kMaxBorderingCondition)) return result;

  // Border with the new measurement. Its Schur complement is L_t, so
  //   [S  C^T; C  d]^-1 = [M + X L^-1 X^T, -X L^-1; -L^-1 X^T, L^-1].
  const Eigen::Index k = cache.inverse.rows();
  Matrix bordered(k + m, k + m);
  if (k > 0) {
    const Matrix x_linv = x * l_inverse;
    bordered.topLeftCorner(k, k) = cache.inverse;
    bordered.topLeftCorner(k, k).noalias() += x_linv * x.transpose();
    bordered.topRightCorner(k, m) = -x_linv;
    bordered.bottomLeftCorner(m, k) = -x_linv.transpose();
  }
  bordered.bottomRightCorner(m, m) = l_inverse;

  const auto& window = result.state.window;
  const std::size_t history = *result.state.window_capacity - 1;
  cache.first_time = window.front().time;
  if (window.size() > history) {
    try {
      bordered = history == 0 ? Matrix(0, 0) : drop_leading_block(bordered, m);
    } catch (const NumericalFailure&) {
      return result;  // no cache; the next step factors directly
    }
    cache.first_time = window.size() > 1 ? window[1].time : t + 1;
  }
  cache.inverse = std::move(bordered);
  cache.updates_since_refresh = fresh ? 1 : cache.updates_since_refresh + 1;
  result.state.cache = std::move(cache);
  return result;
}

std::size_t window_by_correlation(const KernelSpec& kernel, double k_min) {
  if (!(k_min > 0.0) || !(k_min < kernel.variance()))
    throw InvalidThreshold("k_min must lie in (0, variance); got " + std::to_string(k_min));
  constexpr std::size_t kMaxScan = 100'000'000;
  for (std::size_t lag = 1; lag <= kMaxScan; ++lag)
    if (kernel.at_lag(static_cast<double>(lag)) < k_min) return lag;
  throw InvalidThreshold("kernel does not decay below k_min within 1e8 lags");
}

std::string_view policy_name(const WindowPolicy& policy) {
  struct Visitor {
    std::string_view operator()(const FixedWindow&) const { return "fixed"; }
    std::string_view operator()(const CorrelationWindow&) const { return "k_min"; }
    std::string_view operator()(const CovarianceWindow&) const { return "tau"; }
    std::string_view operator()(const UnboundedWindow&) const { return "unbounded"; }
  };
  return std::visit(Visitor{}, policy);
}

namespace {

std::optional<std::size_t> initial_capacity(const WindowPolicy& policy, const KernelSpec& kernel) {
  struct Visitor {
    const KernelSpec& kernel;
    std::optional<std::size_t> operator()(const FixedWindow& w) const {
      if (w.length < 1) throw std::invalid_argument("fixed window length must be >= 1");
      return w.length;
    }
    std::optional<std::size_t> operator()(const CorrelationWindow& w) const {
      return window_by_correlation(kernel, w.k_min);
    }
    std::optional<std::size_t> operator()(const CovarianceWindow& w) const {
      if (!(w.trace_threshold >= 0.0)) throw std::invalid_argument("trace threshold must be >= 0");
      return std::nullopt;
    }
    std::optional<std::size_t> operator()(const UnboundedWindow&) const { return std::nullopt; }
  };
  return std::visit(Visitor{kernel}, policy);
}

}  // namespace

GpFilter::GpFilter(StateSpaceModel model, KernelSpec kernel, WindowPolicy policy, SolvePath path,
                   TimeIndex first_time)
    : model_(std::move(model)),
      kernel_(kernel),
      policy_(policy),
      path_(path),
      state_(FilterState::initial(model_, initial_capacity(policy_, kernel_), first_time - 1)) {
  model_.validate();
}

Estimate GpFilter::step(const Vector& z) {
  StepResult r = (state_.window_capacity && path_ == SolvePath::Sliding)
                     ? gpkf_step_windowed_fast(model_, kernel_, std::move(state_), z)
                     : gpkf_step(model_, kernel_, std::move(state_), z);
  state_ = std::move(r.state);
  if (const auto* cov = std::get_if<CovarianceWindow>(&policy_); cov && !frozen_at_) {
    if (state_.covariance.trace() < cov->trace_threshold) {
      frozen_at_ = state_.time;
      state_.window_capacity = state_.window.size();
      state_.cache.reset();
      r.estimate.window_frozen = true;
    }
  }
  return std::move(r.estimate);
}

std::vector<Estimate> run_gp_filter(const StateSpaceModel& model, const KernelSpec& kernel,
                                    const WindowPolicy& policy, const TimeSeries& measurements,
                                    SolvePath path) {
  GpFilter filter(model, kernel, policy, path, measurements.start_time);
  std::vector<Estimate> out;
  out.reserve(static_cast<std::size_t>(measurements.length()));
  for (Eigen::Index i = 0; i < measurements.length(); ++i) out.push_back(filter.step(measurements.row(i)));
  return out;
}

std::vector<Estimate> run_kalman_filter(const StateSpaceModel& model, const Matrix& V,
                                        const TimeSeries& measurements) {
  model.validate();
  FilterState state = FilterState::initial(model, std::nullopt, measurements.start_time - 1);
  std::vector<Estimate> out;
  out.reserve(static_cast<std::size_t>(measurements.length()));
  for (Eigen::Index i = 0; i < measurements.length(); ++i) {
    auto r = kf_step(model, std::move(state), measurements.row(i), V);
    state = std::move(r.state);
    out.push_back(std::move(r.estimate));
  }
  return out;
}

std::vector<Posterior> batch_oracle(const StateSpaceModel& model, const KernelSpec& kernel,
                                    const TimeSeries& measurements) {
  model.validate();
  const Eigen::Index T = measurements.length();
  if (T < 1) return {};
  if (T > kBatchOracleMaxHorizon) throw std::invalid_argument("batch_oracle: horizon exceeds 200");
  if (measurements.dim() != model.meas_dim)
    throw std::invalid_argument("batch_oracle: measurement dimension mismatch");
  const Eigen::Index n = model.state_dim;
  const Eigen::Index m = model.meas_dim;
  const auto time = [&](Eigen::Index i) { return measurements.time_at(i); };

  // Unconditional moments of the state trajectory.
  std::vector<Vector> mu(static_cast<std::size_t>(T));
  Matrix cov_x(T * n, T * n);
  {
    Vector mean = model.x0;
    Matrix sigma = model.P0;
    for (Eigen::Index i = 0; i < T; ++i) {
      const Matrix F = model.transition(time(i) - 1);
      mean = F * mean;
      sigma = symmetrized(F * sigma * F.transpose() + model.process_noise(time(i)));
      mu[static_cast<std::size_t>(i)] = mean;
      cov_x.block(i * n, i * n, n, n) = sigma;
      // Cov(x_i, x_j) = Cov(x_i, x_{j-1}) F(t_j - 1)^T for j > i.
      for (Eigen::Index j = i + 1; j < T; ++j) {
        const Matrix Fj = model.transition(time(j) - 1);
        cov_x.block(i * n, j * n, n, n) = cov_x.block(i * n, (j - 1) * n, n, n) * Fj.transpose();
        cov_x.block(j * n, i * n, n, n) = cov_x.block(i * n, j * n, n, n).transpose();
      }
    }
  }

  std::vector<Matrix> H(static_cast<std::size_t>(T));
  for (Eigen::Index i = 0; i < T; ++i) H[static_cast<std::size_t>(i)] = model.observation(time(i));

  Matrix cov_z(T * m, T * m);
  Vector dev(T * m);
  for (Eigen::Index i = 0; i < T; ++i) {
    const auto& Hi = H[static_cast<std::size_t>(i)];
    dev.segment(i * m, m) = measurements.row(i) - Hi * mu[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < T; ++j) {
      cov_z.block(i * m, j * m, m, m) =
          Hi * cov_x.block(i * n, j * n, n, n) * H[static_cast<std::size_t>(j)].transpose();
      const double k = kernel(time(i), time(j));
      for (Eigen::Index a = 0; a < m; ++a) cov_z(i * m + a, j * m + a) += k;
    }
  }
  const auto factor = psd_factor(symmetrized(cov_z));
  const auto lower = factor.lower().triangularView<Eigen::Lower>();
  // Forward substitution is prefix-closed, so one solve serves every t.
  const Vector whitened = lower.solve(dev);

  std::vector<Posterior> out(static_cast<std::size_t>(T));
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index rows = (t + 1) * m;
    Matrix cross(rows, n);  // Cov(Z_{1..t}, x_t)
    for (Eigen::Index j = 0; j <= t; ++j)
      cross.block(j * m, 0, m, n) = H[static_cast<std::size_t>(j)] * cov_x.block(j * n, t * n, n, n);
    const Matrix g = factor.lower().topLeftCorner(rows, rows).triangularView<Eigen::Lower>().solve(cross);
    Posterior p;
    p.time = time(t);
    p.mean = mu[static_cast<std::size_t>(t)] + g.transpose() * whitened.head(rows);
    p.covariance = symmetrized(cov_x.block(t * n, t * n, n, n) - g.transpose() * g);
    out[static_cast<std::size_t>(t)] = std::move(p);
  }
  return out;
}

}  // namespace gpkf
