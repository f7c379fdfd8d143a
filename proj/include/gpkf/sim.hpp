#pragma once

#include <cstdint>

#include "gpkf/filter.hpp"
#include "gpkf/gp.hpp"

namespace gpkf {

struct SimulationResult {
  TimeSeries states;        ///< x_0..x_T, start_time 0
  TimeSeries measurements;  ///< z_1..z_T, start_time 1
  ResidualSeries noise;     ///< v_1..v_T, start_time 1
  std::uint64_t seed;
};

/// Random streams drawn from the master seed. Each stream is seeded with
/// seed_seq{seed_lo, seed_hi, stream}, so changing the kernel leaves the
/// state trajectory untouched and vice versa.
enum class SimStream : std::uint32_t { InitialState = 1, ProcessNoise = 2, MeasurementNoise = 3 };

std::uint64_t derive_seed(std::uint64_t seed, SimStream stream);

/// Symmetric square root of a PSD matrix; negative eigenvalues are clamped to zero.
Matrix psd_sqrt(const Matrix& m);

/**
 * Draws x_0 ~ N(x0, P0), propagates x_t = F x_{t-1} + w_t with w_t ~ N(0, W(t)),
 * and observes z_t = H x_t + v_t with v_1..v_T from sample_gp.
 */
SimulationResult simulate(const StateSpaceModel& model, const KernelSpec& kernel,
                          std::size_t horizon, std::uint64_t seed);

struct Scenario {
  StateSpaceModel model;
  KernelSpec kernel;
  std::size_t horizon;
};

/// Constant scalar observed directly: F = H = 1, W = 0, x0 = 0, P0 = 1,
/// Matern32 noise with variance 1 and lengthscale 5, T = 100.
Scenario scenario_paper_v();

}  // namespace gpkf
