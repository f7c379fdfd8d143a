#include "gpkf/sim.hpp"

#include <random>
#include <stdexcept>

namespace gpkf {

std::uint64_t derive_seed(std::uint64_t seed, SimStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

SimulationResult simulate(const StateSpaceModel& model, const KernelSpec& kernel,
                          std::size_t horizon, std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  model.validate();
  const Eigen::Index n = model.state_dim;
  const Eigen::Index m = model.meas_dim;
  const auto T = static_cast<Eigen::Index>(horizon);

  SimulationResult out;
  out.seed = seed;
  out.states.start_time = 0;
  out.states.values.resize(T + 1, n);
  out.measurements.start_time = 1;
  out.measurements.values.resize(T, m);

  const Matrix init_normals = standard_normals(1, static_cast<std::size_t>(n),
                                               derive_seed(seed, SimStream::InitialState));
  const Matrix process_normals = standard_normals(horizon, static_cast<std::size_t>(n),
                                                  derive_seed(seed, SimStream::ProcessNoise));
  out.noise = sample_gp(kernel, horizon, static_cast<std::size_t>(m),
                        derive_seed(seed, SimStream::MeasurementNoise));
  out.noise.start_time = 1;

  Vector x = model.x0 + psd_sqrt(model.P0) * init_normals.row(0).transpose();
  out.states.values.row(0) = x.transpose();
  for (Eigen::Index i = 0; i < T; ++i) {
    const TimeIndex t = i + 1;
    x = model.transition(t - 1) * x +
        psd_sqrt(model.process_noise(t)) * process_normals.row(i).transpose();
    out.states.values.row(t) = x.transpose();
    out.measurements.values.row(i) =
        (model.observation(t) * x + out.noise.values.row(i).transpose()).transpose();
  }
  return out;
}

Scenario scenario_paper_v() {
  Matrix one = Matrix::Ones(1, 1);
  return {StateSpaceModel::constant(one, one, Matrix::Zero(1, 1), Vector::Zero(1), one),
          KernelSpec(KernelFamily::Matern32, 1.0, 5.0), 100};
}

}  // namespace gpkf
