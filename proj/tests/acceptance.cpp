// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every criterion has been evaluated, so the suite can
// run under ctest and still report criteria that fail on their merits.
// Pass --strict to exit 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "filter_fixtures.hpp"
#include "gpkf/cli.hpp"
#include "gpkf/errors.hpp"
#include "gpkf/filter.hpp"
#include "gpkf/gp.hpp"
#include "gpkf/io.hpp"
#include "gpkf/numerics.hpp"
#include "gpkf/sim.hpp"
#include "oracles.hpp"

using namespace gpkf;
using fixtures::max_abs;

namespace {

// One-sided 95% critical value of Student's t with 99 degrees of freedom.
constexpr double kT99 = 1.6604;
constexpr std::size_t kModels = 20;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Estimate> steps(const StateSpaceModel& model, const KernelSpec& kernel,
                            std::optional<std::size_t> capacity, const TimeSeries& z, bool fast) {
  FilterState s = FilterState::initial(model, capacity, z.start_time - 1);
  std::vector<Estimate> out;
  for (Eigen::Index i = 0; i < z.length(); ++i) {
    auto r = fast ? gpkf_step_windowed_fast(model, kernel, std::move(s), z.row(i))
                  : gpkf_step(model, kernel, std::move(s), z.row(i));
    s = std::move(r.state);
    out.push_back(std::move(r.estimate));
  }
  return out;
}

Matrix white_v(const KernelSpec& k, Eigen::Index m) { return k.variance() * Matrix::Identity(m, m); }

// Correlated kernel for model `seed`, kept well conditioned for windows up to 16.
KernelSpec correlated_kernel(std::uint64_t seed) {
  static const KernelFamily families[] = {KernelFamily::Exponential, KernelFamily::Matern32,
                                          KernelFamily::Matern52, KernelFamily::RBF};
  const KernelFamily f = families[seed % 4];
  return {f, 1.0, f == KernelFamily::RBF ? 1.5 : 3.0 + static_cast<double>(seed % 3)};
}

Verdict white_reduction() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < kModels; ++seed) {
    const KernelSpec white(KernelFamily::White, 0.5 + 0.05 * static_cast<double>(seed));
    const auto c = fixtures::random_case(seed, white, 100);
    const auto kf = run_kalman_filter(c.model, white_v(white, c.H.rows()), c.measurements);
    for (std::optional<std::size_t> cap : {std::optional<std::size_t>{}, std::optional<std::size_t>{5}}) {
      const auto gp = steps(c.model, white, cap, c.measurements, false);
      for (std::size_t t = 0; t < kf.size(); ++t)
        worst = std::max({worst, max_abs(gp[t].mean - kf[t].mean), max_abs(gp[t].covariance - kf[t].covariance)});
    }
  }
  return {worst <= 1e-10, fmt("max |gp - kf| = %.3g over %zu models, T=100 (tol 1e-10)", worst, kModels)};
}

Verdict fast_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < kModels; ++seed)
    for (const KernelSpec& k : {KernelSpec(KernelFamily::White, 0.7), correlated_kernel(seed)}) {
      const auto c = fixtures::random_case(seed, k, 100);
      for (std::size_t cap : {2u, 5u, 16u}) {
        const auto slow = steps(c.model, k, cap, c.measurements, false);
        const auto fast = steps(c.model, k, cap, c.measurements, true);
        for (std::size_t t = 0; t < slow.size(); ++t)
          worst = std::max({worst, max_abs(fast[t].mean - slow[t].mean),
                            max_abs(fast[t].covariance - slow[t].covariance)});
      }
    }
  return {worst <= 1e-7, fmt("max |fast - direct| = %.3g for N in {2,5,16} (tol 1e-7)", worst)};
}

Verdict oracle_checks() {
  double white_gap = 0.0;
  for (std::uint64_t seed = 0; seed < kModels; ++seed) {
    const KernelSpec white(KernelFamily::White, 0.6);
    const auto c = fixtures::random_case(seed, white, 100);
    const auto kf = run_kalman_filter(c.model, white_v(white, c.H.rows()), c.measurements);
    const auto post = batch_oracle(c.model, white, c.measurements);
    for (std::size_t t = 0; t < kf.size(); ++t)
      white_gap = std::max({white_gap, max_abs(post[t].mean - kf[t].mean),
                            max_abs(post[t].covariance - kf[t].covariance)});
  }

  // Seed-averaged |gp - oracle| per t for the unbounded-window filter. The gap
  // is zero at t=1 by construction, so growth is judged after the start-up:
  // last quarter against the quarter before it.
  constexpr std::size_t T = 50, kSeeds = 200;
  struct Case {
    const char* name;
    Scenario sc;
  };
  const Scenario paper = scenario_paper_v();
  const Case cases[] = {
      {"exponential l=5, W=0.01",
       {StateSpaceModel::constant(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Constant(1, 1, 0.01),
                                  Vector::Zero(1), Matrix::Ones(1, 1)),
        KernelSpec(KernelFamily::Exponential, 1.0, 5.0), T}},
      {"matern32 l=5, W=0", {paper.model, paper.kernel, T}},
  };
  bool stable = true;
  std::string detail = fmt("white oracle vs kf %.3g (tol 1e-8)", white_gap);
  for (const auto& cs : cases) {
    std::vector<double> gap(T, 0.0);
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto sim = simulate(cs.sc.model, cs.sc.kernel, T, seed);
      const auto post = batch_oracle(cs.sc.model, cs.sc.kernel, sim.measurements);
      const auto gp = run_gp_filter(cs.sc.model, cs.sc.kernel, UnboundedWindow{}, sim.measurements, SolvePath::Direct);
      for (std::size_t t = 0; t < T; ++t) gap[t] += max_abs(gp[t].mean - post[t].mean) / kSeeds;
    }
    auto avg = [&](std::size_t a, std::size_t b) {
      return std::accumulate(gap.begin() + a, gap.begin() + b, 0.0) / static_cast<double>(b - a);
    };
    const double q3 = avg(T / 2, 3 * T / 4), q4 = avg(3 * T / 4, T), first = avg(0, T / 2);
    const bool ok = std::isfinite(q4) && q4 <= 1.10 * q3;
    stable = stable && ok;
    detail += fmt("; %s: mean gap first half %.3f, 3rd quarter %.3f, last quarter %.3f (%s)", cs.name, first, q3,
                  q4, ok ? "stable" : "growing");
  }
  return {white_gap <= 1e-8 && stable, detail};
}

struct PairedStats {
  std::vector<double> kf_mse, gp2_mse, gp5_mse, full_mse, kf_steady, gp5_steady;
  double mean(const std::vector<double>& v) const {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
};

const PairedStats& paper_scenario_runs() {
  static const PairedStats stats = [] {
    const Scenario sc = scenario_paper_v();
    const std::vector<Variant> variants{*Variant::parse("kf"), *Variant::parse("gp-2"), *Variant::parse("gp-5"),
                                        *Variant::parse("gp-full")};
    std::vector<std::uint64_t> seeds(100);
    std::iota(seeds.begin(), seeds.end(), 1);
    const auto report = run_compare(sc.model, sc.kernel, sc.horizon, variants, seeds);
    PairedStats s;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      s.kf_mse.push_back(report.at(i, 0).mse);
      s.gp2_mse.push_back(report.at(i, 1).mse);
      s.gp5_mse.push_back(report.at(i, 2).mse);
      s.full_mse.push_back(report.at(i, 3).mse);
      s.kf_steady.push_back(report.at(i, 0).steady_variance);
      s.gp5_steady.push_back(report.at(i, 2).steady_variance);
    }
    return s;
  }();
  return stats;
}

Verdict paper_reproduction() {
  const auto& s = paper_scenario_runs();
  const double kf = s.mean(s.kf_mse), gp2 = s.mean(s.gp2_mse), gp5 = s.mean(s.gp5_mse), full = s.mean(s.full_mse);
  const double t12 = oracle::paired_t(s.kf_mse, s.gp2_mse);
  const bool first = t12 > kT99;
  const bool second = gp2 > gp5;
  const bool close = std::abs(gp5 - full) <= 0.10 * full;
  return {first && second && close,
          fmt("MSE kf %.4f, gp-2 %.4f, gp-5 %.4f, gp-full %.4f; paired t(kf>gp-2) = %.2f (need > %.4f), "
              "gp-2>gp-5 %s, |gp-5 - full|/full = %.3f (need <= 0.10)",
              kf, gp2, gp5, full, t12, kT99, second ? "yes" : "no", std::abs(gp5 - full) / full)};
}

double median_step_seconds(const Scenario& sc, const TimeSeries& z, std::size_t window, bool fast) {
  FilterState s = FilterState::initial(sc.model, window, z.start_time - 1);
  std::vector<double> times;
  for (Eigen::Index i = 0; i < z.length(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    auto r = fast ? gpkf_step_windowed_fast(sc.model, sc.kernel, std::move(s), z.row(i))
                  : gpkf_step(sc.model, sc.kernel, std::move(s), z.row(i));
    const auto stop = std::chrono::steady_clock::now();
    s = std::move(r.state);
    if (static_cast<std::size_t>(i) + 1 >= window) times.push_back(std::chrono::duration<double>(stop - start).count());
  }
  std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
  return times[times.size() / 2];
}

Verdict complexity() {
  const Scenario sc = scenario_paper_v();
  const auto sim = simulate(sc.model, sc.kernel, 2000, 5);
  double fast32 = 0, fast64 = 0, slow32 = 0, slow64 = 0;
  // Best of five repetitions damps scheduler noise.
  for (int rep = 0; rep < 5; ++rep) {
    auto keep = [&](double& slot, double v) { slot = rep == 0 ? v : std::min(slot, v); };
    keep(fast32, median_step_seconds(sc, sim.measurements, 32, true));
    keep(fast64, median_step_seconds(sc, sim.measurements, 64, true));
    keep(slow32, median_step_seconds(sc, sim.measurements, 32, false));
    keep(slow64, median_step_seconds(sc, sim.measurements, 64, false));
  }
  const double fast_ratio = fast64 / fast32, slow_ratio = slow64 / slow32;
  return {fast_ratio <= 2.5 && slow_ratio >= 5.0,
          fmt("median step: sliding %.2f -> %.2f us (x%.2f, need <= 2.5); direct %.2f -> %.2f us (x%.2f, need >= 5)",
              fast32 * 1e6, fast64 * 1e6, fast_ratio, slow32 * 1e6, slow64 * 1e6, slow_ratio)};
}

Verdict ml2_recovery() {
  int hits = 0;
  std::string fits;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = sample_gp({KernelFamily::Exponential, 1.0, 20.0}, 500, 3, seed);
    const auto fit = fit_ml2(KernelFamily::Exponential, r);
    const double v = fit.spec.variance(), l = fit.spec.lengthscale();
    hits += v >= 0.5 && v <= 2.0 && l >= 10.0 && l <= 40.0;
    fits += fmt("%s(%.2f,%.1f)", seed ? " " : "", v, l);
  }
  return {hits >= 8, fmt("%d/10 seeds inside var [0.5,2], l [10,40] (need >= 8); fits %s; "
                         "real-data check ships as Fit.RgbdslamResidualsIfProvided (skipped without data)",
                         hits, fits.c_str())};
}

Verdict acf_diagnostics() {
  const auto iid = sample_gp({KernelFamily::White, 1.0}, 10000, 1, 99);
  const Vector x = iid.values.col(0);
  const auto a = acf(std::span<const double>(x.data(), x.size()), 40);
  int inside = 0;
  for (std::size_t h = 1; h <= 40; ++h) inside += std::abs(a.coefficients[h]) <= a.confidence_band;
  const auto corr = sample_gp({KernelFamily::Exponential, 1.0, 50.0}, 10000, 1, 2024);
  const Vector y = corr.values.col(0);
  const double lag1 = acf(std::span<const double>(y.data(), y.size()), 1).coefficients[1];
  const double want = std::exp(-1.0 / 50.0);
  const bool ok = inside >= 38 && std::abs(lag1 - want) <= 0.02;
  return {ok, fmt("iid: %d/40 lags inside +-%.4f (need >= 38); exponential l=50 lag-1 %.4f vs %.4f (tol 0.02)",
                  inside, a.confidence_band, lag1, want)};
}

Verdict conservatism() {
  const auto& s = paper_scenario_runs();
  const double t_var = oracle::paired_t(s.gp5_steady, s.kf_steady);
  const double t_mse = oracle::paired_t(s.kf_mse, s.gp5_mse);
  return {t_var > kT99 && t_mse > kT99,
          fmt("steady variance gp-5 %.5f vs kf %.5f, paired t = %.2f; MSE gp-5 %.4f vs kf %.4f, paired t(kf>gp-5) = "
              "%.2f (both need > %.4f)",
              s.mean(s.gp5_steady), s.mean(s.kf_steady), t_var, s.mean(s.gp5_mse), s.mean(s.kf_mse), t_mse, kT99)};
}

Verdict invariants() {
  std::vector<std::string> broken;
  std::mt19937_64 rng(2718);
  const KernelFamily families[] = {KernelFamily::White, KernelFamily::RBF, KernelFamily::Exponential,
                                   KernelFamily::Matern32, KernelFamily::Matern52};
  // Kernels: symmetric Toeplitz Gram with constant diagonal, PSD after jitter, monotone decay.
  for (auto f : families)
    for (double l : {0.7, 5.0, 40.0}) {
      const KernelSpec k(f, 1.3, l);
      const Matrix g = gram_consecutive(k, 50);
      bool ok = true;
      for (Eigen::Index i = 0; i < 50; ++i)
        for (Eigen::Index j = 0; j < 50; ++j)
          ok = ok && g(i, j) == g(j, i) && g(i, j) == k.at_lag(static_cast<double>(std::abs(i - j))) &&
               (i == 0 || j == 0 || g(i, j) == g(i - 1, j - 1));
      const PsdFactor pf = psd_factor(g);
      const Matrix jit = g + pf.jitter_used() * Matrix::Identity(50, 50);
      ok = ok && Eigen::SelfAdjointEigenSolver<Matrix>(jit).eigenvalues()(0) >= -1e-10 * k.variance();
      // Strict decay is checked until the profile underflows to zero.
      if (f != KernelFamily::White)
        for (int r = 0; r < 60 && k.at_lag(r + 1.0) > 0.0; ++r) ok = ok && k.at_lag(r + 1.0) < k.at_lag(r);
      if (!ok) broken.push_back(std::string("kernel ") + std::string(to_string(f)));
    }
  // Woodbury: inverse times (A + UV) is the identity.
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial, m = 1 + trial % 6;
    const Matrix a = oracle::random_spd(n, rng, 1.0);
    const Matrix u = 0.3 * oracle::random_matrix(n, m, rng), v = 0.3 * oracle::random_matrix(m, n, rng);
    try {
      if (max_abs(smw_inverse(a.inverse(), u, v) * (a + u * v) - Matrix::Identity(n, n)) > 1e-7)
        broken.push_back("smw n=" + std::to_string(n));
    } catch (const NumericalFailure&) {
    }
  }
  // Likelihood: Levinson vs dense Cholesky vs brute-force formula.
  for (std::size_t n = 1; n <= 8; ++n) {
    const KernelSpec k(families[1 + n % 4], 0.8, 1.2);
    const auto r = sample_gp(k, n, 2, n);
    const Matrix g = gram_consecutive(k, n);
    const double brute = oracle::gaussian_logpdf(g, r.values.col(0)) + oracle::gaussian_logpdf(g, r.values.col(1));
    if (std::abs(log_marginal_likelihood(k, r) - brute) > 1e-9 ||
        std::abs(log_marginal_likelihood_dense(k, r) - brute) > 1e-9)
      broken.push_back("likelihood n=" + std::to_string(n));
  }
  // Filter covariance order on correlated data.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const KernelSpec k = correlated_kernel(seed);
    const auto c = fixtures::random_case(seed, k, 40);
    for (const auto& e : steps(c.model, k, 6, c.measurements, false)) {
      const Matrix drop = e.predicted_covariance - e.covariance;
      if (Eigen::SelfAdjointEigenSolver<Matrix>(e.innovation_covariance).eigenvalues()(0) < -1e-9 ||
          Eigen::SelfAdjointEigenSolver<Matrix>(drop).eigenvalues()(0) < -1e-9) {
        broken.push_back("covariance order seed " + std::to_string(seed));
        break;
      }
    }
  }
  // Config and estimate round trips.
  for (int trial = 0; trial < 10; ++trial) {
    RunConfig cfg;
    const Eigen::Index n = 1 + trial % 3, m = 1 + trial % 2;
    cfg.model.n = n;
    cfg.model.m = m;
    cfg.model.F = oracle::random_matrix(n, n, rng);
    cfg.model.H = oracle::random_matrix(m, n, rng);
    cfg.model.W = oracle::random_spd(n, rng);
    cfg.model.x0 = oracle::random_matrix(n, 1, rng);
    cfg.model.P0 = oracle::random_spd(n, rng);
    cfg.kernel = KernelSpec(families[trial % 5], 0.1 * (trial + 1), 1.0 / (trial + 1));
    cfg.window = trial % 2 ? WindowPolicy(CorrelationWindow{1.0 / 3.0}) : WindowPolicy(FixedWindow{4});
    std::stringstream buf;
    write_config(buf, cfg);
    if (!(read_config(buf) == cfg)) broken.push_back("config round trip");

    Estimate e;
    e.time = trial;
    e.mean = oracle::random_matrix(n, 1, rng);
    e.covariance = oracle::random_spd(n, rng) / 3.0;
    e.innovation = oracle::random_matrix(m, 1, rng);
    e.innovation_covariance = oracle::random_spd(m, rng) / 7.0;
    std::stringstream est;
    write_estimates(est, std::span(&e, 1), n, m);
    const auto back = read_estimates(est);
    if (back.rows.size() != 1 || back.rows[0].mean != e.mean || back.rows[0].covariance != e.covariance ||
        back.rows[0].innovation_covariance != e.innovation_covariance)
      broken.push_back("estimate round trip");
  }
  std::string detail = broken.empty() ? "kernel, woodbury, likelihood, covariance-order and round-trip checks hold "
                                        "(full suites run as the unit tests)"
                                      : "broken:";
  for (const auto& b : broken) detail += " " + b;
  return {broken.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {1, "white-noise reduction", white_reduction},
      {2, "fast-path equivalence", fast_equivalence},
      {3, "oracle checks", oracle_checks},
      {4, "comparison scenario orderings", paper_reproduction},
      {5, "per-step cost growth", complexity},
      {6, "ML-II recovery", ml2_recovery},
      {7, "ACF diagnostics", acf_diagnostics},
      {8, "conservatism", conservatism},
      {9, "invariant suites", invariants},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !v.pass;
    std::printf("%s %d %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/9 criteria passed\n", 9 - failed);
  return strict && failed ? 1 : 0;
}
