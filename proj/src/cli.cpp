#include "gpkf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gpkf/errors.hpp"
#include "gpkf/gp.hpp"
#include "gpkf/io.hpp"
#include "gpkf/sim.hpp"

namespace gpkf {

std::string Variant::label() const {
  switch (kind) {
    case Kind::Kalman: return "kf";
    case Kind::GpFull: return "gp-full";
    case Kind::GpWindow: return "gp-" + std::to_string(window);
  }
  return "?";
}

std::optional<Variant> Variant::parse(std::string_view text) {
  if (text == "kf") return Variant{Kind::Kalman};
  if (text == "gp-full") return Variant{Kind::GpFull};
  if (text.starts_with("gp-")) {
    std::size_t n = 0;
    const auto digits = text.substr(3);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
    for (char c : digits) n = n * 10 + static_cast<std::size_t>(c - '0');
    if (n < 1) return std::nullopt;
    return Variant{Kind::GpWindow, n};
  }
  return std::nullopt;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

VariantRun run_variant(const StateSpaceModel& model, const KernelSpec& kernel, const Variant& variant,
                       const SimulationResult& sim) {
  using Clock = std::chrono::steady_clock;
  VariantRun run;
  run.seed = sim.seed;
  run.variant = variant.label();

  const auto& z = sim.measurements;
  const Eigen::Index T = z.length();
  const Eigen::Index n = model.state_dim;
  std::vector<double> step_seconds;
  std::vector<Estimate> estimates;
  estimates.reserve(static_cast<std::size_t>(T));
  std::size_t warmup = 0;

  auto timed = [&](auto&& step) {
    for (Eigen::Index i = 0; i < T; ++i) {
      const auto start = Clock::now();
      estimates.push_back(step(z.row(i)));
      step_seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    }
  };

  if (variant.kind == Variant::Kind::Kalman) {
    const Matrix V = kernel.variance() * Matrix::Identity(model.meas_dim, model.meas_dim);
    FilterState state = FilterState::initial(model, std::nullopt, z.start_time - 1);
    timed([&](const Vector& zi) {
      auto r = kf_step(model, std::move(state), zi, V);
      state = std::move(r.state);
      return std::move(r.estimate);
    });
  } else {
    const bool full = variant.kind == Variant::Kind::GpFull;
    GpFilter filter(model, kernel, full ? WindowPolicy{UnboundedWindow{}} : WindowPolicy{FixedWindow{variant.window}},
                    full ? SolvePath::Direct : SolvePath::Sliding, z.start_time);
    if (!full) warmup = variant.window - 1;
    timed([&](const Vector& zi) { return filter.step(zi); });
  }

  double se = 0.0, var = 0.0, steady = 0.0;
  std::size_t steady_count = 0;
  for (Eigen::Index i = 0; i < T; ++i) {
    const auto& e = estimates[static_cast<std::size_t>(i)];
    const Vector truth = sim.states.values.row(e.time - sim.states.start_time).transpose();
    se += (e.mean - truth).squaredNorm();
    const double v = e.covariance.trace() / static_cast<double>(n);
    var += v;
    if (2 * i >= T) {
      steady += v;
      ++steady_count;
    }
  }
  run.mse = se / static_cast<double>(T * n);
  run.mean_variance = var / static_cast<double>(T);
  run.steady_variance = steady / static_cast<double>(steady_count);
  if (warmup >= step_seconds.size()) warmup = 0;
  run.wall_time = median(std::vector<double>(step_seconds.begin() + static_cast<std::ptrdiff_t>(warmup),
                                             step_seconds.end()));
  return run;
}

}  // namespace

CompareReport run_compare(const StateSpaceModel& model, const KernelSpec& kernel, std::size_t horizon,
                          std::span<const Variant> variants, std::span<const std::uint64_t> seeds) {
  if (variants.empty()) throw std::invalid_argument("compare: no variants requested");
  if (seeds.empty()) throw std::invalid_argument("compare: no seeds requested");
  CompareReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& v : variants) report.variants.push_back(v.label());
  report.runs.resize(seeds.size() * variants.size());

  const auto seed_count = static_cast<std::ptrdiff_t>(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < seed_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    std::optional<SimulationResult> sim;
    std::string sim_error;
    try {
      sim = simulate(model, kernel, horizon, seeds[si]);
    } catch (const std::exception& e) {
      sim_error = e.what();
    }
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      VariantRun& slot = report.runs[si * variants.size() + vi];
      try {
        if (!sim) throw NumericalFailure(sim_error);
        slot = run_variant(model, kernel, variants[vi], *sim);
      } catch (const std::exception& e) {
        slot = VariantRun{};
        slot.seed = seeds[si];
        slot.variant = variants[vi].label();
        slot.failed = true;
        slot.error = e.what();
      }
    }
  }
  return report;
}

std::vector<VariantAggregate> CompareReport::aggregates() const {
  std::vector<VariantAggregate> out;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    VariantAggregate a;
    a.variant = variants[vi];
    std::vector<double> times;
    std::size_t ok = 0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& r = at(si, vi);
      if (r.failed) {
        ++a.failures;
        continue;
      }
      ++ok;
      a.mse += r.mse;
      a.mean_variance += r.mean_variance;
      a.steady_variance += r.steady_variance;
      times.push_back(r.wall_time);
    }
    if (ok > 0) {
      a.mse /= static_cast<double>(ok);
      a.mean_variance /= static_cast<double>(ok);
      a.steady_variance /= static_cast<double>(ok);
    }
    a.wall_time = median(std::move(times));
    out.push_back(std::move(a));
  }
  return out;
}

bool CompareReport::any_failed() const {
  return std::any_of(runs.begin(), runs.end(), [](const VariantRun& r) { return r.failed; });
}

void write_compare_report(std::ostream& out, const CompareReport& report) {
  out << "seed,variant,mse,mean_variance,steady_variance,wall_time_per_step,status\n";
  for (const auto& r : report.runs) {
    out << r.seed << ',' << r.variant << ',';
    if (r.failed) {
      out << "nan,nan,nan,nan,failed\n";
      continue;
    }
    out << format_double(r.mse) << ',' << format_double(r.mean_variance) << ','
        << format_double(r.steady_variance) << ',' << format_double(r.wall_time) << ",ok\n";
  }
  for (const auto& a : report.aggregates()) {
    out << "all," << a.variant << ',' << format_double(a.mse) << ',' << format_double(a.mean_variance)
        << ',' << format_double(a.steady_variance) << ',' << format_double(a.wall_time) << ','
        << (a.failures == 0 ? "ok" : "failed") << '\n';
  }
}

// ---- command line --------------------------------------------------------

namespace {

class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      stream_ = &fallback;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open '" + path + "' for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  bool is_stdout() const { return stream_ != &file_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::string effective_window(const GpFilter& filter, const WindowPolicy& policy) {
  if (filter.window_capacity()) return std::to_string(*filter.window_capacity());
  return std::holds_alternative<CovarianceWindow>(policy) ? "unfrozen" : "unbounded";
}

int cmd_simulate(const std::string& config_path, const std::string& prefix, std::ostream& out) {
  const RunConfig cfg = read_config(config_path);
  const auto sim = simulate(cfg.model.to_model(), cfg.kernel, cfg.horizon, cfg.seed);
  write_timeseries(prefix + "_states.csv", sim.states, "x");
  write_timeseries(prefix + "_measurements.csv", sim.measurements, "z");
  write_timeseries(prefix + "_noise.csv", sim.noise, "v");
  out << "steps=" << cfg.horizon << " seed=" << cfg.seed << " prefix=" << prefix << '\n';
  return kExitOk;
}

int cmd_fit(const std::string& input, const std::string& family_name, std::size_t restarts, bool demean,
            const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto family = parse_kernel_family(family_name);
  if (!family) {
    err << "error: unknown kernel family '" << family_name << "'\n";
    return kExitInput;
  }
  ResidualSeries residuals = read_timeseries(input);
  if (demean && residuals.length() > 0)
    residuals.values.rowwise() -= residuals.values.colwise().mean();
  FitOptions options;
  options.restarts = restarts;
  const FitResult fit = fit_ml2(*family, residuals, options);

  OutputTarget target(out_path, out);
  write_kernel_config(target.get(), {fit.spec, FitInfo{fit.log_likelihood, fit.iterations, fit.converged}});
  std::ostream& summary = target.is_stdout() ? err : out;
  summary << to_string(fit.spec.family()) << ',' << format_double(fit.spec.variance()) << ','
          << format_double(fit.spec.lengthscale()) << ',' << format_double(fit.log_likelihood) << ','
          << (fit.converged ? "true" : "false") << '\n';
  return kExitOk;
}

int cmd_acf(const std::string& input, const std::string& column, std::size_t max_lag, std::ostream& out,
            std::ostream& err) {
  const TimeSeries series = read_timeseries(input);
  Eigen::Index index = -1;
  for (std::size_t i = 0; i < series.columns.size(); ++i)
    if (series.columns[i] == column) index = static_cast<Eigen::Index>(i);
  if (index < 0 && !column.empty() && column.find_first_not_of("0123456789") == std::string::npos) {
    const auto k = std::stoll(column);
    if (k >= 1 && k <= series.dim()) index = static_cast<Eigen::Index>(k - 1);
  }
  if (index < 0) {
    err << "error: no column '" << column << "' in " << input << '\n';
    return kExitInput;
  }
  if (static_cast<std::size_t>(series.length()) <= max_lag) {
    err << "error: series length " << series.length() << " must exceed max-lag " << max_lag << '\n';
    return kExitInput;
  }
  const Vector values = series.values.col(index);
  const auto r = acf(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), max_lag);
  out << "# band=±" << format_double(r.confidence_band) << '\n';
  out << "lag,coefficient\n";
  for (std::size_t h = 0; h < r.lags.size(); ++h) out << r.lags[h] << ',' << format_double(r.coefficients[h]) << '\n';
  return kExitOk;
}

int cmd_filter(const std::string& config_path, const std::string& measurements_path,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = read_config(config_path);
  const TimeSeries z = read_timeseries(measurements_path);
  if (z.dim() != cfg.model.m) {
    err << "error: measurement file has " << z.dim() << " columns, config says m=" << cfg.model.m << '\n';
    return kExitInput;
  }
  GpFilter filter(cfg.model.to_model(), cfg.kernel, cfg.window, SolvePath::Sliding, z.start_time);
  OutputTarget target(out_path, out);
  std::ostream& csv = target.get();
  std::ostream& summary = target.is_stdout() ? err : out;
  write_estimates_header(csv, cfg.model.n, cfg.model.m);
  Eigen::Index steps = 0;
  double trace = cfg.model.P0.trace();
  int code = kExitOk;
  try {
    for (Eigen::Index i = 0; i < z.length(); ++i) {
      const Estimate e = filter.step(z.row(i));
      write_estimate_row(csv, e);
      trace = e.covariance.trace();
      ++steps;
    }
  } catch (const NumericalFailure& e) {
    err << "error: numerical failure at t=" << z.time_at(steps) << ": " << e.what() << '\n';
    code = kExitNumerical;
  }
  csv.flush();
  summary << "steps=" << steps << " final_trace_P=" << format_double(trace)
          << " window_policy=" << policy_name(cfg.window) << " effective_N=" << effective_window(filter, cfg.window);
  if (filter.frozen_at()) summary << " frozen_at=" << *filter.frozen_at();
  summary << '\n';
  return code;
}

int cmd_compare(const std::string& config_path, const std::string& variant_list, std::size_t seed_count,
                const std::string& out_path, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = read_config(config_path);
  std::vector<Variant> variants;
  std::stringstream ss(variant_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = Variant::parse(item);
    if (!v) {
      err << "error: unknown variant '" << item << "' (expected kf, gp-full or gp-<N>)\n";
      return kExitInput;
    }
    variants.push_back(*v);
  }
  if (variants.empty() || seed_count < 1) {
    err << "error: need at least one variant and one seed\n";
    return kExitInput;
  }
  std::vector<std::uint64_t> seeds(seed_count);
  for (std::size_t i = 0; i < seed_count; ++i) seeds[i] = cfg.seed + i;
  const auto report = run_compare(cfg.model.to_model(), cfg.kernel, cfg.horizon, variants, seeds);
  OutputTarget target(out_path, out);
  write_compare_report(target.get(), report);
  if (report.any_failed()) {
    for (const auto& r : report.runs)
      if (r.failed) err << "error: seed " << r.seed << " variant " << r.variant << ": " << r.error << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kalman filtering with Gaussian-process measurement noise", "gpkf"};
  app.require_subcommand(1);

  std::string config, prefix, input, family = "exponential", out_path = "-", column = "1",
                                  measurements, variants = "kf,gp-2,gp-5,gp-full";
  std::size_t restarts = 5, max_lag = 40, seeds = 100;
  bool demean = false;

  auto* sim = app.add_subcommand("simulate", "Simulate states, GP noise and measurements from a run config");
  sim->add_option("--config", config, "Run config file")->required();
  sim->add_option("--out-prefix", prefix, "Writes <prefix>_states.csv, _measurements.csv, _noise.csv")->required();

  auto* fit = app.add_subcommand("fit", "ML-II fit of kernel hyperparameters to residuals");
  fit->add_option("--input", input, "Residual CSV (t,v1..vm)")->required();
  fit->add_option("--family", family, "white|rbf|exponential|matern32|matern52")->capture_default_str();
  fit->add_option("--restarts", restarts, "Nelder-Mead restarts")->capture_default_str()->check(CLI::PositiveNumber);
  fit->add_flag("--demean", demean, "Subtract each axis mean before fitting");
  fit->add_option("--out", out_path, "Kernel config output ('-' for stdout)")->capture_default_str();

  auto* acf_cmd = app.add_subcommand("acf", "Sample autocorrelation of one column");
  acf_cmd->add_option("--input", input, "Time-series CSV")->required();
  acf_cmd->add_option("--column", column, "Column name or 1-based value-column index")->capture_default_str();
  acf_cmd->add_option("--max-lag", max_lag, "Largest lag")->capture_default_str()->check(CLI::PositiveNumber);

  auto* filt = app.add_subcommand("filter", "Run the GP-noise filter over a measurement file");
  filt->add_option("--config", config, "Run config file")->required();
  filt->add_option("--measurements", measurements, "Measurement CSV (t,z1..zm)")->required();
  filt->add_option("--out", out_path, "Estimates CSV ('-' for stdout)")->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "Paired Monte Carlo comparison of filter variants");
  cmp->add_option("--config", config, "Run config file (model, kernel, horizon, base seed)")->required();
  cmp->add_option("--variants", variants, "Comma list of kf, gp-full, gp-<N>")->capture_default_str();
  cmp->add_option("--seeds", seeds, "Number of seeds, starting at the config seed")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmp->add_option("--out", out_path, "Report CSV ('-' for stdout)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sim) return cmd_simulate(config, prefix, out);
    if (*fit) return cmd_fit(input, family, restarts, demean, out_path, out, err);
    if (*acf_cmd) return cmd_acf(input, column, max_lag, out, err);
    if (*filt) return cmd_filter(config, measurements, out_path, out, err);
    if (*cmp) return cmd_compare(config, variants, seeds, out_path, out, err);
  } catch (const InsufficientData& e) {
    err << "error: " << e.what() << '\n';
    return kExitInsufficientData;
  } catch (const DegenerateSeries& e) {
    err << "error: " << e.what() << '\n';
    return kExitInsufficientData;
  } catch (const NumericalFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace gpkf
