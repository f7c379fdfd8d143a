#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpkf/filter.hpp"

namespace gpkf {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNumerical = 2, kExitInsufficientData = 3 };

/// Entry point of the `gpkf` tool. "-" paths refer to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// ---- filter comparison ---------------------------------------------------

struct Variant {
  enum class Kind { Kalman, GpFull, GpWindow };
  Kind kind;
  std::size_t window = 0;  ///< for GpWindow

  std::string label() const;
  /// "kf", "gp-full" or "gp-<N>" with N >= 1.
  static std::optional<Variant> parse(std::string_view text);
};

struct VariantRun {
  std::uint64_t seed = 0;
  std::string variant;
  double mse = 0.0;              ///< mean over steps and state components of squared error
  double mean_variance = 0.0;    ///< mean over steps of trace(P_t) / n
  double steady_variance = 0.0;  ///< same, over the second half of the horizon
  double wall_time = 0.0;        ///< median seconds per step, warm-up excluded
  bool failed = false;
  std::string error;
};

struct VariantAggregate {
  std::string variant;
  double mse = 0.0;
  double mean_variance = 0.0;
  double steady_variance = 0.0;
  double wall_time = 0.0;  ///< median over seeds
  std::size_t failures = 0;
};

struct CompareReport {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  std::vector<VariantRun> runs;  ///< seed-major, variants in request order

  const VariantRun& at(std::size_t seed_index, std::size_t variant_index) const {
    return runs[seed_index * variants.size() + variant_index];
  }
  std::vector<VariantAggregate> aggregates() const;
  bool any_failed() const;
};

/// Paired design: each seed is simulated once and every variant filters the same measurements.
/// Seeds run in parallel; rows land in seed order regardless of scheduling.
CompareReport run_compare(const StateSpaceModel& model, const KernelSpec& kernel, std::size_t horizon,
                          std::span<const Variant> variants, std::span<const std::uint64_t> seeds);

/// Columns: seed,variant,mse,mean_variance,steady_variance,wall_time_per_step,status.
/// One row per (seed, variant), then one `all` row per variant.
void write_compare_report(std::ostream& out, const CompareReport& report);

}  // namespace gpkf
