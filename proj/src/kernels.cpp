#include "gpkf/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace gpkf {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::White: return "white";
    case KernelFamily::RBF: return "rbf";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "unknown";
}

std::optional<KernelFamily> parse_kernel_family(std::string_view name) {
  for (auto f : {KernelFamily::White, KernelFamily::RBF, KernelFamily::Exponential,
                 KernelFamily::Matern32, KernelFamily::Matern52}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

KernelSpec::KernelSpec(KernelFamily family, double variance, double lengthscale)
    : family_(family),
      variance_(variance),
      lengthscale_(family == KernelFamily::White ? 1.0 : lengthscale) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw std::invalid_argument("kernel variance must be positive and finite");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("kernel lengthscale must be positive and finite");
}

double KernelSpec::at_lag(double r) const noexcept {
  const double s = r / lengthscale_;
  switch (family_) {
    case KernelFamily::White:
      return r == 0.0 ? variance_ : 0.0;
    case KernelFamily::RBF:
      return variance_ * std::exp(-0.5 * s * s);
    case KernelFamily::Exponential:
      return variance_ * std::exp(-s);
    case KernelFamily::Matern32: {
      const double a = std::sqrt(3.0) * s;
      return variance_ * (1.0 + a) * std::exp(-a);
    }
    case KernelFamily::Matern52: {
      const double a = std::sqrt(5.0) * s;
      return variance_ * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
  }
  return 0.0;
}

double KernelSpec::operator()(TimeIndex t, TimeIndex t_prime) const noexcept {
  const TimeIndex d = t > t_prime ? t - t_prime : t_prime - t;
  return at_lag(static_cast<double>(d));
}

std::vector<double> autocovariance(const KernelSpec& spec, std::size_t count) {
  std::vector<double> r(count);
  for (std::size_t k = 0; k < count; ++k) r[k] = spec.at_lag(static_cast<double>(k));
  return r;
}

Matrix gram(const KernelSpec& spec, std::span<const TimeIndex> times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Matrix out(n, n);
#pragma omp parallel for schedule(static) if (n >= 128)
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = spec.variance();
    for (Eigen::Index j = 0; j < i; ++j) {
      const double k = spec(times[i], times[j]);
      out(i, j) = k;
      out(j, i) = k;
    }
  }
  return out;
}

Matrix gram_serial(const KernelSpec& spec, std::span<const TimeIndex> times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = spec(times[i], times[j]);
  return out;
}

Matrix gram_consecutive(const KernelSpec& spec, std::size_t count) {
  std::vector<TimeIndex> times(count);
  for (std::size_t i = 0; i < count; ++i) times[i] = static_cast<TimeIndex>(i);
  return gram(spec, times);
}

}  // namespace gpkf
