#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gpkf/types.hpp"

namespace gpkf::detail {

struct NelderMeadResult {
  Vector minimizer;
  double minimum;
  std::size_t iterations;
  bool converged;
};

/// Downhill simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// Converged when the largest vertex distance from the best vertex drops below `tolerance`.
/// The objective may return +inf for infeasible points.
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& objective,
                                    const Vector& start, double step, double tolerance,
                                    std::size_t max_iterations) {
  const Eigen::Index dim = start.size();
  std::vector<Vector> simplex(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> values(simplex.size());
  for (Eigen::Index i = 0; i < dim; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = objective(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  auto sort_vertices = [&] {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> s;
    std::vector<double> v;
    for (auto i : order) {
      s.push_back(simplex[i]);
      v.push_back(values[i]);
    }
    simplex = std::move(s);
    values = std::move(v);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i)
      d = std::max(d, (simplex[i] - simplex[0]).norm());
    return d;
  };

  sort_vertices();
  std::size_t it = 0;
  bool converged = false;
  const std::size_t worst = simplex.size() - 1;
  while (it < max_iterations) {
    if (diameter() < tolerance) {
      converged = true;
      break;
    }
    ++it;
    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(worst);

    const Vector reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = objective(reflected);
    if (f_reflected < values[0]) {
      const Vector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = objective(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
    } else if (f_reflected < values[worst - 1]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < values[worst];
      const Vector contracted = outside ? Vector(centroid + 0.5 * (reflected - centroid))
                                        : Vector(centroid + 0.5 * (simplex[worst] - centroid));
      const double f_contracted = objective(contracted);
      if (f_contracted < (outside ? f_reflected : values[worst])) {
        simplex[worst] = contracted;
        values[worst] = f_contracted;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
          values[i] = objective(simplex[i]);
        }
      }
    }
    sort_vertices();
  }
  return {simplex[0], values[0], it, converged};
}

}  // namespace gpkf::detail
