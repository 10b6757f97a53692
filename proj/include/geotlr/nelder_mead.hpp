#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace geotlr {

struct NelderMeadOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-9;
  /// Initial simplex edge per coordinate; a vertex that would leave the box steps the other way.
  std::vector<double> initial_step;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Box-constrained Nelder–Mead maximization.
///
/// Standard coefficients (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2); every trial point is clamped to [lower, upper]. Objective
/// values of -inf mark infeasible points. `objective(x, iteration)` is called
/// with the index of the iteration that requested it (0 for the initial simplex).
template <class Objective>
NelderMeadResult nelder_mead_maximize(Objective&& objective, std::vector<double> x0, const std::vector<double>& lower,
                                      const std::vector<double>& upper, const NelderMeadOptions& options) {
  const std::size_t dim = x0.size();
  if (dim == 0 || lower.size() != dim || upper.size() != dim) {
    throw std::invalid_argument("nelder_mead: dimension mismatch");
  }
  for (std::size_t d = 0; d < dim; ++d) {
    if (!(lower[d] < upper[d])) throw std::invalid_argument("nelder_mead: lower bound must be below upper bound");
  }

  auto clamp = [&](std::vector<double>& x) {
    for (std::size_t d = 0; d < dim; ++d) x[d] = std::clamp(x[d], lower[d], upper[d]);
  };
  clamp(x0);

  NelderMeadResult result;
  int iteration = 0;
  // Internally minimize f = -objective.
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = objective(x, iteration);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : -v;
  };

  std::vector<std::vector<double>> simplex(dim + 1, x0);
  for (std::size_t d = 0; d < dim; ++d) {
    double step = d < options.initial_step.size() ? options.initial_step[d] : 0.1 * (upper[d] - lower[d]);
    if (x0[d] + step > upper[d]) step = -step;
    simplex[d + 1][d] = x0[d] + step;
    clamp(simplex[d + 1]);
  }
  std::vector<double> f(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) f[i] = eval(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim);
  auto point_along = [&](double coeff, const std::vector<double>& worst) {
    std::vector<double> p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = centroid[d] + coeff * (worst[d] - centroid[d]);
    clamp(p);
    return p;
  };

  constexpr double kTiny = 1e-10;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[dim - 1];

    const double fb = f[best];
    const double fw = f[worst];
    if (std::isfinite(fb) && std::isfinite(fw) &&
        2.0 * std::abs(fw - fb) <= options.relative_tolerance * (std::abs(fw) + std::abs(fb) + kTiny)) {
      result.converged = true;
      break;
    }
    if (iteration >= options.max_iterations) break;
    ++iteration;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i : order) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[i][d];
    }
    for (auto& c : centroid) c /= static_cast<double>(dim);

    const auto reflected = point_along(-1.0, simplex[worst]);
    const double fr = eval(reflected);
    if (fr < fb) {
      const auto expanded = point_along(-2.0, simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        f[worst] = fe;
      } else {
        simplex[worst] = reflected;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[second_worst]) {
      simplex[worst] = reflected;
      f[worst] = fr;
      continue;
    }
    if (fr < fw) {
      const auto outside = point_along(-0.5, simplex[worst]);
      const double fc = eval(outside);
      if (fc <= fr) {
        simplex[worst] = outside;
        f[worst] = fc;
        continue;
      }
    } else {
      const auto inside = point_along(0.5, simplex[worst]);
      const double fc = eval(inside);
      if (fc < fw) {
        simplex[worst] = inside;
        f[worst] = fc;
        continue;
      }
    }
    // shrink toward the best vertex
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < dim; ++d) simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
      clamp(simplex[i]);
      f[i] = eval(simplex[i]);
    }
  }

  const auto best_it = std::min_element(f.begin(), f.end());
  const auto best_idx = static_cast<std::size_t>(best_it - f.begin());
  result.x = simplex[best_idx];
  result.value = -f[best_idx];
  result.iterations = iteration;
  return result;
}

}  // namespace geotlr
