#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "geotlr/compression.hpp"
#include "geotlr/covariance.hpp"
#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/kernels.hpp"
#include "geotlr/nelder_mead.hpp"
#include "geotlr/tilestore.hpp"
#include "geotlr/tlr_linalg.hpp"

namespace geotlr {

/// Measurements aligned index-for-index with a LocationSet.
using MeasurementVector = Eigen::VectorXd;

/// How points are ordered before tiling. Morton ordering groups nearby points
/// into the same tile; the likelihood itself does not depend on the order.
enum class PointOrdering { AsGiven, Morton };

inline std::size_t default_tile_size(const StorageMode& mode) { return mode.is_tlr() ? 400 : 200; }

struct ParameterBounds {
  MaternParams lower{0.01, 0.001, 0.1, 0.0};
  MaternParams upper{5.0, 3.0, 3.0, 0.0};
};

struct LikelihoodConfig {
  StorageMode mode = StorageMode::dense();
  std::size_t tile_size = 0;  // 0 selects default_tile_size(mode)
  double nugget = 0.0;
  ParameterBounds bounds;
  std::optional<MaternParams> theta0;
  int max_iterations = 100;
  double tolerance = 1e-9;
  PointOrdering ordering = PointOrdering::Morton;
  CompressionMethod compression = CompressionMethod::PivotedQr;

  std::size_t effective_tile_size() const { return tile_size > 0 ? tile_size : default_tile_size(mode); }
};

struct LikelihoodBreakdown {
  double value = 0.0;
  double log_det = 0.0;
  double quadratic = 0.0;
  Footprint matrix_footprint;
  std::size_t peak_stored_reals = 0;
};

struct TraceEntry {
  int iteration = 0;
  MaternParams theta;
  double loglik = 0.0;
  double seconds = 0.0;
};

struct EstimationResult {
  MaternParams theta_hat;
  double loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  StorageMode mode;
};

namespace detail {

inline std::string describe(const MaternParams& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "at theta=(%.9g, %.9g, %.9g), nugget=%.3g", p.variance, p.range, p.smoothness,
                p.nugget);
  return buf;
}

inline void check_aligned(const LocationSet& set, const MeasurementVector& z) {
  if (static_cast<std::size_t>(z.size()) != set.size()) {
    throw InputError("measurement vector length " + std::to_string(z.size()) + " does not match " +
                     std::to_string(set.size()) + " locations");
  }
  if (!z.allFinite()) throw InputError("measurement vector has non-finite entries");
}

/// Locations and measurements in the order used for tiling.
struct OrderedData {
  LocationSet set;
  MeasurementVector z;
};

inline OrderedData ordered(const LocationSet& set, const MeasurementVector& z, PointOrdering ordering) {
  if (ordering == PointOrdering::AsGiven) return {set, z};
  const auto order = morton_order(set);
  MeasurementVector zp(z.size());
  for (std::size_t i = 0; i < order.size(); ++i) zp(static_cast<Eigen::Index>(i)) = z(static_cast<Eigen::Index>(order[i]));
  return {set.permuted(order), std::move(zp)};
}

inline LikelihoodBreakdown evaluate_ordered(const LocationSet& set, const MeasurementVector& z, const MaternParams& p,
                                            const LikelihoodConfig& cfg) {
  const TileGrid grid(set.size(), cfg.effective_tile_size());
  LikelihoodBreakdown out;
  try {
    SymmetricTileMatrix sigma = assemble_covariance(set, p, grid, cfg.mode, cfg.compression);
    out.matrix_footprint = footprint(sigma);
    const std::size_t assembled = sigma.stored_reals();
    const CholeskyFactor factor = cholesky(std::move(sigma));
    out.peak_stored_reals = std::max(assembled, factor.lower.stored_reals());
    out.log_det = factor.log_det;
    out.quadratic = quadratic_form(factor, z);
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(e.tile(), e.pivot(), describe(p));
  }
  const double n = static_cast<double>(set.size());
  out.value = -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * out.log_det - 0.5 * out.quadratic;
  return out;
}

}  // namespace detail

/// Gaussian log-likelihood with all its ingredients; one call is one factorization.
inline LikelihoodBreakdown evaluate_likelihood(const LocationSet& set, const MeasurementVector& z,
                                               const MaternParams& p, const LikelihoodConfig& cfg) {
  detail::check_aligned(set, z);
  p.validate();
  const auto data = detail::ordered(set, z, cfg.ordering);
  return detail::evaluate_ordered(data.set, data.z, p, cfg);
}

/// l(theta) = -n/2 log(2 pi) - 1/2 log|Sigma| - 1/2 z^T Sigma^{-1} z
inline double log_likelihood(const LocationSet& set, const MeasurementVector& z, const MaternParams& p,
                             const LikelihoodConfig& cfg) {
  return evaluate_likelihood(set, z, p, cfg).value;
}

/// `count` measurement vectors z = L w from the exact (dense) Cholesky factor of
/// Sigma(p), one per column, with w standard normal from a seeded generator.
inline Eigen::MatrixXd sample_measurement_replicates(const LocationSet& set, const MaternParams& p, std::size_t count,
                                                     std::uint64_t seed) {
  p.validate();
  if (count == 0) throw InputError("need at least one replicate");
  const TileGrid grid(set.size(), default_tile_size(StorageMode::dense()));
  CholeskyFactor factor = [&] {
    try {
      return dense_cholesky(assemble_covariance(set, p, grid, StorageMode::dense()));
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(e.tile(), e.pivot(), detail::describe(p));
    }
  }();
  const Eigen::MatrixXd l = factor.densify();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
  }
  return l.triangularView<Eigen::Lower>() * w;
}

inline MeasurementVector sample_measurements(const LocationSet& set, const MaternParams& p, std::uint64_t seed) {
  return sample_measurement_replicates(set, p, 1, seed).col(0);
}

/// Bounded Nelder–Mead maximization of an arbitrary objective over (variance, range, smoothness).
///
/// The search runs on log-parameters so that the three components are on
/// comparable scales; proposals are clamped to the log-bounds. Objective
/// failures (non-SPD covariance and other numerical errors) score -inf.
inline EstimationResult mle_fit_objective(const std::function<double(const MaternParams&)>& objective,
                                          const LikelihoodConfig& cfg) {
  const auto& lo = cfg.bounds.lower;
  const auto& hi = cfg.bounds.upper;
  const std::vector<double> lower = {std::log(lo.variance), std::log(lo.range), std::log(lo.smoothness)};
  const std::vector<double> upper = {std::log(hi.variance), std::log(hi.range), std::log(hi.smoothness)};
  for (std::size_t d = 0; d < 3; ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d])) {
      throw InputError("parameter bounds must be positive with lower < upper");
    }
  }
  if (hi.smoothness > MaternParams::kMaxSmoothness) throw InputError("smoothness upper bound exceeds 5");

  std::vector<double> x0(3);
  if (cfg.theta0) {
    x0 = {std::log(cfg.theta0->variance), std::log(cfg.theta0->range), std::log(cfg.theta0->smoothness)};
  } else {
    for (std::size_t d = 0; d < 3; ++d) x0[d] = 0.5 * (lower[d] + upper[d]);
  }

  auto to_params = [&](const std::vector<double>& x) {
    MaternParams p;
    p.variance = std::clamp(std::exp(x[0]), lo.variance, hi.variance);
    p.range = std::clamp(std::exp(x[1]), lo.range, hi.range);
    p.smoothness = std::clamp(std::exp(x[2]), lo.smoothness, hi.smoothness);
    p.nugget = cfg.nugget;
    return p;
  };

  EstimationResult result;
  result.mode = cfg.mode;
  std::string last_failure;
  MaternParams last_theta;
  const auto start = std::chrono::steady_clock::now();
  auto wrapped = [&](const std::vector<double>& x, int iteration) {
    const MaternParams p = to_params(x);
    last_theta = p;
    double value = -std::numeric_limits<double>::infinity();
    try {
      value = objective(p);
    } catch (const NumericalError& e) {
      last_failure = e.what();
    }
    if (std::isnan(value)) value = -std::numeric_limits<double>::infinity();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back({iteration, p, value, seconds});
    return value;
  };

  NelderMeadOptions options;
  options.max_iterations = cfg.max_iterations;
  options.relative_tolerance = cfg.tolerance;
  options.initial_step.resize(3);
  for (std::size_t d = 0; d < 3; ++d) options.initial_step[d] = 0.1 * (upper[d] - lower[d]);
  const NelderMeadResult nm = nelder_mead_maximize(wrapped, x0, lower, upper, options);

  if (!std::isfinite(nm.value)) {
    throw NumericalError("every likelihood evaluation failed; last tried " + detail::describe(last_theta) +
                         (last_failure.empty() ? "" : " (" + last_failure + ")"));
  }
  result.theta_hat = to_params(nm.x);
  result.loglik = nm.value;
  result.iterations = nm.iterations;
  result.evaluations = nm.evaluations;
  result.converged = nm.converged;
  return result;
}

/// Maximum likelihood estimate of the Matérn parameters.
inline EstimationResult mle_fit(const LocationSet& set, const MeasurementVector& z, const LikelihoodConfig& cfg) {
  detail::check_aligned(set, z);
  const auto data = detail::ordered(set, z, cfg.ordering);
  return mle_fit_objective(
      [&](const MaternParams& p) { return detail::evaluate_ordered(data.set, data.z, p, cfg).value; }, cfg);
}

/// Five-number summary used for boxplot-style reporting.
struct BoxSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline BoxSummary summarize(const std::vector<double>& values) {
  BoxSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  return s;
}

/// One replicate's outcome: an estimate, or the error text that stopped it.
using ReplicateOutcome = std::variant<EstimationResult, std::string>;

struct ModeReplicates {
  StorageMode mode;
  std::vector<ReplicateOutcome> outcomes;

  std::vector<EstimationResult> successes() const {
    std::vector<EstimationResult> out;
    for (const auto& o : outcomes) {
      if (const auto* r = std::get_if<EstimationResult>(&o)) out.push_back(*r);
    }
    return out;
  }

  /// Summary per parameter component: variance, range, smoothness.
  std::array<BoxSummary, 3> parameter_summary() const {
    std::array<std::vector<double>, 3> cols;
    for (const auto& r : successes()) {
      cols[0].push_back(r.theta_hat.variance);
      cols[1].push_back(r.theta_hat.range);
      cols[2].push_back(r.theta_hat.smoothness);
    }
    return {summarize(cols[0]), summarize(cols[1]), summarize(cols[2])};
  }
};

struct MonteCarloResult {
  LocationSet locations;
  Eigen::MatrixXd measurements;  // n x replicates
  std::vector<ModeReplicates> modes;
};

/// Seed used for the measurement draws of a Monte Carlo run with master seed `seed`.
inline std::uint64_t measurement_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

/// One location set, `replicates` measurement vectors drawn exactly, and an
/// MLE fit of every vector under every mode. Per-replicate failures are
/// recorded, not fatal.
inline MonteCarloResult mc_experiment(std::size_t n, const MaternParams& theta_true, std::size_t replicates,
                                      const std::vector<StorageMode>& modes, std::uint64_t seed,
                                      const LikelihoodConfig& base = {}) {
  LocationSet set = generate_locations(n, seed);
  Eigen::MatrixXd z = sample_measurement_replicates(set, theta_true, replicates, measurement_seed(seed));
  MonteCarloResult out{std::move(set), std::move(z), {}};
  for (const auto& mode : modes) {
    LikelihoodConfig cfg = base;
    cfg.mode = mode;
    ModeReplicates mr{mode, {}};
    for (std::size_t r = 0; r < replicates; ++r) {
      try {
        mr.outcomes.emplace_back(mle_fit(out.locations, out.measurements.col(static_cast<Eigen::Index>(r)), cfg));
      } catch (const std::exception& e) {
        mr.outcomes.emplace_back(std::string(e.what()));
      }
    }
    out.modes.push_back(std::move(mr));
  }
  return out;
}

}  // namespace geotlr
