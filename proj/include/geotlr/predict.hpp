#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "geotlr/covariance.hpp"
#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/kernels.hpp"
#include "geotlr/stats.hpp"
#include "geotlr/tlr_linalg.hpp"

namespace geotlr {

/// Known measurements, the locations to predict, and the model used to predict them.
struct PredictionProblem {
  LocationSet known;
  MeasurementVector values;
  LocationSet unknown;
  MaternParams theta;
  StorageMode mode = StorageMode::dense();
  std::size_t tile_size = 0;  // 0 selects default_tile_size(mode)
  PointOrdering ordering = PointOrdering::Morton;
};

struct Prediction {
  Eigen::VectorXd mean;
  std::optional<Eigen::VectorXd> variance;  // conditional variance, dense mode only
};

namespace detail {

inline void check_problem(const PredictionProblem& p) {
  check_aligned(p.known, p.values);
  if (!(p.known.metric() == p.unknown.metric())) throw InputError("known and unknown locations use different metrics");
  p.theta.validate();
}

}  // namespace detail

/// Conditional mean Z1 = Sigma12 Sigma22^{-1} Z2 (zero-mean field), optionally
/// with the conditional variance diag(Sigma11 - Sigma12 Sigma22^{-1} Sigma21).
inline Prediction predict_full(const PredictionProblem& problem, bool with_variance = false) {
  detail::check_problem(problem);
  if (with_variance && problem.mode.is_tlr()) throw InputError("conditional variance is only available in dense mode");

  LikelihoodConfig cfg;
  cfg.mode = problem.mode;
  cfg.tile_size = problem.tile_size;
  cfg.ordering = problem.ordering;
  const auto data = detail::ordered(problem.known, problem.values, cfg.ordering);

  const TileGrid grid(data.set.size(), cfg.effective_tile_size());
  CholeskyFactor factor = [&] {
    try {
      return cholesky(assemble_covariance(data.set, problem.theta, grid, cfg.mode, cfg.compression));
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(e.tile(), e.pivot(), detail::describe(problem.theta));
    }
  }();

  // Sigma12 is m x n and assembled dense; the nugget regularizes Sigma22 only.
  const Eigen::MatrixXd sigma12 = cross_covariance(problem.unknown, data.set, problem.theta);

  const Eigen::MatrixXd weights = solve_cholesky(factor, Eigen::MatrixXd(data.z));
  Prediction out;
  out.mean = sigma12 * weights;
  if (with_variance) {
    const Eigen::MatrixXd half = forward_solve(factor, sigma12.transpose());  // L^{-1} Sigma21
    Eigen::VectorXd var(static_cast<Eigen::Index>(problem.unknown.size()));
    const double prior = problem.theta.variance;
    for (Eigen::Index i = 0; i < var.size(); ++i) var(i) = std::max(0.0, prior - half.col(i).squaredNorm());
    out.variance = std::move(var);
  }
  return out;
}

inline Eigen::VectorXd predict(const PredictionProblem& problem) { return predict_full(problem).mean; }

/// Mean square error (1/m) sum (truth_i - pred_i)^2.
inline double mse(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  if (truth.size() != pred.size()) throw InputError("mse: vectors differ in length");
  if (truth.size() == 0) throw InputError("mse: empty vectors");
  return (truth - pred).squaredNorm() / static_cast<double>(truth.size());
}

struct HoldoutScore {
  StorageMode mode;
  double mse = 0.0;
  Eigen::VectorXd prediction;
};

struct HoldoutResult {
  std::vector<std::size_t> held_out;  // indices into the input set, in sampling order
  Eigen::VectorXd truth;
  std::vector<HoldoutScore> scores;
};

/// m distinct indices from [0, n), uniformly without replacement.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m > n) throw InputError("cannot sample more indices than available");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  return idx;
}

/// Hide m random measurements, predict them from the rest under each mode, score by MSE.
inline HoldoutResult holdout_experiment(const LocationSet& set, const MeasurementVector& z, const MaternParams& theta,
                                        std::size_t m, const std::vector<StorageMode>& modes, std::uint64_t seed,
                                        std::size_t tile_size = 0) {
  detail::check_aligned(set, z);
  if (m == 0 || m >= set.size()) throw InputError("holdout size must satisfy 0 < m < n");
  HoldoutResult out;
  out.held_out = sample_without_replacement(set.size(), m, seed);
  std::vector<bool> hidden(set.size(), false);
  for (auto i : out.held_out) hidden[i] = true;
  std::vector<std::size_t> kept;
  kept.reserve(set.size() - m);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!hidden[i]) kept.push_back(i);
  }
  MeasurementVector known_values(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) known_values(static_cast<Eigen::Index>(i)) = z(static_cast<Eigen::Index>(kept[i]));
  out.truth.resize(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) out.truth(static_cast<Eigen::Index>(i)) = z(static_cast<Eigen::Index>(out.held_out[i]));

  const LocationSet known = set.subset(kept);
  const LocationSet unknown = set.subset(out.held_out);
  for (const auto& mode : modes) {
    PredictionProblem problem{known, known_values, unknown, theta, mode, tile_size};
    Eigen::VectorXd pred = predict(problem);
    out.scores.push_back({mode, mse(out.truth, pred), std::move(pred)});
  }
  return out;
}

}  // namespace geotlr
