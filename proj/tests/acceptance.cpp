// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 7        run the listed criteria
//
// Exit status is 0 only if every selected criterion passes.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "geotlr/geotlr.hpp"
#include "oracles.hpp"

using namespace geotlr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Dense reference built without tiles: Eigen LLT on the full covariance.
struct DenseOracle {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;

  DenseOracle(const LocationSet& set, const MaternParams& p) {
    Eigen::MatrixXd sigma = cross_covariance(set, set, p);
    sigma.diagonal().array() += p.nugget;
    llt.compute(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("oracle covariance is not positive definite");
    log_det = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  }
  double loglik(const Eigen::VectorXd& z) const {
    const double n = static_cast<double>(z.size());
    return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * z.dot(llt.solve(z));
  }
};

// ---------------------------------------------------------------------------

Outcome bessel_grid() {
  double worst = 0.0;
  for (double nu : {0.3, 0.5, 1.0, 1.7, 2.5}) {
    for (double x : {0.01, 0.1, 1.0, 5.0, 20.0}) worst = std::max(worst, rel(bessel_k(nu, x), oracle::bessel_k_quadrature(nu, x)));
  }
  return {worst <= 1e-8, fmt("max relative error %.2e over 25 points (tolerance 1e-8)", worst)};
}

Outcome matern_reductions() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> var(0.1, 5.0), lrange(std::log(1e-3), std::log(3.0)), lr(std::log(1e-4), std::log(5.0));
  double worst_exp = 0.0, worst_whittle = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = var(rng), b = std::exp(lrange(rng)), r = std::exp(lr(rng)), x = r / b;
    const double exp_form = v * std::exp(-x);
    const double whittle_form = v * x * std::cyl_bessel_k(1.0, x);
    // Relative error is meaningless once the closed form underflows.
    if (exp_form > 1e-290) worst_exp = std::max(worst_exp, rel(matern(r, {v, b, 0.5, 0}), exp_form));
    if (whittle_form > 1e-290) worst_whittle = std::max(worst_whittle, rel(matern(r, {v, b, 1.0, 0}), whittle_form));
  }
  const double worst = std::max(worst_exp, worst_whittle);
  return {worst <= 1e-9, fmt("1000 draws: exponential %.2e, Whittle %.2e (tolerance 1e-9)", worst_exp, worst_whittle)};
}

// Random tiles of three kinds: Matérn blocks between two point clusters,
// Gaussian matrices, and products of random factors with decaying spectra.
Eigen::MatrixXd random_tile(std::mt19937_64& rng, int kind) {
  std::uniform_int_distribution<int> size(8, 120);
  const Eigen::Index m = size(rng), n = size(rng);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0, 1);
  if (kind == 0) {
    const double gap = 0.05 + u(rng), spread = 0.05 + 0.3 * u(rng);
    const MaternKernel kernel({1.0, 0.01 + 0.3 * u(rng), 0.25 + 2.5 * u(rng), 0});
    Eigen::MatrixXd a(m, n);
    std::vector<Location> left(static_cast<std::size_t>(m)), right(static_cast<std::size_t>(n));
    for (auto& s : left) s = {spread * u(rng), spread * u(rng)};
    for (auto& s : right) s = {gap + spread + spread * u(rng), spread * u(rng)};
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        a(i, j) = kernel(distance(left[static_cast<std::size_t>(i)], right[static_cast<std::size_t>(j)], Metric::euclidean()));
      }
    }
    return a;
  }
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd g(r, c);
    for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = normal(rng);
    return g;
  };
  if (kind == 1) return gaussian(m, n);
  const Eigen::Index k = std::min(m, n);
  Eigen::VectorXd s(k);
  const double decay = 0.1 + 0.8 * u(rng);
  for (Eigen::Index i = 0; i < k; ++i) s(i) = std::pow(decay, static_cast<double>(i));
  return gaussian(m, k) * s.asDiagonal() * gaussian(k, n);
}

Outcome compression_contract() {
  const std::vector<double> grid{1e-5, 1e-7, 1e-9, 1e-12};
  std::mt19937_64 rng(77);
  double worst_ratio = 0.0;
  int monotone_violations = 0, tiles = 0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::MatrixXd a = random_tile(rng, t % 3);
    for (auto method : {CompressionMethod::Svd, CompressionMethod::PivotedQr}) {
      Eigen::Index previous = 0;  // rank at the next coarser eps
      for (double eps : grid) {
        const auto lr = compress_tile(a, eps, method);
        worst_ratio = std::max(worst_ratio, oracle::rel_frobenius(lr.dense(), a) / eps);
        if (lr.rank() < previous) ++monotone_violations;
        previous = lr.rank();
      }
    }
    ++tiles;
  }
  return {worst_ratio <= 1.0 && monotone_violations == 0,
          fmt("%d tiles x 4 eps x 2 methods: max error/eps %.3f, rank monotonicity violations %d", tiles, worst_ratio,
              monotone_violations)};
}

Outcome tlr_vs_dense() {
  const MaternParams theta{1.0, 0.1, 0.5, 0.0};
  double worst_logdet = 0, worst_solve = 0, worst_ll = 0;
  for (std::size_t n : {400u, 1600u, 2500u}) {
    const auto raw = generate_locations(n, 11);
    const auto z_raw = sample_measurements(raw, theta, 12);
    const auto data = detail::ordered(raw, z_raw, PointOrdering::Morton);
    const DenseOracle ref(data.set, theta);

    LikelihoodConfig cfg;
    cfg.mode = StorageMode::tlr(1e-9);
    const TileGrid grid(n, cfg.effective_tile_size());
    const auto factor = cholesky(assemble_covariance(data.set, theta, grid, cfg.mode, cfg.compression));
    const Eigen::VectorXd x = solve_cholesky(factor, Eigen::MatrixXd(data.z)).col(0);
    const Eigen::VectorXd x_ref = ref.llt.solve(data.z);
    const double ll = log_likelihood(raw, z_raw, theta, cfg);

    worst_logdet = std::max(worst_logdet, rel(factor.log_det, ref.log_det));
    worst_solve = std::max(worst_solve, (x - x_ref).norm() / x_ref.norm());
    worst_ll = std::max(worst_ll, rel(ll, ref.loglik(data.z)));
  }
  return {worst_logdet <= 1e-7 && worst_solve <= 1e-7 && worst_ll <= 1e-6,
          fmt("n in {400,1600,2500}, eps 1e-9: log_det %.2e (<=1e-7), solve %.2e (<=1e-7), loglik %.2e (<=1e-6)",
              worst_logdet, worst_solve, worst_ll)};
}

Outcome accuracy_monotonicity() {
  const MaternParams theta{1.0, 0.1, 0.5, 0.0};
  const auto set = generate_locations(1600, 21);
  const auto z = sample_measurements(set, theta, 22);
  const double dense = log_likelihood(set, z, theta, LikelihoodConfig{});
  std::string trail;
  bool monotone = true;
  double previous = INFINITY;
  for (int e = 5; e <= 12; ++e) {
    LikelihoodConfig cfg;
    cfg.mode = StorageMode::tlr(std::pow(10.0, -e));
    const double err = rel(log_likelihood(set, z, theta, cfg), dense);
    monotone = monotone && err <= previous;
    previous = err;
    trail += fmt("%s1e-%d:%.1e", trail.empty() ? "" : " ", e, err);
  }
  return {monotone, "relative loglik error by eps: " + trail};
}

Outcome monte_carlo() {
  const std::size_t n = 1600, reps = 20;
  const std::uint64_t seed = 31;
  bool pass = true;
  std::string detail;

  const MaternParams weak{1.0, 0.03, 0.5, 0.0};
  const auto mc = mc_experiment(n, weak, reps, {StorageMode::dense(), StorageMode::tlr(1e-5)}, seed);
  for (const auto& m : mc.modes) {
    const auto s = m.parameter_summary();
    const double truth[3] = {weak.variance, weak.range, weak.smoothness};
    for (int c = 0; c < 3; ++c) {
      const double ratio = s[c].median / truth[c];
      pass = pass && s[c].count > 0 && ratio >= 0.5 && ratio <= 2.0;
    }
    detail += fmt("%s median (%.3f, %.4f, %.3f) from %zu fits; ", m.mode.label().c_str(), s[0].median, s[1].median,
                  s[2].median, s[0].count);
  }

  const MaternParams strong{1.0, 0.3, 0.5, 0.0};
  const auto mc2 = mc_experiment(n, strong, reps, {StorageMode::tlr(1e-12), StorageMode::tlr(1e-7)}, seed);
  const double fine = mc2.modes[0].parameter_summary()[1].median;
  const double coarse = mc2.modes[1].parameter_summary()[1].median;
  const bool closer = std::abs(fine - strong.range) < std::abs(coarse - strong.range);
  pass = pass && closer;
  detail += fmt("range 0.3: median range tlr:1e-12 %.4f vs tlr:1e-7 %.4f", fine, coarse);
  return {pass, detail};
}

Outcome prediction() {
  const std::size_t n = 1600, m = 100;
  const auto set = generate_locations(n, 41);
  double mses[3];
  double dense_medium = 0, tlr_medium = 0;
  const double ranges[3] = {0.03, 0.1, 0.3};
  for (int k = 0; k < 3; ++k) {
    const MaternParams theta{1.0, ranges[k], 0.5, 0.0};
    const auto z = sample_measurements(set, theta, 42);
    std::vector<StorageMode> modes{StorageMode::dense()};
    if (k == 1) modes.push_back(StorageMode::tlr(1e-9));
    const auto h = holdout_experiment(set, z, theta, m, modes, 43);
    mses[k] = h.scores[0].mse;
    if (k == 1) {
      dense_medium = h.scores[0].mse;
      tlr_medium = h.scores[1].mse;
    }
  }
  const bool ordering = mses[0] > mses[1] && mses[1] > mses[2];
  const double gap = rel(tlr_medium, dense_medium);
  return {ordering && gap <= 0.10,
          fmt("MSE weak %.4f > medium %.4f > strong %.4f; medium tlr:1e-9 %.6f vs dense %.6f (%.2e relative, <=10%%)",
              mses[0], mses[1], mses[2], tlr_medium, dense_medium, gap)};
}

Outcome exact_interpolation() {
  const auto set = generate_locations(900, 51);
  double worst = 0.0;
  for (const MaternParams& theta : {MaternParams{1.0, 0.03, 0.5, 0}, MaternParams{1.0, 0.1, 0.5, 0}, MaternParams{2.0, 0.1, 1.5, 0}}) {
    const auto z = sample_measurements(set, theta, 52);
    const std::vector<std::size_t> probe{0, 17, 450, 899};
    PredictionProblem p{set, z, set.subset(probe), theta};
    const auto pred = predict(p);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      worst = std::max(worst, rel(pred(static_cast<Eigen::Index>(i)), z(static_cast<Eigen::Index>(probe[i]))));
    }
  }
  return {worst <= 1e-10, fmt("max relative error at known locations %.2e (tolerance 1e-10)", worst)};
}

Outcome memory() {
  const std::size_t n = 2500;
  const MaternParams theta{1.0, 0.03, 0.5, 0.0};
  const auto set = detail::ordered(generate_locations(n, 61), Eigen::VectorXd::Zero(n), PointOrdering::Morton).set;
  const StorageMode mode = StorageMode::tlr(1e-5);
  const TileGrid grid(n, default_tile_size(mode));
  const auto sigma = assemble_covariance(set, theta, grid, mode);
  const auto f = footprint(sigma);

  // Independent element count from tile sizes and ranks alone.
  std::size_t actual = 0, sum_sq = 0;
  std::string ranks;
  for (std::size_t i = 0; i < grid.tiles(); ++i) {
    const std::size_t si = grid.tile_size(i);
    actual += si * si;
    sum_sq += si * si;
    ranks += fmt("%s[", i ? " " : "");
    for (std::size_t j = 0; j < i; ++j) {
      const auto k = static_cast<std::size_t>(sigma.tile_rank(i, j));
      actual += k * (si + grid.tile_size(j));
      ranks += fmt("%s%zu", j ? "," : "", k);
    }
    ranks += "]";
  }
  const std::size_t dense_equiv = (n * n + sum_sq) / 2;
  const bool counted = f.bytes_actual == actual * sizeof(double) && f.bytes_dense_equiv == dense_equiv * sizeof(double);
  return {f.compression_ratio > 1.0 && counted,
          fmt("ratio %.2f (%zu of %zu reals, independent count %s); lower-tile ranks %s", f.compression_ratio,
              f.bytes_actual / sizeof(double), f.bytes_dense_equiv / sizeof(double), counted ? "agrees" : "DISAGREES",
              ranks.c_str())};
}

Outcome performance() {
  const std::size_t n = 2500;
  const MaternParams theta{1.0, 0.03, 0.5, 0.0};
  const auto set = generate_locations(n, 71);
  const auto z = sample_measurements(set, theta, 72);
  auto time_of = [&](StorageMode mode) {
    LikelihoodConfig cfg;
    cfg.mode = mode;
    return time_likelihood(set, z, theta, cfg, 3).median_seconds;
  };
  const double t5 = time_of(StorageMode::tlr(1e-5));
  const double t12 = time_of(StorageMode::tlr(1e-12));
  const double td = time_of(StorageMode::dense());
  return {t5 <= t12 && t12 <= td,
          fmt("median of 3 at n=2500: tlr:1e-5 %.3f s, tlr:1e-12 %.3f s, dense %.3f s", t5, t12, td)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "bessel_k vs quadrature oracle", bessel_grid},
      {2, "Matern exponential/Whittle reductions", matern_reductions},
      {3, "compression error bound and rank monotonicity", compression_contract},
      {4, "TLR Cholesky vs dense oracle", tlr_vs_dense},
      {5, "likelihood error monotone in eps", accuracy_monotonicity},
      {6, "Monte Carlo parameter recovery", monte_carlo},
      {7, "prediction MSE ordering", prediction},
      {8, "exact interpolation", exact_interpolation},
      {9, "memory footprint", memory},
      {10, "performance ordering", performance},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  C%-2d %-48s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
