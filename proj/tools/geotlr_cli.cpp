// geotlr: synthetic data generation, Matérn MLE, kriging and benchmarks from the shell.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "geotlr/geotlr.hpp"

namespace {

using namespace geotlr;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

Metric make_metric(const std::string& name, double radius) {
  if (name == "euclidean") return Metric::euclidean();
  if (name == "gcd") {
    if (!(radius > 0.0)) throw InputError("--radius must be > 0");
    return Metric::great_circle(radius);
  }
  throw InputError("--metric must be euclidean or gcd");
}

StorageMode make_mode(const std::string& mode, std::optional<double> accuracy) {
  if (mode == "dense") return StorageMode::dense();
  if (mode == "tlr") {
    if (!accuracy) throw InputError("--mode tlr requires --accuracy");
    return StorageMode::tlr(*accuracy);
  }
  return parse_mode(mode, accuracy);
}

ParameterBounds parse_bounds(const std::string& text) {
  const auto parts = csv::split(text);
  if (parts.size() != 3) throw InputError("--bounds expects L1:U1,L2:U2,L3:U3");
  double lo[3], hi[3];
  for (int d = 0; d < 3; ++d) {
    const auto colon = parts[static_cast<std::size_t>(d)].find(':');
    if (colon == std::string_view::npos) throw InputError("--bounds expects L1:U1,L2:U2,L3:U3");
    const auto l = csv::parse_double(parts[static_cast<std::size_t>(d)].substr(0, colon));
    const auto u = csv::parse_double(parts[static_cast<std::size_t>(d)].substr(colon + 1));
    if (!l || !u || !(*l > 0.0) || !(*l < *u)) throw InputError("--bounds: need 0 < L < U for every parameter");
    lo[d] = *l;
    hi[d] = *u;
  }
  ParameterBounds b;
  b.lower = {lo[0], lo[1], lo[2], 0.0};
  b.upper = {hi[0], hi[1], hi[2], 0.0};
  return b;
}

std::vector<StorageMode> parse_modes(const std::string& text) {
  std::vector<StorageMode> modes;
  for (auto m : csv::split(text)) {
    if (!m.empty()) modes.push_back(parse_mode(m));
  }
  if (modes.empty()) throw InputError("--modes is empty");
  return modes;
}

std::string theta_text(const MaternParams& p) {
  return csv::format(p.variance) + ":" + csv::format(p.range) + ":" + csv::format(p.smoothness);
}

struct GenerateArgs {
  std::size_t n = 0;
  std::string theta;
  double nugget = 0.0;
  std::uint64_t seed = 0;
  std::string out_locations, out_values;
};

int run_generate(const GenerateArgs& a) {
  MaternParams p = parse_theta(a.theta);
  p.nugget = a.nugget;
  p.validate();
  const LocationSet set = generate_locations(a.n, a.seed);
  const MeasurementVector z = sample_measurements(set, p, measurement_seed(a.seed));
  write_locations(a.out_locations, set);
  write_values(a.out_values, z);
  std::printf("generated %zu locations\n", set.size());
  return 0;
}

struct CommonModelArgs {
  std::string locations, values;
  std::string mode = "dense";
  std::optional<double> accuracy;
  std::size_t tile_size = 0;
  std::string metric = "euclidean";
  double radius = 6371.0;
  double nugget = 0.0;
};

struct EstimateArgs : CommonModelArgs {
  std::optional<std::string> bounds, theta0;
  int max_iters = 100;
  std::string out_trace;
};

int run_estimate(const EstimateArgs& a) {
  const LocationSet set = read_locations(a.locations, make_metric(a.metric, a.radius));
  const MeasurementVector z = read_values(a.values);
  LikelihoodConfig cfg;
  cfg.mode = make_mode(a.mode, a.accuracy);
  cfg.tile_size = a.tile_size;
  cfg.nugget = a.nugget;
  cfg.max_iterations = a.max_iters;
  if (a.bounds) cfg.bounds = parse_bounds(*a.bounds);
  if (a.theta0) cfg.theta0 = parse_theta(*a.theta0);
  const EstimationResult r = mle_fit(set, z, cfg);
  write_trace_csv(a.out_trace, r);
  std::printf("theta_hat=%s loglik=%.17g iterations=%d evaluations=%d converged=%s\n", theta_text(r.theta_hat).c_str(),
              r.loglik, r.iterations, r.evaluations, r.converged ? "yes" : "no");
  return 0;
}

struct PredictArgs : CommonModelArgs {
  std::string theta, theta_from, unknown, out;
  std::optional<std::string> truth;
};

int run_predict(const PredictArgs& a) {
  const Metric metric = make_metric(a.metric, a.radius);
  const LocationSet known = read_locations(a.locations, metric);
  const MeasurementVector z = read_values(a.values);
  const LocationSet unknown = read_locations(a.unknown, metric);
  if (a.theta.empty() == a.theta_from.empty()) throw InputError("predict needs exactly one of --theta, --theta-from");
  MaternParams theta = a.theta.empty() ? best_trace_theta(a.theta_from) : parse_theta(a.theta);
  theta.validate();
  theta.nugget = a.nugget;
  PredictionProblem problem{known, z, unknown, theta, make_mode(a.mode, a.accuracy), a.tile_size};
  const Eigen::VectorXd pred = predict(problem);
  std::optional<Eigen::VectorXd> truth;
  if (a.truth) truth = read_values(*a.truth);
  write_prediction_csv(a.out, unknown, pred, truth);
  if (truth) std::printf("mse=%.17g\n", mse(*truth, pred));
  std::printf("predicted %zu values\n", unknown.size());
  return 0;
}

int run_mse(const std::string& truth_path, const std::string& pred_path) {
  const Eigen::VectorXd truth = read_column(truth_path, {"truth", "value"});
  const Eigen::VectorXd pred = read_column(pred_path, {"predicted", "value"});
  std::printf("%.17g\n", mse(truth, pred));
  return 0;
}

struct McArgs {
  std::size_t n = 0;
  std::string theta;
  std::size_t replicates = 0;
  std::string modes = "dense";
  std::uint64_t seed = 0;
  std::size_t tile_size = 0;
  int max_iters = 100;
  std::string out;
};

int run_mc(const McArgs& a) {
  const MaternParams theta = parse_theta(a.theta);
  LikelihoodConfig base;
  base.tile_size = a.tile_size;
  base.max_iterations = a.max_iters;
  const MonteCarloResult r = mc_experiment(a.n, theta, a.replicates, parse_modes(a.modes), a.seed, base);
  auto out = csv::open_out(a.out);
  out << "mode,replicate,theta1,theta2,theta3,loglik,iterations,converged,error\n";
  for (const auto& m : r.modes) {
    for (std::size_t i = 0; i < m.outcomes.size(); ++i) {
      out << m.mode.label() << ',' << i << ',';
      if (const auto* e = std::get_if<EstimationResult>(&m.outcomes[i])) {
        out << csv::format(e->theta_hat.variance) << ',' << csv::format(e->theta_hat.range) << ','
            << csv::format(e->theta_hat.smoothness) << ',' << csv::format(e->loglik) << ',' << e->iterations << ','
            << (e->converged ? 1 : 0) << ",\n";
      } else {
        std::string msg = std::get<std::string>(m.outcomes[i]);
        std::replace(msg.begin(), msg.end(), ',', ';');
        out << ",,,,,," << msg << '\n';
      }
    }
    const auto s = m.parameter_summary();
    std::printf("%s: %zu/%zu fits, median theta_hat=%s\n", m.mode.label().c_str(), m.successes().size(),
                m.outcomes.size(),
                theta_text({s[0].median, s[1].median, s[2].median, 0.0}).c_str());
  }
  return 0;
}

int run_benchmark_cmd(const std::string& config, const std::string& out) {
  const ExperimentReport report = run_benchmark(load_benchmark_config(config));
  write_report(out, report);
  write_report(std::cout, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matérn Gaussian-process modelling with tile low-rank covariance"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "synthetic locations and measurements");
  generate->add_option("--n", gen.n, "number of locations")->required()->check(CLI::PositiveNumber);
  generate->add_option("--theta", gen.theta, "variance:range:smoothness")->required();
  generate->add_option("--nugget", gen.nugget, "diagonal nugget")->check(CLI::NonNegativeNumber);
  generate->add_option("--seed", gen.seed)->required();
  generate->add_option("--out-locations", gen.out_locations)->required();
  generate->add_option("--out-values", gen.out_values)->required();

  auto add_common = [](CLI::App* cmd, CommonModelArgs& a) {
    cmd->add_option("--locations", a.locations, "locations CSV")->required();
    cmd->add_option("--values", a.values, "values CSV")->required();
    cmd->add_option("--mode", a.mode, "dense or tlr")->required();
    cmd->add_option("--accuracy", a.accuracy, "TLR accuracy threshold");
    cmd->add_option("--tile-size", a.tile_size, "tile size (0 = default)");
    cmd->add_option("--metric", a.metric, "euclidean or gcd");
    cmd->add_option("--radius", a.radius, "sphere radius for gcd");
    cmd->add_option("--nugget", a.nugget, "diagonal nugget")->check(CLI::NonNegativeNumber);
  };

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "maximum likelihood fit of the Matérn parameters");
  add_common(estimate, est);
  estimate->add_option("--bounds", est.bounds, "L1:U1,L2:U2,L3:U3");
  estimate->add_option("--theta0", est.theta0, "starting point T1:T2:T3");
  estimate->add_option("--max-iters", est.max_iters)->check(CLI::NonNegativeNumber);
  estimate->add_option("--out-trace", est.out_trace)->required();

  PredictArgs pre;
  auto* predict_cmd = app.add_subcommand("predict", "kriging prediction at new locations");
  add_common(predict_cmd, pre);
  auto* theta_opt = predict_cmd->add_option("--theta", pre.theta, "variance:range:smoothness");
  auto* trace_opt = predict_cmd->add_option("--theta-from", pre.theta_from, "use the best row of an estimate trace");
  theta_opt->excludes(trace_opt);
  predict_cmd->add_option("--unknown", pre.unknown, "locations to predict")->required();
  predict_cmd->add_option("--truth", pre.truth, "values CSV aligned with --unknown");
  predict_cmd->add_option("--out", pre.out)->required();

  std::string truth_path, pred_path;
  auto* mse_cmd = app.add_subcommand("mse", "mean squared prediction error");
  mse_cmd->add_option("--truth", truth_path)->required();
  mse_cmd->add_option("--pred", pred_path)->required();

  McArgs mc;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo parameter recovery");
  mc_cmd->add_option("--n", mc.n)->required()->check(CLI::PositiveNumber);
  mc_cmd->add_option("--theta", mc.theta)->required();
  mc_cmd->add_option("--replicates", mc.replicates)->required()->check(CLI::PositiveNumber);
  mc_cmd->add_option("--modes", mc.modes, "e.g. dense,tlr:1e-5,tlr:1e-9");
  mc_cmd->add_option("--seed", mc.seed)->required();
  mc_cmd->add_option("--tile-size", mc.tile_size);
  mc_cmd->add_option("--max-iters", mc.max_iters)->check(CLI::NonNegativeNumber);
  mc_cmd->add_option("--out", mc.out)->required();

  std::string bench_config, bench_out;
  auto* bench = app.add_subcommand("benchmark", "time one likelihood iteration over a grid of settings");
  bench->add_option("--config", bench_config, "key = value file")->required();
  bench->add_option("--out", bench_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*estimate) return run_estimate(est);
    if (*predict_cmd) return run_predict(pre);
    if (*mse_cmd) return run_mse(truth_path, pred_path);
    if (*mc_cmd) return run_mc(mc);
    if (*bench) return run_benchmark_cmd(bench_config, bench_out);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitInput;
}
