#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/io.hpp"
#include "geotlr/kernels.hpp"
#include "geotlr/stats.hpp"
#include "geotlr/tilestore.hpp"

namespace geotlr {

/// "dense", "tlr:EPS" (or "tlr" with `default_eps`).
inline StorageMode parse_mode(std::string_view text, std::optional<double> default_eps = std::nullopt) {
  text = csv::trim(text);
  if (text == "dense") return StorageMode::dense();
  if (text == "tlr") {
    if (!default_eps) throw InputError("mode `tlr` needs an accuracy");
    return StorageMode::tlr(*default_eps);
  }
  if (text.starts_with("tlr:")) {
    const auto eps = csv::parse_double(text.substr(4));
    if (!eps) throw InputError("bad accuracy in mode `" + std::string(text) + "`");
    return StorageMode::tlr(*eps);
  }
  throw InputError("unknown mode `" + std::string(text) + "` (expected dense or tlr:EPS)");
}

/// "T1:T2:T3"
inline MaternParams parse_theta(std::string_view text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    const auto piece = text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
    const auto value = csv::parse_double(piece);
    if (!value) throw InputError("bad parameter triple `" + std::string(text) + "`");
    v.push_back(*value);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (v.size() != 3) throw InputError("expected T1:T2:T3, got `" + std::string(text) + "`");
  MaternParams p{v[0], v[1], v[2], 0.0};
  p.validate();
  return p;
}

/// Benchmark grid, read from `key = value` lines; lists are comma separated, `#` starts a comment.
struct BenchmarkConfig {
  std::vector<std::size_t> n{400};
  std::vector<std::string> modes{"dense"};
  std::vector<double> eps{1e-5};
  std::vector<std::size_t> nb{0};  // 0 selects the per-mode default
  MaternParams theta{1.0, 0.1, 0.5, 0.0};
  double nugget = 0.0;
  std::uint64_t seed = 1;
  int repetitions = 3;
};

namespace detail {

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto f : csv::split(s)) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

template <class T>
T parse_integer(std::string_view s, const std::string& key) {
  const auto v = csv::parse_double(s);
  if (!v || *v < 0 || std::floor(*v) != *v) throw InputError("config `" + key + "`: expected a non-negative integer");
  return static_cast<T>(*v);
}

}  // namespace detail

inline BenchmarkConfig parse_benchmark_config(std::istream& in, const std::string& source = "config") {
  BenchmarkConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = csv::trim(text);
    if (text.empty() || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw InputError(csv::where(source, line) + ": expected key = value");
    const std::string key(csv::trim(text.substr(0, eq)));
    std::string_view value = csv::trim(text.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const auto items = detail::split_list(value);
    if (items.empty()) throw InputError(csv::where(source, line) + ": empty value for `" + key + "`");

    if (key == "n") {
      cfg.n.clear();
      for (auto s : items) cfg.n.push_back(detail::parse_integer<std::size_t>(s, key));
    } else if (key == "modes") {
      cfg.modes.clear();
      for (auto s : items) {
        std::string m(csv::trim(s));
        if (m.size() >= 2 && m.front() == '"' && m.back() == '"') m = m.substr(1, m.size() - 2);
        cfg.modes.push_back(m);
      }
    } else if (key == "eps" || key == "accuracy") {
      cfg.eps.clear();
      for (auto s : items) {
        const auto v = csv::parse_double(s);
        if (!v || !(*v > 0.0 && *v < 1.0)) throw InputError(csv::where(source, line) + ": accuracy must lie in (0, 1)");
        cfg.eps.push_back(*v);
      }
    } else if (key == "nb" || key == "tile_size") {
      cfg.nb.clear();
      for (auto s : items) cfg.nb.push_back(detail::parse_integer<std::size_t>(s, key));
    } else if (key == "theta") {
      cfg.theta = parse_theta(items.front());
    } else if (key == "nugget") {
      const auto v = csv::parse_double(items.front());
      if (!v || *v < 0.0) throw InputError(csv::where(source, line) + ": nugget must be >= 0");
      cfg.nugget = *v;
    } else if (key == "seed") {
      cfg.seed = detail::parse_integer<std::uint64_t>(items.front(), key);
    } else if (key == "repetitions") {
      cfg.repetitions = detail::parse_integer<int>(items.front(), key);
      if (cfg.repetitions < 1) throw InputError(csv::where(source, line) + ": repetitions must be >= 1");
    } else {
      throw InputError(csv::where(source, line) + ": unknown key `" + key + "`");
    }
  }
  for (auto n : cfg.n) {
    if (n == 0) throw InputError(source + ": n must be >= 1");
  }
  return cfg;
}

inline BenchmarkConfig load_benchmark_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_benchmark_config(in, path);
}

struct ReportRow {
  std::string mode;  // StorageMode::label()
  double eps = 0.0;  // 0 for dense
  std::size_t n = 0;
  std::size_t nb = 0;
  double iteration_seconds = 0.0;
  std::size_t peak_stored_reals = 0;
  double compression_ratio = 0.0;
  double loglik = 0.0;
  std::optional<MaternParams> theta_hat;
  std::optional<double> mse;
  std::string error;  // empty when the row succeeded

  bool operator==(const ReportRow& o) const {
    auto same_theta = [](const std::optional<MaternParams>& a, const std::optional<MaternParams>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->variance == b->variance && a->range == b->range && a->smoothness == b->smoothness);
    };
    return mode == o.mode && eps == o.eps && n == o.n && nb == o.nb && iteration_seconds == o.iteration_seconds &&
           peak_stored_reals == o.peak_stored_reals && compression_ratio == o.compression_ratio && loglik == o.loglik &&
           same_theta(theta_hat, o.theta_hat) && mse == o.mse && error == o.error;
  }
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  bool operator==(const ExperimentReport&) const = default;
};

inline constexpr const char* kReportHeader =
    "mode,eps,n,nb,iteration_seconds,peak_stored_reals,compression_ratio,loglik,theta1,theta2,theta3,mse,error";

inline void write_report(std::ostream& out, const ExperimentReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << r.mode << ',' << csv::format(r.eps) << ',' << r.n << ',' << r.nb << ',' << csv::format(r.iteration_seconds)
        << ',' << r.peak_stored_reals << ',' << csv::format(r.compression_ratio) << ',' << csv::format(r.loglik);
    if (r.theta_hat) {
      out << ',' << csv::format(r.theta_hat->variance) << ',' << csv::format(r.theta_hat->range) << ','
          << csv::format(r.theta_hat->smoothness);
    } else {
      out << ",,,";
    }
    out << ',' << (r.mse ? csv::format(*r.mse) : std::string()) << ',' << error << '\n';
  }
}

inline void write_report(const std::string& path, const ExperimentReport& report) {
  auto out = csv::open_out(path);
  write_report(out, report);
}

inline ExperimentReport read_report(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (csv::trim(lines.front().second) != kReportHeader) throw InputError(path + ": not a benchmark report");
  ExperimentReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i].second);
    const auto at = csv::where(path, lines[i].first);
    if (f.size() != 13) throw InputError(at + ": expected 13 fields");
    auto num = [&](std::string_view s) {
      const auto v = csv::parse_double(s);
      if (!v) throw InputError(at + ": malformed number `" + std::string(s) + "`");
      return *v;
    };
    ReportRow r;
    r.mode = std::string(f[0]);
    r.eps = num(f[1]);
    r.n = static_cast<std::size_t>(num(f[2]));
    r.nb = static_cast<std::size_t>(num(f[3]));
    r.iteration_seconds = num(f[4]);
    r.peak_stored_reals = static_cast<std::size_t>(num(f[5]));
    r.compression_ratio = num(f[6]);
    r.loglik = num(f[7]);
    if (!f[8].empty()) r.theta_hat = MaternParams{num(f[8]), num(f[9]), num(f[10]), 0.0};
    if (!f[11].empty()) r.mse = num(f[11]);
    r.error = std::string(f[12]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

/// Time of one likelihood evaluation (assembly, factorization, solve), median of `repetitions`.
struct TimedLikelihood {
  LikelihoodBreakdown breakdown;
  double median_seconds = 0.0;
};

inline TimedLikelihood time_likelihood(const LocationSet& set, const MeasurementVector& z, const MaternParams& p,
                                       const LikelihoodConfig& cfg, int repetitions) {
  const auto data = detail::ordered(set, z, cfg.ordering);
  std::vector<double> seconds;
  TimedLikelihood out;
  for (int r = 0; r < std::max(repetitions, 1); ++r) {
    const auto start = std::chrono::steady_clock::now();
    out.breakdown = detail::evaluate_ordered(data.set, data.z, p, cfg);
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  out.median_seconds = quantile(seconds, 0.5);
  return out;
}

/// Every (n, nb, mode, eps) combination of the config; failures are recorded per row.
inline ExperimentReport run_benchmark(const BenchmarkConfig& config) {
  ExperimentReport report;
  MaternParams theta = config.theta;
  theta.nugget = config.nugget;
  for (const auto n : config.n) {
    const LocationSet set = generate_locations(n, config.seed);
    MeasurementVector z;
    std::string sample_error;
    try {
      z = sample_measurements(set, theta, measurement_seed(config.seed));
    } catch (const std::bad_alloc&) {
      sample_error = "out of memory";
    } catch (const NumericalError& e) {
      sample_error = e.what();
    }
    for (const auto& mode_text : config.modes) {
      std::vector<StorageMode> modes;
      if (mode_text == "tlr") {
        for (double e : config.eps) modes.push_back(StorageMode::tlr(e));
      } else {
        modes.push_back(parse_mode(mode_text));
      }
      for (const auto& mode : modes) {
        for (const auto nb : config.nb) {
          LikelihoodConfig cfg;
          cfg.mode = mode;
          cfg.tile_size = nb;
          ReportRow row;
          row.mode = mode.label();
          row.eps = mode.is_tlr() ? mode.accuracy : 0.0;
          row.n = n;
          row.nb = std::min(cfg.effective_tile_size(), n);
          if (!sample_error.empty()) {
            row.error = sample_error;
            report.rows.push_back(std::move(row));
            continue;
          }
          try {
            const auto timed = time_likelihood(set, z, theta, cfg, config.repetitions);
            row.iteration_seconds = timed.median_seconds;
            row.peak_stored_reals = timed.breakdown.peak_stored_reals;
            row.compression_ratio = timed.breakdown.matrix_footprint.compression_ratio;
            row.loglik = timed.breakdown.value;
          } catch (const std::bad_alloc&) {
            row.error = "out of memory";
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          report.rows.push_back(std::move(row));
        }
      }
    }
  }
  return report;
}

}  // namespace geotlr
