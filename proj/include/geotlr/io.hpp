#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/stats.hpp"
#include "geotlr/tilestore.hpp"

namespace geotlr {

/// Locations with one measurement each.
struct Dataset {
  LocationSet locations;
  MeasurementVector values;
  std::string provenance;

  std::size_t size() const { return locations.size(); }
};

enum class MissingPolicy { Drop, Strict };

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA";
}

/// Shortest text that round-trips: 17 significant digits.
inline std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

/// Lines of a file with their 1-based numbers; blank lines are skipped.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    lines.emplace_back(number, line);
  }
  if (lines.empty()) throw InputError(path + " is empty");
  return lines;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace csv

namespace detail {

inline std::pair<std::string, std::string> coordinate_header(const Metric& metric) {
  return metric.kind == MetricKind::GreatCircle ? std::pair<std::string, std::string>{"lon", "lat"}
                                                : std::pair<std::string, std::string>{"x", "y"};
}

inline void expect_coordinate_header(const std::vector<std::string_view>& header, const Metric& metric,
                                     const std::string& path) {
  const auto [hx, hy] = coordinate_header(metric);
  if (header.size() < 2 || header[0] != hx || header[1] != hy) {
    throw InputError(path + ": header must start with `" + hx + "," + hy + "` for the " +
                     (metric.kind == MetricKind::GreatCircle ? "great-circle" : "euclidean") + " metric");
  }
}

inline Location parse_location(const std::vector<std::string_view>& fields, const std::string& path, std::size_t line) {
  const auto x = csv::parse_double(fields[0]);
  const auto y = csv::parse_double(fields[1]);
  if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
    throw InputError(csv::where(path, line) + ": malformed coordinates");
  }
  return {*x, *y};
}

inline LocationSet make_set(std::vector<Location> pts, std::vector<std::size_t> lines, const Metric& metric,
                            const std::string& path) {
  std::map<std::pair<double, double>, std::size_t> seen;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [it, inserted] = seen.emplace(std::pair{pts[i].x, pts[i].y}, lines[i]);
    if (!inserted) {
      throw InputError(path + ": duplicate location on lines " + std::to_string(it->second) + " and " +
                       std::to_string(lines[i]));
    }
  }
  try {
    return LocationSet(std::move(pts), metric);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace detail

inline LocationSet read_locations(const std::string& path, const Metric& metric = Metric::euclidean()) {
  const auto lines = csv::read_lines(path);
  detail::expect_coordinate_header(csv::split(lines.front().second), metric, path);
  std::vector<Location> pts;
  std::vector<std::size_t> numbers;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split(lines[i].second);
    if (fields.size() < 2) throw InputError(csv::where(path, lines[i].first) + ": expected two coordinates");
    pts.push_back(detail::parse_location(fields, path, lines[i].first));
    numbers.push_back(lines[i].first);
  }
  if (pts.empty()) throw InputError(path + " has no locations");
  return detail::make_set(std::move(pts), std::move(numbers), metric, path);
}

inline void write_locations(const std::string& path, const LocationSet& set) {
  auto out = csv::open_out(path);
  const auto [hx, hy] = detail::coordinate_header(set.metric());
  out << hx << ',' << hy << '\n';
  for (const auto& p : set.points()) out << csv::format(p.x) << ',' << csv::format(p.y) << '\n';
}

/// Single numeric column selected by header name (first match of `names`).
inline Eigen::VectorXd read_column(const std::string& path, const std::vector<std::string>& names) {
  const auto lines = csv::read_lines(path);
  const auto header = csv::split(lines.front().second);
  std::optional<std::size_t> col;
  for (const auto& name : names) {
    for (std::size_t c = 0; c < header.size() && !col; ++c) {
      if (header[c] == name) col = c;
    }
    if (col) break;
  }
  if (!col) {
    std::string wanted;
    for (const auto& n : names) wanted += (wanted.empty() ? "" : "|") + n;
    throw InputError(path + ": no column named " + wanted);
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(lines.size() - 1));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split(lines[i].second);
    const auto value = *col < fields.size() ? csv::parse_double(fields[*col]) : std::nullopt;
    if (!value || !std::isfinite(*value)) throw InputError(csv::where(path, lines[i].first) + ": malformed value");
    v(static_cast<Eigen::Index>(i - 1)) = *value;
  }
  return v;
}

inline MeasurementVector read_values(const std::string& path) { return read_column(path, {"value"}); }

inline void write_values(const std::string& path, const MeasurementVector& z) {
  auto out = csv::open_out(path);
  out << "value\n";
  for (Eigen::Index i = 0; i < z.size(); ++i) out << csv::format(z(i)) << '\n';
}

/// Reads `x,y,value` (or `lon,lat,value`). Missing values (empty or `NA`) are
/// dropped under MissingPolicy::Drop and rejected under MissingPolicy::Strict.
inline Dataset load_dataset(const std::string& path, const Metric& metric = Metric::euclidean(),
                            MissingPolicy policy = MissingPolicy::Drop) {
  const auto lines = csv::read_lines(path);
  const auto header = csv::split(lines.front().second);
  detail::expect_coordinate_header(header, metric, path);
  if (header.size() < 3 || header[2] != "value") throw InputError(path + ": third column must be `value`");

  std::vector<Location> pts;
  std::vector<std::size_t> numbers;
  std::vector<double> values;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i].first;
    const auto fields = csv::split(lines[i].second);
    if (fields.size() != 3) throw InputError(csv::where(path, line) + ": expected 3 fields, got " + std::to_string(fields.size()));
    const Location loc = detail::parse_location(fields, path, line);
    if (csv::is_missing(fields[2])) {
      if (policy == MissingPolicy::Strict) throw InputError(csv::where(path, line) + ": missing value");
      continue;
    }
    const auto v = csv::parse_double(fields[2]);
    if (!v || !std::isfinite(*v)) throw InputError(csv::where(path, line) + ": malformed value");
    pts.push_back(loc);
    numbers.push_back(line);
    values.push_back(*v);
  }
  if (pts.empty()) throw InputError(path + ": no usable rows");
  LocationSet set = detail::make_set(std::move(pts), std::move(numbers), metric, path);
  return {std::move(set), Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
          path};
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  auto out = csv::open_out(path);
  const auto [hx, hy] = detail::coordinate_header(d.locations.metric());
  out << hx << ',' << hy << ",value\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::format(d.locations[i].x) << ',' << csv::format(d.locations[i].y) << ','
        << csv::format(d.values(static_cast<Eigen::Index>(i))) << '\n';
  }
}

/// Splits the bounding box into rows x cols equal cells (rows along y,
/// ascending) and returns each non-empty cell in row-major order as R0, R1, ...
inline std::vector<Dataset> partition_regions(const Dataset& d, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InputError("partition needs rows, cols >= 1");
  double xmin = d.locations[0].x, xmax = xmin, ymin = d.locations[0].y, ymax = ymin;
  for (const auto& p : d.locations.points()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  auto cell = [](double v, double lo, double hi, std::size_t count) -> std::size_t {
    if (!(hi > lo)) return 0;
    const auto c = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(count)));
    return std::min(c, count - 1);
  };
  std::vector<std::vector<std::size_t>> members(rows * cols);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = cell(d.locations[i].y, ymin, ymax, rows);
    const auto c = cell(d.locations[i].x, xmin, xmax, cols);
    members[r * cols + c].push_back(i);
  }
  std::vector<Dataset> out;
  for (const auto& idx : members) {
    if (idx.empty()) continue;
    MeasurementVector v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v(static_cast<Eigen::Index>(k)) = d.values(static_cast<Eigen::Index>(idx[k]));
    out.push_back({d.locations.subset(idx), std::move(v), "R" + std::to_string(out.size())});
  }
  return out;
}

/// `iter,theta1,theta2,theta3,loglik,seconds`, one row per likelihood evaluation.
inline void write_trace_csv(const std::string& path, const EstimationResult& r) {
  auto out = csv::open_out(path);
  out << "iter,theta1,theta2,theta3,loglik,seconds\n";
  for (const auto& t : r.trace) {
    out << t.iteration << ',' << csv::format(t.theta.variance) << ',' << csv::format(t.theta.range) << ','
        << csv::format(t.theta.smoothness) << ',' << csv::format(t.loglik) << ',' << csv::format(t.seconds) << '\n';
  }
}

/// Parameters of the highest finite log-likelihood in a trace written by write_trace_csv.
inline MaternParams best_trace_theta(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (csv::split(lines.front().second) != std::vector<std::string_view>{"iter", "theta1", "theta2", "theta3", "loglik", "seconds"}) {
    throw InputError(path + ": not an estimation trace");
  }
  std::optional<MaternParams> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split(lines[i].second);
    std::array<double, 4> v{};
    for (std::size_t c = 0; c < 4; ++c) {
      const auto x = c + 1 < fields.size() ? csv::parse_double(fields[c + 1]) : std::nullopt;
      if (!x || std::isnan(*x)) throw InputError(csv::where(path, lines[i].first) + ": malformed trace row");
      v[c] = *x;
    }
    if (std::isfinite(v[3]) && v[3] > best_ll) {
      best_ll = v[3];
      best = MaternParams{v[0], v[1], v[2], 0.0};
    }
  }
  if (!best) throw InputError(path + ": trace has no finite log-likelihood");
  return *best;
}

/// `x,y,predicted[,truth]`
inline void write_prediction_csv(const std::string& path, const LocationSet& unknown, const Eigen::VectorXd& pred,
                                 const std::optional<Eigen::VectorXd>& truth = std::nullopt) {
  if (static_cast<std::size_t>(pred.size()) != unknown.size()) throw InputError("prediction length mismatch");
  if (truth && truth->size() != pred.size()) throw InputError("truth length mismatch");
  auto out = csv::open_out(path);
  out << "x,y,predicted" << (truth ? ",truth" : "") << '\n';
  for (std::size_t i = 0; i < unknown.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << csv::format(unknown[i].x) << ',' << csv::format(unknown[i].y) << ',' << csv::format(pred(k));
    if (truth) out << ',' << csv::format((*truth)(k));
    out << '\n';
  }
}

}  // namespace geotlr
