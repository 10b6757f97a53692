#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geotlr/errors.hpp"

namespace geotlr {

/// A planar point, or (longitude, latitude) in degrees under the great-circle metric.
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

enum class MetricKind { Euclidean, GreatCircle };

struct Metric {
  MetricKind kind = MetricKind::Euclidean;
  double radius = 6371.0;  // only used for GreatCircle, in output length units

  static Metric euclidean() { return {}; }
  static Metric great_circle(double radius = 6371.0) { return {MetricKind::GreatCircle, radius}; }

  friend bool operator==(const Metric&, const Metric&) = default;
};

/// Half-open index range [begin, begin + size).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t size = 0;

  std::size_t end() const { return begin + size; }
};

namespace detail {

inline double haversine(double t) {
  const double s = std::sin(0.5 * t);
  return s * s;
}

inline double deg2rad(double d) { return d * (std::numbers::pi / 180.0); }

}  // namespace detail

/// Euclidean or haversine great-circle distance.
inline double distance(const Location& a, const Location& b, const Metric& metric) {
  if (metric.kind == MetricKind::Euclidean) {
    return std::hypot(a.x - b.x, a.y - b.y);
  }
  const double lat1 = detail::deg2rad(a.y);
  const double lat2 = detail::deg2rad(b.y);
  const double dlon = detail::deg2rad(b.x - a.x);
  double h = detail::haversine(lat2 - lat1) + std::cos(lat1) * std::cos(lat2) * detail::haversine(dlon);
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * metric.radius * std::asin(std::sqrt(h));
}

/// Ordered, immutable collection of distinct locations sharing one metric.
///
/// Index i always names the same point; covariance rows and columns are
/// addressed through these indices.
class LocationSet {
 public:
  LocationSet(std::vector<Location> points, Metric metric) : points_(std::move(points)), metric_(metric) {
    validate();
  }

  std::size_t size() const { return points_.size(); }
  const Location& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Location> points() const { return points_; }
  const Metric& metric() const { return metric_; }

  /// New set whose i-th point is this set's point order[i].
  LocationSet permuted(std::span<const std::size_t> order) const {
    if (order.size() != points_.size()) throw InputError("permutation length does not match location count");
    std::vector<Location> out;
    out.reserve(order.size());
    for (std::size_t idx : order) out.push_back(points_.at(idx));
    return LocationSet(std::move(out), metric_);
  }

  LocationSet subset(std::span<const std::size_t> indices) const {
    std::vector<Location> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) out.push_back(points_.at(idx));
    return LocationSet(std::move(out), metric_);
  }

 private:
  void validate() const {
    if (points_.empty()) throw InputError("location set must not be empty");
    if (metric_.kind == MetricKind::GreatCircle && !(metric_.radius > 0.0 && std::isfinite(metric_.radius))) {
      throw InputError("great-circle radius must be positive");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw InputError("location " + std::to_string(i) + " has a non-finite coordinate");
      }
      if (metric_.kind == MetricKind::GreatCircle &&
          (p.x < -180.0 || p.x > 180.0 || p.y < -90.0 || p.y > 90.0)) {
        throw InputError("location " + std::to_string(i) + " is outside lon [-180,180] / lat [-90,90]");
      }
    }
    // Distinctness under the metric: poles collapse longitude, and lon -180 == lon 180.
    std::vector<std::pair<Location, std::size_t>> keyed;
    keyed.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      Location key = points_[i];
      if (metric_.kind == MetricKind::GreatCircle) {
        if (std::abs(key.y) == 90.0) key.x = 0.0;
        if (key.x == -180.0) key.x = 180.0;
      }
      keyed.emplace_back(key, i);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      return a.first.x < b.first.x || (a.first.x == b.first.x && a.first.y < b.first.y);
    });
    for (std::size_t i = 1; i < keyed.size(); ++i) {
      if (keyed[i].first == keyed[i - 1].first) {
        throw InputError("locations " + std::to_string(keyed[i - 1].second) + " and " +
                         std::to_string(keyed[i].second) + " coincide");
      }
    }
  }

  std::vector<Location> points_;
  Metric metric_;
};

/// Jittered-grid synthetic locations in the unit square.
///
/// With g = ceil(sqrt(n)), cell (r, l) yields ((r - 0.5 + X) / g, (l - 0.5 + Y) / g)
/// with X, Y ~ U(-0.4, 0.4); the first n cells in row-major order are kept.
inline LocationSet generate_locations(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("generate_locations needs n >= 1");
  auto g = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  while (g * g < n) ++g;
  while (g > 1 && (g - 1) * (g - 1) >= n) --g;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);
  std::vector<Location> pts;
  pts.reserve(n);
  const double gd = static_cast<double>(g);
  for (std::size_t r = 1; r <= g && pts.size() < n; ++r) {
    for (std::size_t l = 1; l <= g && pts.size() < n; ++l) {
      const double dx = jitter(rng);
      const double dy = jitter(rng);
      pts.push_back({(static_cast<double>(r) - 0.5 + dx) / gd, (static_cast<double>(l) - 0.5 + dy) / gd});
    }
  }
  return LocationSet(std::move(pts), Metric::euclidean());
}

/// Dense block of distances between points[rows] and points[cols].
inline Eigen::MatrixXd pairwise_distance_block(const LocationSet& set, IndexRange rows, IndexRange cols) {
  if (rows.end() > set.size() || cols.end() > set.size()) throw InputError("distance block range out of bounds");
  Eigen::MatrixXd block(rows.size, cols.size);
  if (set.metric().kind == MetricKind::Euclidean) {
    // Column-wise and vectorized. The squares are stored before the sum so no
    // lane can be fused into an fma, and std::sqrt is used because Eigen's
    // packet sqrt is not correctly rounded; together they keep d(a, b) == d(b, a).
    Eigen::ArrayXd xs(rows.size), ys(rows.size), dx2(rows.size), dy2(rows.size);
    for (std::size_t i = 0; i < rows.size; ++i) {
      xs(static_cast<Eigen::Index>(i)) = set[rows.begin + i].x;
      ys(static_cast<Eigen::Index>(i)) = set[rows.begin + i].y;
    }
    for (std::size_t j = 0; j < cols.size; ++j) {
      const Location& b = set[cols.begin + j];
      dx2 = (xs - b.x).square();
      dy2 = (ys - b.y).square();
      block.col(static_cast<Eigen::Index>(j)) = (dx2 + dy2).unaryExpr([](double v) { return std::sqrt(v); }).matrix();
    }
    return block;
  }
  for (std::size_t j = 0; j < cols.size; ++j) {
    const Location& b = set[cols.begin + j];
    for (std::size_t i = 0; i < rows.size; ++i) {
      block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = distance(set[rows.begin + i], b, set.metric());
    }
  }
  return block;
}

/// Permutation that sorts points along a Morton (Z-order) curve over their bounding box.
///
/// Spatially close points end up in the same tiles, which keeps off-diagonal
/// covariance tiles numerically low rank.
inline std::vector<std::size_t> morton_order(const LocationSet& set) {
  double xmin = set[0].x, xmax = set[0].x, ymin = set[0].y, ymax = set[0].y;
  for (const auto& p : set.points()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double sx = xmax > xmin ? 1.0 / (xmax - xmin) : 0.0;
  const double sy = ymax > ymin ? 1.0 / (ymax - ymin) : 0.0;
  auto spread = [](std::uint64_t v) {
    v &= 0xffffffffULL;
    v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
    v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
    v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
    v = (v | (v << 2)) & 0x3333333333333333ULL;
    v = (v | (v << 1)) & 0x5555555555555555ULL;
    return v;
  };
  constexpr double kScale = 4294967295.0;
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto qx = static_cast<std::uint64_t>((set[i].x - xmin) * sx * kScale);
    const auto qy = static_cast<std::uint64_t>((set[i].y - ymin) * sy * kScale);
    keys[i] = {spread(qx) | (spread(qy) << 1), i};
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < keys.size(); ++i) order[i] = keys[i].second;
  return order;
}

}  // namespace geotlr
