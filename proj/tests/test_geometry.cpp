#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <array>
#include <random>
#include <set>

#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"

using namespace geotlr;

namespace {

// Chord length through the unit sphere -> arc length; independent of the haversine route.
double chord_arc(const Location& a, const Location& b, double radius) {
  auto unit = [](const Location& p) {
    const double lon = p.x * std::numbers::pi / 180.0, lat = p.y * std::numbers::pi / 180.0;
    return std::array<double, 3>{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
  };
  const auto u = unit(a), v = unit(b);
  const double c = std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) + (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * radius * std::asin(std::min(1.0, c / 2.0));
}

}  // namespace

TEST(Distance, IdentityIsZero) {
  const Location p{0.3, -0.7};
  EXPECT_EQ(distance(p, p, Metric::euclidean()), 0.0);
  EXPECT_EQ(distance({12.5, 40.0}, {12.5, 40.0}, Metric::great_circle(1.0)), 0.0);
}

TEST(Distance, AntipodalOnEquator) {
  EXPECT_NEAR(distance({0, 0}, {180, 0}, Metric::great_circle(1.0)), std::numbers::pi, 1e-15);
}

TEST(Distance, PoleIsQuarterCircle) {
  for (double lon : {-170.0, 0.0, 33.0, 180.0}) {
    EXPECT_NEAR(distance({0, 0}, {lon, 90}, Metric::great_circle(1.0)), std::numbers::pi / 2, 1e-15);
  }
}

TEST(Distance, DefaultRadiusIsEarthMean) {
  EXPECT_DOUBLE_EQ(Metric::great_circle().radius, 6371.0);
  EXPECT_NEAR(distance({0, 0}, {180, 0}, Metric::great_circle()), 6371.0 * std::numbers::pi, 1e-9);
}

TEST(Distance, HaversineMatchesChordOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90);
  for (int i = 0; i < 2000; ++i) {
    const Location a{lon(rng), lat(rng)}, b{lon(rng), lat(rng)};
    const double d = distance(a, b, Metric::great_circle(6371.0));
    EXPECT_NEAR(d, chord_arc(a, b, 6371.0), 1e-9 * 6371.0);
  }
}

TEST(Distance, SymmetricAndTriangle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3), lon(-180, 180), lat(-90, 90);
  for (int i = 0; i < 3000; ++i) {
    const Location a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const auto e = Metric::euclidean();
    EXPECT_EQ(distance(a, b, e), distance(b, a, e));
    EXPECT_LE(distance(a, c, e), (distance(a, b, e) + distance(b, c, e)) * (1 + 1e-12));

    const Location p{lon(rng), lat(rng)}, q{lon(rng), lat(rng)}, r{lon(rng), lat(rng)};
    const auto g = Metric::great_circle(1.0);
    EXPECT_NEAR(distance(p, q, g), distance(q, p, g), 1e-15);
    EXPECT_LE(distance(p, r, g), (distance(p, q, g) + distance(q, r, g)) * (1 + 1e-12) + 1e-15);
  }
}

TEST(LocationSet, RejectsBadInput) {
  EXPECT_THROW(LocationSet({}, Metric::euclidean()), InputError);
  EXPECT_THROW(LocationSet({{0, 0}, {NAN, 1}}, Metric::euclidean()), InputError);
  EXPECT_THROW(LocationSet({{0, 0}, {0, 0}}, Metric::euclidean()), InputError);
  EXPECT_THROW(LocationSet({{181, 0}}, Metric::great_circle()), InputError);
  EXPECT_THROW(LocationSet({{0, -91}}, Metric::great_circle()), InputError);
}

TEST(LocationSet, GreatCircleAliasesAreDuplicates) {
  // Same point on the sphere written two ways.
  EXPECT_THROW(LocationSet({{-180, 10}, {180, 10}}, Metric::great_circle()), InputError);
  EXPECT_THROW(LocationSet({{10, 90}, {-45, 90}}, Metric::great_circle()), InputError);
  EXPECT_NO_THROW(LocationSet({{-180, 10}, {180, 11}}, Metric::great_circle()));
}

TEST(LocationSet, PermuteAndSubsetKeepIdentity) {
  const LocationSet s({{0, 0}, {1, 0}, {0, 1}}, Metric::euclidean());
  const std::vector<std::size_t> order{2, 0, 1};
  const auto p = s.permuted(order);
  EXPECT_EQ(p[0], s[2]);
  EXPECT_EQ(p[1], s[0]);
  const std::vector<std::size_t> pick{1};
  EXPECT_EQ(s.subset(pick)[0], s[1]);
  const std::vector<std::size_t> bad{0, 0, 1};
  EXPECT_THROW(s.permuted(bad), InputError);
}

TEST(Generate, SinglePointInsideInnerSquare) {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto s = generate_locations(1, seed);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_GT(s[0].x, 0.1);
    EXPECT_LT(s[0].x, 0.9);
    EXPECT_GT(s[0].y, 0.1);
    EXPECT_LT(s[0].y, 0.9);
  }
}

TEST(Generate, FourPointsOnePerQuadrant) {
  const auto s = generate_locations(4, 3);
  ASSERT_EQ(s.size(), 4u);
  std::set<std::pair<int, int>> cells;
  for (const auto& p : s.points()) cells.insert({p.x < 0.5 ? 0 : 1, p.y < 0.5 ? 0 : 1});
  EXPECT_EQ(cells.size(), 4u);
}

TEST(Generate, SeparationAndUnitSquare) {
  for (std::size_t n : {400u, 401u, 1000u}) {
    const auto s = generate_locations(n, 42);
    ASSERT_EQ(s.size(), n);
    const double g = std::ceil(std::sqrt(static_cast<double>(n)));
    double dmin = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(s[i].x, 0.0);
      EXPECT_LT(s[i].x, 1.0);
      EXPECT_GT(s[i].y, 0.0);
      EXPECT_LT(s[i].y, 1.0);
      for (std::size_t j = 0; j < i; ++j) dmin = std::min(dmin, distance(s[i], s[j], s.metric()));
    }
    EXPECT_GE(dmin, 0.2 / g);
  }
}

TEST(Generate, Deterministic) {
  const auto a = generate_locations(300, 5), b = generate_locations(300, 5), c = generate_locations(300, 6);
  EXPECT_TRUE(std::ranges::equal(a.points(), b.points()));
  EXPECT_FALSE(std::ranges::equal(a.points(), c.points()));
}

TEST(DistanceBlock, SingleEntryAndSymmetry) {
  const auto s = generate_locations(50, 1);
  EXPECT_EQ(pairwise_distance_block(s, {7, 1}, {7, 1})(0, 0), 0.0);
  const auto a = pairwise_distance_block(s, {3, 10}, {20, 15});
  const auto b = pairwise_distance_block(s, {20, 15}, {3, 10});
  EXPECT_EQ((a - b.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(pairwise_distance_block(s, {45, 10}, {0, 1}), InputError);
}

TEST(DistanceBlock, MatchesPointwiseDistance) {
  const auto s = generate_locations(80, 4);
  const auto d = pairwise_distance_block(s, {5, 40}, {30, 50});
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double ref = distance(s[5 + static_cast<std::size_t>(i)], s[30 + static_cast<std::size_t>(j)], s.metric());
      EXPECT_NEAR(d(i, j), ref, 4e-16 * std::max(ref, 1.0));
    }
  }
}

TEST(DistanceBlock, UnitSquareCorners) {
  const LocationSet s({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, Metric::euclidean());
  const auto d = pairwise_distance_block(s, {0, 4}, {0, 4});
  EXPECT_DOUBLE_EQ(d(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 3), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(d(1, 2), std::sqrt(2.0));
}

TEST(Morton, IsPermutationAndLocal) {
  const auto s = generate_locations(1024, 2);
  auto order = morton_order(s);
  auto sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
  // Blocks of consecutive points are compact: this is what makes off-diagonal tiles low rank.
  auto diameter = [&](auto index_of) {
    double worst = 0;
    for (std::size_t b = 0; b < s.size(); b += 64) {
      for (std::size_t i = b; i < b + 64; ++i)
        for (std::size_t j = b; j < i; ++j) worst = std::max(worst, distance(s[index_of(i)], s[index_of(j)], s.metric()));
    }
    return worst;
  };
  EXPECT_LT(diameter([&](std::size_t i) { return order[i]; }), 0.5 * diameter([](std::size_t i) { return i; }));
}
