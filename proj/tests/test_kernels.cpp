#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "geotlr/errors.hpp"
#include "geotlr/kernels.hpp"
#include "oracles.hpp"

using namespace geotlr;

TEST(Gamma, KnownValues) {
  EXPECT_NEAR(gamma_fn(1.0), 1.0, 1e-15);
  EXPECT_NEAR(gamma_fn(0.5), std::sqrt(std::numbers::pi), 1e-13 * std::sqrt(std::numbers::pi));
  EXPECT_NEAR(gamma_fn(1.5), std::sqrt(std::numbers::pi) / 2, 1e-13);
  EXPECT_NEAR(gamma_fn(5.0), 24.0, 24e-13);
  EXPECT_THROW(gamma_fn(0.0), InputError);
  EXPECT_THROW(gamma_fn(50.5), InputError);
}

TEST(Gamma, Recurrence) {
  for (double x = 0.05; x < 49; x += 0.37) EXPECT_NEAR(gamma_fn(x + 1) / (x * gamma_fn(x)), 1.0, 1e-13);
}

TEST(BesselK, HalfIntegerClosedForms) {
  EXPECT_NEAR(bessel_k(0.5, 2.0), std::sqrt(std::numbers::pi / 4) * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(bessel_k(0.5, 2.0), 0.1199377, 1e-7);
  EXPECT_NEAR(bessel_k(1.5, 1.0), std::sqrt(std::numbers::pi / 2) * std::exp(-1.0) * 2, 1e-12);
  EXPECT_NEAR(bessel_k(1.5, 1.0), 0.9221370, 1e-7);
  for (double x : {1e-8, 1e-3, 0.3, 1.0, 1.99, 2.0, 2.01, 7.0, 30.0, 50.0}) {
    const double k12 = std::sqrt(std::numbers::pi / (2 * x)) * std::exp(-x);
    EXPECT_NEAR(bessel_k(0.5, x) / k12, 1.0, 1e-10) << x;
    EXPECT_NEAR(bessel_k(2.5, x) / (k12 * (1 + 3 / x + 3 / (x * x))), 1.0, 1e-10) << x;
  }
}

TEST(BesselK, WhittleValueFromQuadrature) {
  const double k1 = oracle::bessel_k_quadrature(1.0, 1.0);
  EXPECT_NEAR(k1, 0.6019, 1e-4);
  EXPECT_NEAR(bessel_k(1.0, 1.0) / k1, 1.0, 1e-10);
}

TEST(BesselK, QuadratureGrid) {
  for (double nu : {0.3, 0.5, 1.0, 1.7, 2.5}) {
    for (double x : {0.01, 0.1, 1.0, 5.0, 20.0}) {
      const double ref = oracle::bessel_k_quadrature(nu, x);
      EXPECT_NEAR(bessel_k(nu, x) / ref, 1.0, 1e-8) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselK, RandomAgainstQuadrature) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> nu(0.01, 5.0), lx(std::log(1e-8), std::log(50.0));
  for (int i = 0; i < 300; ++i) {
    const double n = nu(rng), x = std::exp(lx(rng));
    EXPECT_NEAR(bessel_k(n, x) / oracle::bessel_k_quadrature(n, x), 1.0, 1e-10) << "nu=" << n << " x=" << x;
  }
}

TEST(BesselK, DecreasingInX) {
  for (double nu : {0.1, 0.5, 1.0, 2.3, 5.0}) {
    const BesselK k(nu);
    double prev = INFINITY;
    for (double x = 1e-6; x < 50; x *= 1.05) {
      const double v = k(x);
      EXPECT_LT(v, prev) << nu << " " << x;
      prev = v;
    }
  }
}

TEST(BesselK, BatchMatchesScalar) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lx(std::log(1e-6), std::log(700.0));
  for (double nu : {0.01, 0.3, 0.5, 0.73, 1.0, 1.5, 2.5, 3.7, 4.99, 5.0}) {
    const BesselK scalar(nu);
    const BesselKBatch batch(nu);
    std::vector<double> xs;
    for (double e : {0.5, 1.0, 2.0, 3.0, 4.5, 7.0, 10.0, 14.0, 20.0}) {
      xs.push_back(e);
      xs.push_back(std::nextafter(e, 0.0));
    }
    for (int i = 0; i < 3000; ++i) xs.push_back(std::exp(lx(rng)));
    std::vector<double> out(xs.size());
    batch.evaluate(xs.data(), out.data(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      EXPECT_NEAR(out[i] / scalar(xs[i]), 1.0, 1e-13) << "nu=" << nu << " x=" << xs[i];
    }
  }
  const double bad = 0.0;
  double out = 0.0;
  EXPECT_THROW(BesselKBatch(1.0).evaluate(&bad, &out, 1), InputError);
}

TEST(BesselK, DomainErrors) {
  EXPECT_THROW(bessel_k(1.0, 0.0), InputError);
  EXPECT_THROW(bessel_k(1.0, -1.0), InputError);
  EXPECT_THROW(bessel_k(0.0, 1.0), InputError);
  EXPECT_THROW(bessel_k(5.5, 1.0), InputError);
}

TEST(Matern, Examples) {
  EXPECT_EQ(matern(0.0, {1, 0.1, 0.5, 0}), 1.0);
  EXPECT_NEAR(matern(0.1, {1, 0.1, 0.5, 0}), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(matern(0.1, {1, 0.1, 1.0, 0}), oracle::bessel_k_quadrature(1.0, 1.0), 1e-10);
  // Nugget never enters the kernel.
  EXPECT_EQ(matern(0.0, {2, 0.1, 0.5, 0.3}), 2.0);
}

TEST(Matern, MatchesDefinitionOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> var(0.1, 5), range(0.01, 1), nu(0.1, 5), r(0, 2);
  for (int i = 0; i < 200; ++i) {
    const MaternParams p{var(rng), range(rng), nu(rng), 0};
    const double d = r(rng);
    if (d / p.range > 50) continue;
    const double ref = oracle::matern(d, p.variance, p.range, p.smoothness);
    EXPECT_NEAR(matern(d, p), ref, 1e-9 * p.variance) << d;
  }
}

TEST(Matern, MonotoneBoundedAndDecaying) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> var(0.1, 5), range(0.01, 1), nu(0.05, 5);
  for (int i = 0; i < 50; ++i) {
    const MaternParams p{var(rng), range(rng), nu(rng), 0};
    const MaternKernel k(p);
    double prev = p.variance;
    for (double r = 0; r < 20 * p.range; r += p.range / 50) {
      const double v = k(r);
      EXPECT_LE(v, prev);
      EXPECT_GE(v, 0.0);
      prev = v;
    }
    EXPECT_LT(k(100 * p.range), 1e-10 * p.variance);
  }
  EXPECT_EQ(matern(1e6, {1, 0.1, 0.5, 0}), 0.0);
}

TEST(Matern, ApplyMatchesPointwise) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> var(0.1, 5), range(0.01, 1), nu(0.05, 5), r(0, 3);
  for (int i = 0; i < 20; ++i) {
    const MaternKernel k({var(rng), range(rng), nu(rng), 0});
    std::vector<double> d(5000);
    for (auto& v : d) v = r(rng);
    d[0] = 0.0;
    d[1] = 1e6;
    std::vector<double> c = d;
    k.apply(c.data(), c.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      EXPECT_NEAR(c[j], k(d[j]), 1e-13 * k.params().variance) << d[j];
    }
  }
  std::vector<double> neg{0.1, -1.0};
  EXPECT_THROW(MaternKernel({1, 0.1, 0.5, 0}).apply(neg.data(), neg.size()), InputError);
}

TEST(Matern, ParameterValidation) {
  EXPECT_THROW(matern(0.1, {0, 0.1, 0.5, 0}), InputError);
  EXPECT_THROW(matern(0.1, {1, -0.1, 0.5, 0}), InputError);
  EXPECT_THROW(matern(0.1, {1, 0.1, 6.0, 0}), InputError);
  EXPECT_THROW(matern(0.1, {1, 0.1, 0.5, -1}), InputError);
  EXPECT_THROW(matern(-0.1, {1, 0.1, 0.5, 0}), InputError);
}
