#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "critpoints/circle.hpp"
#include "oracles.hpp"

using namespace critpoints;
using oracles::enumerate_pmf;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

TEST(PowerSums, SingleRootAtOne) {
  const std::vector<cplx> x{{1.0, 0.0}};
  const auto a = power_sum_coefficients(x, 2);
  ASSERT_EQ(a.entries.size(), 3u);
  for (const cplx& e : a.entries) {
    EXPECT_DOUBLE_EQ(e.real(), 1.0);
    EXPECT_EQ(e.imag(), 0.0);
  }
}

TEST(PowerSums, RootsOfUnityCharacterSums) {
  for (std::size_t n : {3u, 7u, 12u}) {
    const auto roots = RootPolynomial::roots_of_unity(n, 128).roots_double();
    const auto a = power_sum_coefficients(roots, 2 * n);
    for (std::size_t r = 0; r <= 2 * n; ++r) {
      if ((r + 1) % n == 0) {
        EXPECT_NEAR(a.entries[r].real(), std::sqrt(static_cast<double>(n)), 1e-13) << n << " " << r;
        EXPECT_NEAR(a.entries[r].imag(), 0.0, 1e-13);
      } else {
        EXPECT_LT(std::abs(a.entries[r]), 1e-13) << n << " " << r;
      }
    }
  }
}

TEST(PowerSums, BoundedBySqrtN) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = sample_roots(UniformCircle{1.0}, 200, seed);
    const auto a = power_sum_coefficients(s, 6);
    for (const cplx& e : a.entries) EXPECT_LE(std::abs(e), std::sqrt(200.0) * (1 + 1e-12));
  }
}

TEST(PowerSums, OffCircleIsDomainError) {
  const std::vector<cplx> x{{1.0, 0.0}, {0.5, 0.0}};
  EXPECT_THROW(power_sum_coefficients(x, 1), DomainError);
}

TEST(PowerSums, ComplexNormalLimitVariance) {
  const std::size_t n = 10000, T = 2000;
  CompensatedSum re, im, re2, im2;
  for (std::size_t t = 0; t < T; ++t) {
    const auto s = sample_roots(UniformCircle{1.0}, n, split_seed(55, n, t));
    const cplx a = power_sum_coefficients(s, 1).entries[1];
    re.add(a.real());
    im.add(a.imag());
    re2.add(a.real() * a.real());
    im2.add(a.imag() * a.imag());
  }
  const double Td = static_cast<double>(T);
  const double var_re = (re2.value() - re.value() * re.value() / Td) / (Td - 1);
  const double var_im = (im2.value() - im.value() * im.value() / Td) / (Td - 1);
  // For normal data Var(s^2) = 2 sigma^4 / (T-1).
  const double se = std::sqrt(2.0 * 0.25 / (Td - 1));
  EXPECT_NEAR(var_re, 0.5, 3 * se);
  EXPECT_NEAR(var_im, 0.5, 3 * se);
}

TEST(CountLaw, MeanAndAtomAtZero) {
  const auto law = count_law(0.5);
  EXPECT_NEAR(law.mean(), 1.0 / 3.0, 1e-8);
  // Sum of the truncated means (1 - 4^-K)/3 reproduced to rounding.
  const double K = static_cast<double>(law.means.size());
  EXPECT_NEAR(law.mean(), (1.0 - std::pow(4.0, -K)) / 3.0, 1e-15);
  double p0 = 1.0;
  for (int k = 1; k <= 60; ++k) p0 *= 1.0 - std::pow(4.0, -k);
  EXPECT_NEAR(law.pmf[0], p0, 1e-8);
}

TEST(CountLaw, Invariants) {
  for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto law = count_law(rho);
    double total = 0.0;
    for (double p : law.pmf) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t k = 1; k < law.means.size(); ++k) EXPECT_LT(law.means[k], law.means[k - 1]);
    const double tail = law.means.back() * rho * rho / (1 - rho * rho);
    EXPECT_LT(tail, law.tail_tol);
    EXPECT_NEAR(law.mean(), rho * rho / (1 - rho * rho), law.tail_tol + 1e-12);
  }
}

TEST(CountLaw, SmallRhoIsPointMass) {
  const auto law = count_law(1e-6);
  EXPECT_NEAR(law.pmf[0], 1.0, 1e-11);
  EXPECT_THROW(count_law(0.0), DomainError);
  EXPECT_THROW(count_law(1.0), DomainError);
}

TEST(CountLaw, MatchesEnumeration) {
  for (double rho : {0.3, 0.5, 0.7}) {
    for (double tol : {1e-2, 1e-4, 1e-8}) {
      const auto law = count_law(rho, tol);
      if (law.means.size() > 16) continue;
      const auto brute = enumerate_pmf(law.means);
      ASSERT_EQ(brute.size(), law.pmf.size());
      for (std::size_t j = 0; j < brute.size(); ++j) EXPECT_NEAR(law.pmf[j], brute[j], 1e-12);
    }
  }
}

TEST(Gaf, TruncationDegree) {
  EXPECT_EQ(gaf_truncation_degree(0.5, 1e-8), 27u);
  for (double rho : {0.2, 0.5, 0.8}) {
    const std::size_t M = gaf_truncation_degree(rho, 1e-8);
    EXPECT_LT(std::pow(rho, M + 1) / (1 - rho), 1e-8);
    if (M > 0) {
      EXPECT_GE(std::pow(rho, M) / (1 - rho), 1e-8);
    }
  }
}

TEST(Gaf, DeterministicAndInsideBall) {
  const auto a = sample_gaf_zeros(0.5, 1e-8, 77);
  const auto b = sample_gaf_zeros(0.5, 1e-8, 77);
  EXPECT_EQ(a.zeros_in_B_rho, b.zeros_in_B_rho);
  EXPECT_EQ(a.coefficients.size(), a.M + 1);
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    for (const cplx& z : sample_gaf_zeros(0.7, 1e-8, seed).zeros_in_B_rho)
      EXPECT_LT(std::abs(z), 0.7);
}

TEST(Gaf, ConjugateCoefficientsConjugateZeros) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = sample_gaf_zeros(0.8, 1e-8, seed);
    std::vector<cplx> c = g.coefficients;
    for (auto& x : c) x = std::conj(x);
    const auto h = gaf_zeros_from_coefficients(c, 0.8);
    ASSERT_EQ(g.zeros_in_B_rho.size(), h.zeros_in_B_rho.size());
    for (const cplx& z : g.zeros_in_B_rho) {
      double best = INFINITY;
      for (const cplx& w : h.zeros_in_B_rho) best = std::min(best, std::abs(std::conj(z) - w));
      EXPECT_LT(best, 1e-12);
    }
  }
}

TEST(Gaf, MeanCountNearOneThird) {
  CompensatedSum sum, sq;
  const std::size_t T = 600;
  for (std::size_t t = 0; t < T; ++t) {
    const double k = static_cast<double>(sample_gaf_zeros(0.5, 1e-8, split_seed(4, 0, t)).zeros_in_B_rho.size());
    sum.add(k);
    sq.add(k * k);
  }
  const double mean = sum.value() / T;
  const double se = std::sqrt((sq.value() / T - mean * mean) / T);
  EXPECT_NEAR(mean, 1.0 / 3.0, 3 * se);
}

TEST(Gaf, EqualCountEdges) {
  const auto e = gaf_equal_count_edges(0.5, 10);
  ASSERT_EQ(e.size(), 11u);
  const double total = gaf_expected_count(0.0, 0.5);
  EXPECT_NEAR(total, 1.0 / 3.0, 1e-15);
  for (std::size_t i = 0; i + 1 < e.size(); ++i)
    EXPECT_NEAR(gaf_expected_count(e[i], e[i + 1]), total / 10, 1e-14);
}

TEST(CircleTrial, DegreeAndModulusBound) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = circle_trial(60, 0.5, seed);
    EXPECT_EQ(t.critical_points, 59u);
    std::size_t total = 0;
    for (auto c : t.modulus_histogram) total += c;
    EXPECT_EQ(total, 59u);
    EXPECT_LE(t.N_rho, 59u);
    EXPECT_EQ(t.coefficients.entries.size(), 4u);
  }
  const auto s = sample_roots(UniformCircle{1.0}, 80, 9);
  const auto cps = critical_points(RootPolynomial(s.roots));
  for (std::size_t i = 0; i < cps.size(); ++i)
    EXPECT_LE(std::abs(cps.points[i]), 1.0 + cps.uncertainty[i] + 1e-15);
}

TEST(CircleTrial, CriticalPointsDriftToTheCircle) {
  std::vector<double> medians;
  for (std::size_t n : {50u, 100u, 200u, 300u}) {
    std::vector<double> f;
    for (std::size_t t = 0; t < 50; ++t) f.push_back(circle_trial(n, 0.5, split_seed(21, n, t)).fraction_above_09);
    medians.push_back(median(f));
  }
  for (std::size_t i = 1; i < medians.size(); ++i) EXPECT_GT(medians[i], medians[i - 1]);
}
