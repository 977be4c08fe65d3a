#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "critpoints/measures.hpp"

using namespace critpoints;
using boost::math::quadrature::gauss_kronrod;

namespace {

std::vector<MeasureSpec> all_specs() {
  return {UniformCircle{1.0},
          UniformDisk{1.5},
          UniformSegment{{-1.0, 0.5}, {2.0, -0.5}},
          Atomic{{{{1.0, 0.0}, 0.25}, {{-1.0, 0.5}, 0.5}, {{0.0, -2.0}, 0.25}}},
          UniformAnnulus{0.5, 1.0},
          ComplexGaussian{{0.5, -0.5}, 0.8}};
}

// Cauchy transform of the unit circle by quadrature over the angle.
cplx circle_oracle(cplx z) {
  auto re = [&](double t) { return std::real(1.0 / (z - std::polar(1.0, t))); };
  auto im = [&](double t) { return std::imag(1.0 / (z - std::polar(1.0, t))); };
  const double pi2 = 2.0 * std::numbers::pi;
  return cplx(gauss_kronrod<double, 61>::integrate(re, 0.0, pi2, 15, 1e-13),
              gauss_kronrod<double, 61>::integrate(im, 0.0, pi2, 15, 1e-13)) /
         pi2;
}

// Unit-disk transform in polar coordinates about z: the radial integral of
// 1/(z - w) rho drho is -e^{-i phi} R(phi), R the distance to the boundary.
cplx disk_oracle(cplx z) {
  auto R = [&](double phi) {
    const double b = std::real(std::conj(z) * std::polar(1.0, phi));
    return -b + std::sqrt(b * b + 1.0 - std::norm(z));
  };
  auto re = [&](double p) { return -std::cos(p) * R(p); };
  auto im = [&](double p) { return std::sin(p) * R(p); };
  const double pi2 = 2.0 * std::numbers::pi;
  return cplx(gauss_kronrod<double, 61>::integrate(re, 0.0, pi2, 15, 1e-13),
              gauss_kronrod<double, 61>::integrate(im, 0.0, pi2, 15, 1e-13)) /
         std::numbers::pi;
}

bool on_support(const MeasureSpec& s, cplx z, double margin) {
  if (auto c = std::get_if<UniformCircle>(&s)) return std::abs(std::abs(z) - c->radius) < margin;
  if (auto d = std::get_if<UniformDisk>(&s)) return std::abs(z) < d->radius + margin;
  if (auto a = std::get_if<UniformAnnulus>(&s))
    return std::abs(z) > a->r_inner - margin && std::abs(z) < a->r_outer + margin;
  if (auto g = std::get_if<UniformSegment>(&s)) {
    const cplx d = g->b - g->a;
    const double t = std::clamp(std::real((z - g->a) * std::conj(d)) / std::norm(d), 0.0, 1.0);
    return std::abs(z - (g->a + t * d)) < margin;
  }
  if (auto at = std::get_if<Atomic>(&s)) {
    for (const auto& x : at->atoms)
      if (std::abs(z - x.location) < margin) return true;
    return false;
  }
  return false;  // Gaussian: full support, every point is fair game
}

}  // namespace

TEST(SampleRoots, SingleAtomGivesAllZeros) {
  const auto s = sample_roots(Atomic{{{{0.0, 0.0}, 1.0}}}, 5, 12345);
  ASSERT_EQ(s.roots.size(), 5u);
  for (const cplx& x : s.roots) EXPECT_EQ(x, cplx(0.0, 0.0));
}

TEST(SampleRoots, CircleMeanWithinCltBound) {
  const std::size_t n = 10000;
  const auto s = sample_roots(UniformCircle{1.0}, n, 77);
  cplx mean{0.0, 0.0};
  for (const cplx& x : s.roots) {
    mean += x;
    EXPECT_NEAR(std::abs(x), 1.0, 4 * std::numeric_limits<double>::epsilon());
  }
  mean /= static_cast<double>(n);
  const double bound = 3.0 / std::sqrt(2.0 * n);
  EXPECT_LT(std::abs(mean.real()), bound);
  EXPECT_LT(std::abs(mean.imag()), bound);
}

TEST(SampleRoots, SegmentInUnitIntervalAndReproducible) {
  const auto a = sample_roots(UniformSegment{{0.0, 0.0}, {1.0, 0.0}}, 3, 99);
  const auto b = sample_roots(UniformSegment{{0.0, 0.0}, {1.0, 0.0}}, 3, 99);
  for (const cplx& x : a.roots) {
    EXPECT_GE(x.real(), 0.0);
    EXPECT_LE(x.real(), 1.0);
    EXPECT_EQ(x.imag(), 0.0);
  }
  EXPECT_EQ(a.roots, b.roots);
}

TEST(SampleRoots, DeterministicForEverySpec) {
  for (const auto& spec : all_specs()) {
    const auto a = sample_roots(spec, 200, 2024);
    const auto b = sample_roots(spec, 200, 2024);
    const auto c = sample_roots(spec, 200, 2025);
    EXPECT_EQ(a.roots, b.roots) << kind_name(spec);
    EXPECT_NE(a.roots, c.roots) << kind_name(spec);
  }
}

TEST(SampleRoots, InvalidSpecsAreConfigErrors) {
  EXPECT_THROW(sample_roots(Atomic{{{{0.0, 0.0}, 0.4}}}, 3, 1), ConfigError);
  EXPECT_THROW(sample_roots(Atomic{{{{0.0, 0.0}, 1.0}, {{1.0, 0.0}, 0.0}}}, 3, 1), ConfigError);
  EXPECT_THROW(sample_roots(UniformAnnulus{1.0, 1.0}, 3, 1), ConfigError);
  EXPECT_THROW(sample_roots(UniformSegment{{1.0, 1.0}, {1.0, 1.0}}, 3, 1), ConfigError);
  EXPECT_THROW(sample_roots(UniformDisk{1.0}, 0, 1), DomainError);
}

TEST(Potential, CircleInteriorIsZero) {
  for (cplx z : {cplx(0.0, 0.0), cplx(0.3, -0.2), cplx(-0.9, 0.1)}) {
    EXPECT_EQ(potential(UniformCircle{1.0}, z), cplx(0.0, 0.0));
    EXPECT_LT(std::abs(circle_oracle(z)), 1e-12);
  }
}

TEST(Potential, CircleExteriorIsOneOverZ) {
  const cplx v = potential(UniformCircle{1.0}, 2.0);
  EXPECT_NEAR(v.real(), 0.5, 1e-15);
  EXPECT_EQ(v.imag(), 0.0);
  EXPECT_LT(std::abs(circle_oracle(2.0) - 0.5), 1e-12);
  EXPECT_TRUE(std::isnan(potential(UniformCircle{1.0}, 1.0).real()));
}

TEST(Potential, DiskInteriorIsConjugate) {
  const cplx z(0.3, 0.4);
  const cplx v = potential(UniformDisk{1.0}, z);
  EXPECT_NEAR(v.real(), 0.3, 1e-15);
  EXPECT_NEAR(v.imag(), -0.4, 1e-15);
  EXPECT_LT(std::abs(disk_oracle(z) - cplx(0.3, -0.4)), 1e-10);
}

TEST(Potential, SymmetricAtomsCancel) {
  const Atomic a{{{{1.0, 0.0}, 0.5}, {{-1.0, 0.0}, 0.5}}};
  EXPECT_EQ(potential(a, 0.0), cplx(0.0, 0.0));
  EXPECT_THROW(potential(a, 1.0), SingularityError);
}

TEST(Potential, AgreesWithMonteCarloAwayFromSupport) {
  Rng pick(31);
  for (const auto& spec : all_specs()) {
    const auto s = sample_roots(spec, 100000, 555);
    int tested = 0;
    while (tested < 20) {
      const cplx z(4.0 * pick.uniform() - 2.0, 4.0 * pick.uniform() - 2.0);
      if (on_support(spec, z, 0.2)) continue;
      ++tested;
      CompensatedComplexSum sum;
      CompensatedSum sq_re, sq_im;
      for (const cplx& x : s.roots) {
        const cplx k = 1.0 / (z - x);
        sum.add(k);
        sq_re.add(k.real() * k.real());
        sq_im.add(k.imag() * k.imag());
      }
      const double n = static_cast<double>(s.roots.size());
      const cplx mean = sum.value() / n;
      const double se_re = std::sqrt((sq_re.value() / n - mean.real() * mean.real()) / n);
      const double se_im = std::sqrt((sq_im.value() / n - mean.imag() * mean.imag()) / n);
      const cplx v = potential(spec, z);
      EXPECT_LE(std::abs(v.real() - mean.real()), 5 * se_re + 1e-12) << kind_name(spec) << " " << z;
      EXPECT_LE(std::abs(v.imag() - mean.imag()), 5 * se_im + 1e-12) << kind_name(spec) << " " << z;
    }
  }
}

TEST(TruncatedPotential, ActiveTruncationHasModulusK) {
  const cplx v = truncated_potential(Atomic{{{{0.0, 0.0}, 1.0}}}, 0.0, 5.0);
  EXPECT_DOUBLE_EQ(std::abs(v), 5.0);
  EXPECT_EQ(v, cplx(5.0, 0.0));
}

TEST(TruncatedPotential, InactiveTruncationIsPlainKernel) {
  const cplx v = truncated_potential(Atomic{{{{2.0, 0.0}, 1.0}}}, 0.0, 5.0);
  EXPECT_DOUBLE_EQ(v.real(), -0.5);
  EXPECT_EQ(v.imag(), 0.0);
}

TEST(TruncatedPotential, KernelNeverExceedsK) {
  Rng r(8);
  for (int i = 0; i < 10000; ++i) {
    const cplx z(r.uniform(), r.uniform()), w(r.uniform(), r.uniform());
    const double K = 1.0 + 100.0 * r.uniform();
    EXPECT_LE(std::abs(truncated_kernel(z, w, K)), K * (1 + 1e-15));
  }
}

TEST(TruncatedPotential, DiskOriginTendsToZero) {
  EXPECT_LT(std::abs(truncated_potential(UniformDisk{1.0}, 0.0, 1e6)), 1e-9);
}

TEST(TruncatedPotential, CauchyInKAndConvergesToPotential) {
  const std::vector<std::pair<MeasureSpec, cplx>> cases{
      {UniformDisk{1.0}, {0.3, 0.4}},
      {UniformCircle{1.0}, {0.2, -0.1}},
      {UniformCircle{1.0}, {1.5, 0.5}},
      {UniformSegment{{0.0, 0.0}, {1.0, 0.0}}, {0.5, 0.3}},
      {UniformAnnulus{0.5, 1.0}, {0.7, 0.1}},
      {ComplexGaussian{{0.0, 0.0}, 1.0}, {0.4, 0.2}},
  };
  for (const auto& [spec, z] : cases) {
    cplx prev = truncated_potential(spec, z, 1.0);
    bool settled = false;
    for (double K = 2.0; K <= 0x1p30; K *= 2.0) {
      const cplx cur = truncated_potential(spec, z, K);
      if (std::abs(cur - prev) < 1e-6) {
        settled = true;
        prev = cur;
        break;
      }
      prev = cur;
    }
    EXPECT_TRUE(settled) << kind_name(spec);
    EXPECT_LT(std::abs(prev - potential(spec, z)), 1e-6) << kind_name(spec);
  }
}

TEST(EnergyEstimate, AtomicIsInfinite) {
  EXPECT_TRUE(energy_estimate(Atomic{{{{0.0, 0.0}, 0.5}, {{3.0, 0.0}, 0.5}}}, 1000, 4).infinite);
  for (const auto& spec : all_specs())
    if (std::holds_alternative<Atomic>(spec)) {
      EXPECT_TRUE(energy_estimate(spec, 1000, 9).infinite);
    }
}

TEST(EnergyEstimate, DiskMatchesChordOracleAndIsReproducible) {
  // Distance between two uniform points of the unit disk has density
  // (4r/pi)(acos(r/2) - (r/2) sqrt(1 - r^2/4)) on [0, 2].
  auto dens = [](double r) {
    return 4.0 * r / std::numbers::pi * (std::acos(r / 2) - r / 2 * std::sqrt(1 - r * r / 4));
  };
  const double mass = gauss_kronrod<double, 61>::integrate(dens, 0.0, 2.0, 15, 1e-13);
  const double exact = gauss_kronrod<double, 61>::integrate(
      [&](double r) { return r > 0 ? dens(r) / r : 4.0 / std::numbers::pi * std::acos(0.0); }, 0.0,
      2.0, 15, 1e-13);
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(exact, 16.0 / (3.0 * std::numbers::pi), 1e-12);

  const auto a = energy_estimate(UniformDisk{1.0}, 200000, 1);
  const auto b = energy_estimate(UniformDisk{1.0}, 200000, 2);
  ASSERT_FALSE(a.infinite);
  ASSERT_FALSE(b.infinite);
  EXPECT_GE(a.std_error, 0.0);
  EXPECT_LE(std::abs(a.value - b.value), 3 * std::hypot(a.std_error, b.std_error));
  EXPECT_LE(std::abs(a.value - exact), 4 * a.std_error);
  EXPECT_EQ(a.pairs_used, 200000u);
}

TEST(EnergyEstimate, CircleIsFlaggedInfinite) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = energy_estimate(UniformCircle{1.0}, 100000, seed);
    EXPECT_TRUE(e.infinite) << "seed " << seed << " tail index " << e.tail_index;
  }
  EXPECT_TRUE(energy_estimate(UniformSegment{{0.0, 0.0}, {1.0, 0.0}}, 100000, 3).infinite);
}

TEST(EnergyEstimate, TwoDimensionalSupportsAreFinite) {
  for (const MeasureSpec& spec : {MeasureSpec(UniformDisk{1.0}), MeasureSpec(ComplexGaussian{}),
                                  MeasureSpec(UniformAnnulus{0.9, 1.0})}) {
    const auto e = energy_estimate(spec, 1000000, 17);
    EXPECT_FALSE(e.infinite) << kind_name(spec) << " tail index " << e.tail_index;
  }
  EXPECT_THROW(energy_estimate(UniformDisk{1.0}, 99, 1), DomainError);
}
