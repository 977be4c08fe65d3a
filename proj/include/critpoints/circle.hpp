#pragma once

// Roots on the unit circle: normalised power sums, the Bernoulli-sum law of
// the number of critical points near the origin, and the Gaussian analytic
// function that describes them in the limit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "critpoints/errors.hpp"
#include "critpoints/measures.hpp"
#include "critpoints/polyroots.hpp"
#include "critpoints/precision.hpp"
#include "critpoints/rng.hpp"

namespace critpoints {

inline constexpr double kDefaultTailTol = 1e-8;

struct CoefficientVector {
  /// a_{n,0..k}
  std::vector<cplx> entries;
  std::size_t n = 0;
  std::size_t k = 0;
};

/// a_{nr} = n^{-1/2} sum_j X_j^{-r-1} for r = 0..k.
///
/// Each power is exp(-i (r+1) theta_j) from the root's angle, so every summand
/// has modulus one to rounding; the sums are compensated.
inline CoefficientVector power_sum_coefficients(std::span<const cplx> roots, std::size_t k,
                                                double circle_tol = 1e-9) {
  if (roots.empty()) throw DomainError("power_sum_coefficients: no roots");
  std::vector<double> theta;
  theta.reserve(roots.size());
  for (const cplx& x : roots) {
    if (!finite(x) || std::abs(std::abs(x) - 1.0) > circle_tol)
      throw DomainError("power_sum_coefficients: root off the unit circle");
    theta.push_back(std::arg(x));
  }
  CoefficientVector out;
  out.n = roots.size();
  out.k = k;
  const double norm = 1.0 / std::sqrt(static_cast<double>(roots.size()));
  for (std::size_t r = 0; r <= k; ++r) {
    CompensatedComplexSum s;
    const double m = -static_cast<double>(r + 1);
    for (double t : theta) {
      const double a = std::remainder(m * t, 2.0 * std::numbers::pi);
      s.add({std::cos(a), std::sin(a)});
    }
    out.entries.push_back(s.value() * norm);
  }
  return out;
}

inline CoefficientVector power_sum_coefficients(const RootSample& sample, std::size_t k) {
  return power_sum_coefficients(std::span<const cplx>(sample.roots), k);
}

struct CountLaw {
  double rho = 0.0;
  double tail_tol = 0.0;
  /// rho^{2k} for k = 1..K
  std::vector<double> means;
  /// P(N = j) for j = 0..K
  std::vector<double> pmf;

  double mean() const {
    CompensatedSum s;
    for (std::size_t j = 0; j < pmf.size(); ++j) s.add(static_cast<double>(j) * pmf[j]);
    return s.value();
  }
};

/// Law of a sum of independent Bernoulli(rho^{2k}), k >= 1, truncated at the
/// smallest K with rho^{2(K+1)} / (1 - rho^2) < tail_tol.
inline CountLaw count_law(double rho, double tail_tol = kDefaultTailTol) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("count_law: rho must lie in (0, 1)");
  if (!(tail_tol > 0.0)) throw DomainError("count_law: tail_tol must be positive");
  CountLaw law;
  law.rho = rho;
  law.tail_tol = tail_tol;
  const double r2 = rho * rho;
  double next = r2;  // rho^{2(K+1)} for the current K
  while (!(next / (1.0 - r2) < tail_tol)) {
    law.means.push_back(next);
    next *= r2;
  }
  law.pmf.assign(1, 1.0);
  for (double p : law.means) {
    std::vector<double> nxt(law.pmf.size() + 1, 0.0);
    for (std::size_t j = 0; j < law.pmf.size(); ++j) {
      nxt[j] += law.pmf[j] * (1.0 - p);
      nxt[j + 1] += law.pmf[j] * p;
    }
    law.pmf = std::move(nxt);
  }
  return law;
}

struct GafSample {
  /// Y_0..Y_M
  std::vector<cplx> coefficients;
  std::vector<cplx> zeros_in_B_rho;
  /// Parallel to zeros_in_B_rho: within tail-influence distance of |z| = rho.
  std::vector<bool> near_boundary;
  double rho = 0.0;
  std::size_t M = 0;
};

/// Smallest M with rho^{M+1} / (1 - rho) < tail_tol.
inline std::size_t gaf_truncation_degree(double rho, double tail_tol) {
  std::size_t M = 0;
  double t = rho;
  while (!(t / (1.0 - rho) < tail_tol)) {
    t *= rho;
    ++M;
  }
  return M;
}

/// Zeros in |z| < rho of the truncated series sum_{j<=M} Y_j z^j.
inline GafSample gaf_zeros_from_coefficients(std::vector<cplx> coeffs, double rho,
                                             double tail_tol = kDefaultTailTol,
                                             mpfr_prec_t bits = kDefaultPrecisionBits) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("gaf: rho must lie in (0, 1)");
  GafSample g;
  g.rho = rho;
  g.M = coeffs.empty() ? 0 : coeffs.size() - 1;
  g.coefficients = std::move(coeffs);
  const CertifiedZeros z = polynomial_zeros(g.coefficients, bits);
  for (const cplx& a : z.points) {
    if (!(std::abs(a) < rho)) continue;
    cplx dp{0.0, 0.0}, p = g.coefficients.back();
    for (std::size_t k = g.coefficients.size() - 1; k-- > 0;) {
      dp = dp * a + p;
      p = p * a + g.coefficients[k];
    }
    // The discarded tail is below tail_tol on B_rho; it moves a simple zero by
    // about tail_tol / |p'|.
    const double reach = tail_tol / std::max(std::abs(dp), 1e-300);
    g.zeros_in_B_rho.push_back(a);
    g.near_boundary.push_back(rho - std::abs(a) <= reach);
  }
  return g;
}

/// Y_j standard complex normal: real and imaginary parts independent with
/// variance 1/2 each.
inline GafSample sample_gaf_zeros(double rho, double tail_tol, std::uint64_t seed,
                                  mpfr_prec_t bits = kDefaultPrecisionBits) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("sample_gaf_zeros: rho must lie in (0, 1)");
  if (!(tail_tol > 0.0)) throw DomainError("sample_gaf_zeros: tail_tol must be positive");
  const std::size_t M = gaf_truncation_degree(rho, tail_tol);
  Rng rng(seed);
  std::vector<cplx> y(M + 1);
  for (auto& c : y) {
    const double re = rng.normal();
    const double im = rng.normal();
    c = cplx(re, im) * std::numbers::sqrt2 * 0.5;
  }
  return gaf_zeros_from_coefficients(std::move(y), rho, tail_tol, bits);
}

/// Expected number of zeros in r_lo <= |z| < r_hi under the one-point
/// intensity pi^{-1}(1 - |z|^2)^{-2}: (1-r_hi^2)^{-1} - (1-r_lo^2)^{-1}.
inline double gaf_expected_count(double r_lo, double r_hi) {
  return 1.0 / (1.0 - r_hi * r_hi) - 1.0 / (1.0 - r_lo * r_lo);
}

/// Radii splitting [0, rho) into `bins` annuli of equal expected count.
inline std::vector<double> gaf_equal_count_edges(double rho, std::size_t bins) {
  const double total = gaf_expected_count(0.0, rho);
  std::vector<double> edges{0.0};
  for (std::size_t b = 1; b < bins; ++b) {
    const double c = total * static_cast<double>(b) / static_cast<double>(bins);
    edges.push_back(std::sqrt(1.0 - 1.0 / (1.0 + c)));
  }
  edges.push_back(rho);
  return edges;
}

inline constexpr std::size_t kModulusBins = 20;

struct CircleTrial {
  std::size_t n = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::size_t critical_points = 0;
  std::size_t N_rho = 0;
  CoefficientVector coefficients;
  /// Counts of |critical point| in [i/20, (i+1)/20), last bin closed.
  std::vector<std::size_t> modulus_histogram;
  double fraction_above_09 = 0.0;
  mpfr_prec_t precision_used = 0;
};

/// One circle trial: n uniform roots on the unit circle, their critical
/// points, the count in B_rho and the first k+1 power-sum coefficients.
inline CircleTrial circle_trial(std::size_t n, double rho, std::uint64_t seed, std::size_t k = 3,
                                mpfr_prec_t bits = kDefaultPrecisionBits) {
  if (n < 2) throw DomainError("circle_trial: n must be at least 2");
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("circle_trial: rho must lie in (0, 1)");
  const RootSample s = sample_roots(UniformCircle{1.0}, n, seed);
  const CriticalPointSet cps = critical_points(RootPolynomial(s.roots, bits));
  CircleTrial t;
  t.n = n;
  t.rho = rho;
  t.seed = seed;
  t.critical_points = cps.size();
  t.N_rho = rouche_ball_count(cps, {0.0, 0.0}, rho);
  t.coefficients = power_sum_coefficients(s.roots, k);
  t.modulus_histogram.assign(kModulusBins, 0);
  std::size_t above = 0;
  for (const cplx& a : cps.points) {
    const double m = std::abs(a);
    const auto bin = std::min<std::size_t>(kModulusBins - 1,
                                           static_cast<std::size_t>(m * kModulusBins));
    ++t.modulus_histogram[bin];
    if (m > 0.9) ++above;
  }
  t.fraction_above_09 = static_cast<double>(above) / static_cast<double>(cps.size());
  t.precision_used = cps.precision_bits;
  return t;
}

}  // namespace critpoints
