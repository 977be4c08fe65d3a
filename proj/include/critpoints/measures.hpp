#pragma once

// Root distributions: declarative specs, samplers, Cauchy transforms,
// truncated potentials and Monte Carlo 1-energy estimates.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "critpoints/errors.hpp"
#include "critpoints/precision.hpp"
#include "critpoints/rng.hpp"

namespace critpoints {

struct UniformCircle {
  double radius = 1.0;
};
struct UniformDisk {
  double radius = 1.0;
};
struct UniformSegment {
  cplx a{0.0, 0.0};
  cplx b{1.0, 0.0};
};
struct Atom {
  cplx location;
  double weight;
};
struct Atomic {
  std::vector<Atom> atoms;
};
struct UniformAnnulus {
  double r_inner = 0.5;
  double r_outer = 1.0;
};
/// mean + scale * Y with Y standard complex normal (Re, Im each variance 1/2).
struct ComplexGaussian {
  cplx mean{0.0, 0.0};
  double scale = 1.0;
};

using MeasureSpec = std::variant<UniformCircle, UniformDisk, UniformSegment, Atomic,
                                 UniformAnnulus, ComplexGaussian>;

inline std::string kind_name(const MeasureSpec& spec) {
  static constexpr const char* names[] = {"uniform_circle", "uniform_disk",    "uniform_segment",
                                          "atomic",         "uniform_annulus", "complex_gaussian"};
  return names[spec.index()];
}

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace detail

/// Throws ConfigError when the spec violates its invariants.
inline void validate(const MeasureSpec& spec) {
  std::visit(
      detail::overloaded{
          [](const UniformCircle& m) {
            if (!(m.radius > 0.0) || !std::isfinite(m.radius))
              throw ConfigError("uniform_circle: radius must be positive and finite");
          },
          [](const UniformDisk& m) {
            if (!(m.radius > 0.0) || !std::isfinite(m.radius))
              throw ConfigError("uniform_disk: radius must be positive and finite");
          },
          [](const UniformSegment& m) {
            if (!finite(m.a) || !finite(m.b))
              throw ConfigError("uniform_segment: endpoints must be finite");
            if (m.a == m.b) throw ConfigError("uniform_segment: endpoints must be distinct");
          },
          [](const Atomic& m) {
            if (m.atoms.empty()) throw ConfigError("atomic: at least one atom required");
            double total = 0.0;
            for (const auto& a : m.atoms) {
              if (!(a.weight > 0.0)) throw ConfigError("atomic: weights must be strictly positive");
              if (!finite(a.location)) throw ConfigError("atomic: atom must be finite");
              total += a.weight;
            }
            if (std::abs(total - 1.0) > 1e-12) {
              std::ostringstream os;
              os.precision(17);
              os << "atomic: weights sum to " << total << ", expected 1";
              throw ConfigError(os.str());
            }
          },
          [](const UniformAnnulus& m) {
            if (!(m.r_inner >= 0.0) || !(m.r_outer > m.r_inner) || !std::isfinite(m.r_outer))
              throw ConfigError("uniform_annulus: need 0 <= r_inner < r_outer");
          },
          [](const ComplexGaussian& m) {
            if (!(m.scale > 0.0) || !std::isfinite(m.scale) || !finite(m.mean))
              throw ConfigError("complex_gaussian: scale must be positive and finite");
          },
      },
      spec);
}

struct RootSample {
  std::vector<cplx> roots;
  std::uint64_t seed = 0;
  MeasureSpec spec;
};

/// One draw from `spec`, advancing `rng`. The spec must already be valid.
inline cplx draw(const MeasureSpec& spec, Rng& rng) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return std::visit(
      detail::overloaded{
          [&](const UniformCircle& m) {
            const double t = two_pi * rng.uniform();
            return cplx(m.radius * std::cos(t), m.radius * std::sin(t));
          },
          [&](const UniformDisk& m) {
            const double r = m.radius * std::sqrt(rng.uniform());
            const double t = two_pi * rng.uniform();
            return cplx(r * std::cos(t), r * std::sin(t));
          },
          [&](const UniformSegment& m) { return m.a + rng.uniform() * (m.b - m.a); },
          [&](const Atomic& m) {
            const double u = rng.uniform();
            double acc = 0.0;
            for (const auto& a : m.atoms) {
              acc += a.weight;
              if (u < acc) return a.location;
            }
            return m.atoms.back().location;
          },
          [&](const UniformAnnulus& m) {
            // Inverse CDF on r^2.
            const double lo = m.r_inner * m.r_inner;
            const double hi = m.r_outer * m.r_outer;
            const double r = std::sqrt(lo + rng.uniform() * (hi - lo));
            const double t = two_pi * rng.uniform();
            return cplx(r * std::cos(t), r * std::sin(t));
          },
          [&](const ComplexGaussian& m) {
            const double x = rng.normal();
            const double y = rng.normal();
            return m.mean + m.scale * std::numbers::sqrt2 / 2.0 * cplx(x, y);
          },
      },
      spec);
}

/// n IID draws from spec; bit-identical for identical (spec, n, seed).
inline RootSample sample_roots(const MeasureSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n < 1) throw DomainError("sample_roots: n must be at least 1");
  RootSample out{{}, seed, spec};
  out.roots.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) out.roots.push_back(draw(spec, rng));
  return out;
}

/// Cauchy transform V(z) = integral of 1/(z - w) dmu(w).
///
/// Every supported kind has a closed form. On the support of a circle or
/// segment the integral does not converge and NaN is returned; on an atom a
/// SingularityError is thrown.
inline cplx potential(const MeasureSpec& spec, cplx z) {
  validate(spec);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return std::visit(
      detail::overloaded{
          [&](const UniformCircle& m) -> cplx {
            const double r = std::abs(z);
            if (r < m.radius) return {0.0, 0.0};
            if (r > m.radius) return 1.0 / z;
            return {nan, nan};
          },
          [&](const UniformDisk& m) -> cplx {
            const double r = std::abs(z);
            if (r <= m.radius) return std::conj(z) / (m.radius * m.radius);
            return 1.0 / z;
          },
          [&](const UniformSegment& m) -> cplx {
            const cplx ratio = (z - m.a) / (z - m.b);
            // The ratio is a nonpositive real exactly on the closed segment.
            if (ratio.imag() == 0.0 && ratio.real() <= 0.0) return {nan, nan};
            if (!finite(ratio)) return {nan, nan};
            return std::log(ratio) / (m.b - m.a);
          },
          [&](const Atomic& m) -> cplx {
            cplx acc{0.0, 0.0};
            for (std::size_t i = 0; i < m.atoms.size(); ++i) {
              const auto& a = m.atoms[i];
              if (a.location == z)
                throw SingularityError("potential: evaluation point is atom " + std::to_string(i));
              acc += a.weight / (z - a.location);
            }
            return acc;
          },
          [&](const UniformAnnulus& m) -> cplx {
            const double r = std::abs(z);
            if (r <= m.r_inner) return {0.0, 0.0};
            if (r >= m.r_outer) return 1.0 / z;
            const double lo = m.r_inner * m.r_inner;
            const double hi = m.r_outer * m.r_outer;
            return ((r * r - lo) / (hi - lo)) / z;
          },
          [&](const ComplexGaussian& m) -> cplx {
            // Rotational symmetry about the mean: V(z) = P(|W - mean| <= |u|) / u.
            const cplx u = z - m.mean;
            const double r2 = std::norm(u);
            if (r2 == 0.0) return {0.0, 0.0};
            return -std::expm1(-r2 / (m.scale * m.scale)) / u;
          },
      },
      spec);
}

/// The truncated kernel phi(w) = (1/(z-w)) * |z-w| / max(|z-w|, 1/K).
///
/// At w == z the kernel is defined as K (real, positive direction).
inline cplx truncated_kernel(cplx z, cplx w, double K) {
  const cplx d = z - w;
  const double r = std::abs(d);
  if (r == 0.0) return {K, 0.0};
  const double cap = 1.0 / K;
  if (r >= cap) return 1.0 / d;
  return (std::conj(d) / r) * K;
}

namespace detail {

inline constexpr double kQuadTol = 1e-10;
// Inner (angular) integrals must be resolved well below the outer goal or the
// outer adaptive rule chases their noise.
inline constexpr double kInnerQuadTol = 1e-13;
inline constexpr std::size_t kQuadMaxPanels = 2000;

using GK21 = boost::math::quadrature::gauss_kronrod<double, 21>;

struct QuadPanel {
  double a, b;
  cplx value;
  double err;
  bool operator<(const QuadPanel& o) const { return err < o.err; }
};

template <class F>
QuadPanel quad_panel(F& f, double a, double b, double* L1 = nullptr) {
  double err = 0.0;
  const cplx v = GK21::integrate(f, a, b, 0, 0.0, &err, L1);
  // With max_depth 0 Boost reports the error of the rule on [-1, 1], not
  // rescaled to [a, b].
  return {a, b, v, err * 0.5 * (b - a)};
}

// Globally adaptive: always split the panel with the largest error estimate
// until the summed estimate meets the goal. The goal is relative to the L1
// norm of the integrand (or an absolute floor) rather than to the result,
// since integrands that cancel to zero by symmetry would never converge, and
// a global rule tolerates the log-type endpoint singularities that defeat
// per-panel bisection.
template <class F>
cplx integrate_split(F&& f, double a, double b, std::vector<double> cuts, double abs_floor = 0.0,
                     double rel_tol = kQuadTol) {
  if (!(b > a)) return {0.0, 0.0};
  cuts.push_back(a);
  cuts.push_back(b);
  for (double& c : cuts) c = std::clamp(c, a, b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<QuadPanel> heap;
  double L1 = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double l1 = 0.0;
    const QuadPanel p = quad_panel(f, cuts[i], cuts[i + 1], &l1);
    heap.push(p);
    L1 += l1;
    err += p.err;
  }
  const double goal = std::max(rel_tol * L1, abs_floor);
  while (err > goal && heap.size() < kQuadMaxPanels) {
    const QuadPanel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    heap.pop();
    const QuadPanel lo = quad_panel(f, worst.a, mid), hi = quad_panel(f, mid, worst.b);
    err += lo.err + hi.err - worst.err;
    heap.push(lo);
    heap.push(hi);
  }
  cplx acc{0.0, 0.0};
  for (; !heap.empty(); heap.pop()) acc += heap.top().value;
  return acc;
}

template <class F>
cplx integrate(F&& f, double a, double b) {
  return integrate_split(f, a, b, {});
}

inline cplx checked_kernel(cplx z, cplx w, double K) {
  const cplx v = truncated_kernel(z, w, K);
  if (std::abs(v) > K * (1.0 + 1e-12))
    throw std::logic_error("truncated kernel exceeded its cap");
  return v;
}

/// Average of the truncated kernel over the circle |w - center| = r.
inline cplx circle_average(cplx z, cplx center, double r, double K) {
  if (r == 0.0) return checked_kernel(z, center, K);
  const cplx u = z - center;
  const double dist = std::abs(u);
  const double theta0 = dist > 0.0 ? std::arg(u) : 0.0;
  auto f = [&](double t) {
    return checked_kernel(z, center + std::polar(r, theta0 + t), K) / (2.0 * std::numbers::pi);
  };
  std::vector<double> cuts;
  if (dist > 0.0) {
    const double c = (dist * dist + r * r - 1.0 / (K * K)) / (2.0 * r * dist);
    if (c > -1.0 && c < 1.0) {
      const double t = std::acos(c);
      cuts = {t, 2.0 * std::numbers::pi - t};
    }
  }
  return integrate_split(f, 0.0, 2.0 * std::numbers::pi, cuts, 0.0, kInnerQuadTol);
}

/// Integral over rings [r_lo, r_hi] about `center` with radial density `dens`.
template <class Density>
cplx radial_integral(cplx z, cplx center, double r_lo, double r_hi, double K, Density dens) {
  const double dist = std::abs(z - center);
  std::vector<double> cuts = {dist, dist - 1.0 / K, dist + 1.0 / K};
  auto f = [&](double r) { return dens(r) * circle_average(z, center, r, K); };
  // The inner averages cancel to roundoff near the center, so the outer
  // integrand's own L1 norm is no guide; use mass / outer radius instead.
  double mass_err = 0.0;
  const double mass = GK21::integrate([&](double r) { return dens(r); }, r_lo, r_hi, 8, 1e-6, &mass_err);
  const double floor = kQuadTol * mass / std::max(r_hi, dist);
  return integrate_split(f, r_lo, r_hi, cuts, floor);
}

}  // namespace detail

/// Integral of the truncated kernel against mu; |integrand| <= K throughout.
inline cplx truncated_potential(const MeasureSpec& spec, cplx z, double K) {
  validate(spec);
  if (!(K > 0.0)) throw DomainError("truncated_potential: K must be positive");
  return std::visit(
      detail::overloaded{
          [&](const UniformCircle& m) { return detail::circle_average(z, 0.0, m.radius, K); },
          [&](const UniformDisk& m) {
            const double area = m.radius * m.radius;
            return detail::radial_integral(z, 0.0, 0.0, m.radius, K,
                                           [&](double r) { return 2.0 * r / area; });
          },
          [&](const UniformSegment& m) {
            const cplx dir = m.b - m.a;
            auto f = [&](double t) { return detail::checked_kernel(z, m.a + t * dir, K); };
            // Kinks where |z - w| = 1/K and at the foot of the perpendicular.
            const double len2 = std::norm(dir);
            const double t0 = std::real((z - m.a) * std::conj(dir)) / len2;
            const double perp2 = std::norm(z - (m.a + t0 * dir));
            std::vector<double> cuts = {t0};
            const double h2 = 1.0 / (K * K) - perp2;
            if (h2 > 0.0) {
              const double dt = std::sqrt(h2 / len2);
              cuts.push_back(t0 - dt);
              cuts.push_back(t0 + dt);
            }
            return detail::integrate_split(f, 0.0, 1.0, cuts);
          },
          [&](const Atomic& m) {
            cplx acc{0.0, 0.0};
            for (const auto& a : m.atoms) acc += a.weight * detail::checked_kernel(z, a.location, K);
            return acc;
          },
          [&](const UniformAnnulus& m) {
            const double area = m.r_outer * m.r_outer - m.r_inner * m.r_inner;
            return detail::radial_integral(z, 0.0, m.r_inner, m.r_outer, K,
                                           [&](double r) { return 2.0 * r / area; });
          },
          [&](const ComplexGaussian& m) {
            const double s2 = m.scale * m.scale;
            // exp(-r^2/s^2) < 1e-17 beyond this radius.
            const double r_max = m.scale * std::sqrt(40.0);
            return detail::radial_integral(z, m.mean, 0.0, r_max, K, [&](double r) {
              return 2.0 * r / s2 * std::exp(-r * r / s2);
            });
          },
      },
      spec);
}

struct EnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t pairs_used = 0;
  bool infinite = false;
  /// Hill estimate of the tail index of 1/|Z - W|; 0 when a pair coincided.
  double tail_index = 0.0;
};

/// Monte Carlo estimate of the 1-energy E|Z - W|^{-1} over IID pairs.
///
/// The infinite flag is raised when some pair coincides exactly, or when the
/// Hill estimate of the tail index of 1/|Z - W| over the largest
/// kTailCount values is below 1.5. Finite 1-energy for the supported families
/// goes with index 2 (two-dimensional support); curves and segments give
/// index 1, which is exactly the borderline divergent case.
inline EnergyEstimate energy_estimate(const MeasureSpec& spec, std::size_t pairs,
                                      std::uint64_t seed) {
  validate(spec);
  if (pairs < 100) throw DomainError("energy_estimate: at least 100 pairs required");
  constexpr std::size_t kTailCount = 200;
  constexpr double kIndexThreshold = 1.5;
  const std::size_t k = std::min(kTailCount, pairs / 20);

  Rng rng(seed);
  EnergyEstimate est;
  CompensatedSum sum;
  CompensatedSum sum_sq;
  // Min-heap of the k+1 largest values.
  std::priority_queue<double, std::vector<double>, std::greater<>> top;
  for (std::size_t i = 1; i <= pairs; ++i) {
    const cplx z = draw(spec, rng);
    const cplx w = draw(spec, rng);
    const double d = std::abs(z - w);
    est.pairs_used = i;
    if (d == 0.0) {
      est.infinite = true;
      break;
    }
    const double x = 1.0 / d;
    sum.add(x);
    sum_sq.add(x * x);
    if (top.size() <= k) {
      top.push(x);
    } else if (x > top.top()) {
      top.pop();
      top.push(x);
    }
  }
  if (!est.infinite) {
    const double floor = top.top();
    top.pop();
    double log_excess = 0.0;
    const double count = static_cast<double>(top.size());
    for (; !top.empty(); top.pop()) log_excess += std::log(top.top() / floor);
    est.tail_index = log_excess > 0.0 ? count / log_excess : std::numeric_limits<double>::infinity();
    est.infinite = est.tail_index < kIndexThreshold;
  }
  if (est.infinite) {
    est.value = std::numeric_limits<double>::infinity();
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  const double n = static_cast<double>(est.pairs_used);
  est.value = sum.value() / n;
  const double var = std::max(0.0, (sum_sq.value() - n * est.value * est.value) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace critpoints
