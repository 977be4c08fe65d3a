#pragma once

// Checks of classical facts about critical points: Gauss-Lucas, Rolle
// interlacing, Jensen disks, Marden's theorem, and the instability of the
// critical points of z^n - 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "critpoints/errors.hpp"
#include "critpoints/polyroots.hpp"
#include "critpoints/precision.hpp"

namespace critpoints {

namespace detail {

/// Sign of the orientation of (a, b, c), exact for double inputs.
inline int orientation(cplx a, cplx b, cplx c) {
  const double approx = (b.real() - a.real()) * (c.imag() - a.imag()) -
                        (b.imag() - a.imag()) * (c.real() - a.real());
  const double mag = (std::abs(b.real() - a.real()) + std::abs(b.imag() - a.imag())) *
                     (std::abs(c.real() - a.real()) + std::abs(c.imag() - a.imag()));
  if (std::abs(approx) > 1e-14 * mag) return approx > 0 ? 1 : -1;
  // Differences of doubles need 54 bits, products 108: 256 is exact.
  MpReal bx(256), by(256), cx(256), cy(256), l(256), r(256);
  mpfr_set_d(bx.get(), b.real(), kRound);
  mpfr_sub_d(bx.get(), bx.get(), a.real(), kRound);
  mpfr_set_d(by.get(), b.imag(), kRound);
  mpfr_sub_d(by.get(), by.get(), a.imag(), kRound);
  mpfr_set_d(cx.get(), c.real(), kRound);
  mpfr_sub_d(cx.get(), cx.get(), a.real(), kRound);
  mpfr_set_d(cy.get(), c.imag(), kRound);
  mpfr_sub_d(cy.get(), cy.get(), a.imag(), kRound);
  mpfr_mul(l.get(), bx.get(), cy.get(), kRound);
  mpfr_mul(r.get(), by.get(), cx.get(), kRound);
  return mpfr_cmp(l.get(), r.get());
}

/// Convex hull, counter-clockwise, no collinear vertices (monotone chain).
inline std::vector<cplx> convex_hull(std::span<const cplx> pts) {
  std::vector<cplx> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() < 3) return p;
  std::vector<cplx> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && orientation(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && orientation(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

inline double segment_distance(cplx p, cplx a, cplx b) {
  const cplx ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  const double t = std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

/// Signed distance to a convex polygon (negative inside). Hulls with fewer
/// than three vertices are a point or a segment: distance is never negative.
inline double hull_signed_distance(const std::vector<cplx>& hull, cplx p) {
  if (hull.size() == 1) return std::abs(p - hull[0]);
  if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]);
  bool inside = true;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const cplx a = hull[i], b = hull[(i + 1) % hull.size()];
    if (orientation(a, b, p) < 0) inside = false;
    dist = std::min(dist, segment_distance(p, a, b));
  }
  return inside ? -dist : dist;
}

inline double diameter(std::span<const cplx> pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, std::abs(pts[i] - pts[j]));
  return d;
}

}  // namespace detail

struct HullCheck {
  bool contained = true;
  /// Largest signed distance of a critical point to the hull; negative = inside.
  double worst_violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
};

/// Gauss-Lucas: every critical point lies in the convex hull of the roots,
/// within 1e-12 times the root diameter.
inline HullCheck gauss_lucas_check(std::span<const cplx> roots, std::span<const cplx> cps) {
  if (roots.empty()) throw DomainError("gauss_lucas_check: no roots");
  const std::vector<cplx> hull = detail::convex_hull(roots);
  HullCheck h;
  h.tolerance = 1e-12 * detail::diameter(hull);
  for (const cplx& a : cps)
    h.worst_violation = std::max(h.worst_violation, detail::hull_signed_distance(hull, a));
  h.contained = cps.empty() || h.worst_violation <= h.tolerance;
  return h;
}

inline HullCheck gauss_lucas_check(std::span<const cplx> roots, const CriticalPointSet& cps) {
  return gauss_lucas_check(roots, std::span<const cplx>(cps.points));
}

/// Rolle for real-rooted polynomials: m-1 critical points at each distinct
/// root of multiplicity m and exactly one strictly between consecutive
/// distinct roots, none outside.
inline bool interlacing_check(std::span<const cplx> roots, const CriticalPointSet& cps) {
  if (roots.empty()) throw DomainError("interlacing_check: no roots");
  double scale = 1.0;
  for (const cplx& x : roots) scale = std::max(scale, std::abs(x));
  const double real_tol = 1e-12 * scale;
  std::vector<double> r;
  for (const cplx& x : roots) {
    if (std::abs(x.imag()) > real_tol) throw DomainError("interlacing_check: non-real root");
    r.push_back(x.real());
  }
  std::sort(r.begin(), r.end());
  const double merge = std::ldexp(1.0, -static_cast<int>(cps.precision_bits / 2)) * scale;
  std::vector<double> distinct;
  std::vector<std::size_t> mult;
  for (double x : r) {
    if (!distinct.empty() && x - distinct.back() < merge) {
      ++mult.back();
    } else {
      distinct.push_back(x);
      mult.push_back(1);
    }
  }
  std::vector<std::size_t> at_root(distinct.size(), 0);
  std::vector<std::size_t> between(distinct.size(), 0);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const cplx a = cps.points[i];
    const double tol = std::max(4.0 * cps.uncertainty[i], merge);
    if (std::abs(a.imag()) > std::max(tol, real_tol)) return false;
    const double x = a.real();
    // Nearest distinct root of multiplicity > 1 within tolerance.
    bool placed = false;
    for (std::size_t k = 0; k < distinct.size() && !placed; ++k) {
      if (mult[k] > 1 && std::abs(x - distinct[k]) <= tol) {
        ++at_root[k];
        placed = true;
      }
    }
    if (placed) continue;
    const auto it = std::upper_bound(distinct.begin(), distinct.end(), x);
    if (it == distinct.begin() || it == distinct.end()) return false;
    const auto k = static_cast<std::size_t>(it - distinct.begin()) - 1;
    if (!(x > distinct[k] && x < distinct[k + 1])) return false;
    ++between[k];
  }
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    if (at_root[k] != mult[k] - 1) return false;
    if (k + 1 < distinct.size() && between[k] != 1) return false;
  }
  return true;
}

/// Jensen: for real polynomials every non-real critical point lies in a disk
/// whose diameter is the segment between a conjugate pair of roots.
inline bool jensen_check(std::span<const cplx> roots, std::span<const cplx> cps) {
  if (roots.empty()) throw DomainError("jensen_check: no roots");
  const std::vector<cplx> hull = detail::convex_hull(roots);
  const double tol = 1e-12 * std::max(1.0, detail::diameter(hull));
  std::vector<cplx> upper;
  std::vector<cplx> lower;
  for (const cplx& x : roots) {
    if (x.imag() > tol)
      upper.push_back(x);
    else if (x.imag() < -tol)
      lower.push_back(x);
  }
  if (upper.size() != lower.size())
    throw DomainError("jensen_check: roots are not closed under conjugation");
  std::vector<char> used(lower.size(), 0);
  for (const cplx& u : upper) {
    bool found = false;
    for (std::size_t j = 0; j < lower.size() && !found; ++j) {
      if (!used[j] && std::abs(lower[j] - std::conj(u)) <= tol) {
        used[j] = 1;
        found = true;
      }
    }
    if (!found) throw DomainError("jensen_check: roots are not closed under conjugation");
  }
  for (const cplx& a : cps) {
    if (std::abs(a.imag()) <= tol) continue;
    bool inside = false;
    for (const cplx& u : upper) {
      if (std::abs(a - cplx(u.real(), 0.0)) <= u.imag() + tol) {
        inside = true;
        break;
      }
    }
    if (!inside) return false;
  }
  return true;
}

inline bool jensen_check(std::span<const cplx> roots, const CriticalPointSet& cps) {
  return jensen_check(roots, std::span<const cplx>(cps.points));
}

struct MardenReport {
  std::array<cplx, 2> foci;
  std::array<cplx, 2> critical_points;
  /// max distance between foci and critical points, best matching.
  double max_deviation = 0.0;
  /// Largest defect of the inellipse at the side midpoints: level-set value
  /// and tangency (both zero for the exact inellipse).
  double tangency_error = 0.0;
};

/// Marden: the critical points of (z-z1)(z-z2)(z-z3) are the foci of the
/// Steiner inellipse. The ellipse is built from the triangle alone: with
/// centroid g and vertex second-moment matrix S = (1/3) sum u u^T, u = z_i - g,
/// it is {u : u^T S^{-1} u = 1/2}; its foci are g +- sqrt(((a - c) + 2ib)/2)
/// for S = [[a, b], [b, c]].
inline MardenReport marden_check(const MpComplex& z1, const MpComplex& z2, const MpComplex& z3,
                                 mpfr_prec_t bits = kDefaultPrecisionBits) {
  const std::array<cplx, 3> zd{z1.to_cplx(), z2.to_cplx(), z3.to_cplx()};
  const double scale = std::max({std::abs(zd[1] - zd[0]), std::abs(zd[2] - zd[0]),
                                 std::abs(zd[2] - zd[1])});
  const double area = std::abs(((zd[1] - zd[0]) * std::conj(zd[2] - zd[0])).imag()) / 2.0;
  if (!(scale > 0.0) || area <= 1e-12 * scale * scale)
    throw DomainError("marden_check: vertices are collinear");

  const std::array<const MpComplex*, 3> z{&z1, &z2, &z3};
  Scratch s(bits);
  MpComplex g(bits);
  for (const auto* p : z) mpc::add(g, g, *p);
  mpfr_div_ui(g.re.get(), g.re.get(), 3, kRound);
  mpfr_div_ui(g.im.get(), g.im.get(), 3, kRound);
  MpReal a(bits), b(bits), c(bits), t(bits);
  std::array<MpComplex, 3> u{MpComplex(bits), MpComplex(bits), MpComplex(bits)};
  for (std::size_t i = 0; i < 3; ++i) {
    mpc::sub(u[i], *z[i], g);
    mpfr_fma(a.get(), u[i].re.get(), u[i].re.get(), a.get(), kRound);
    mpfr_fma(b.get(), u[i].re.get(), u[i].im.get(), b.get(), kRound);
    mpfr_fma(c.get(), u[i].im.get(), u[i].im.get(), c.get(), kRound);
  }
  for (MpReal* m : {&a, &b, &c}) mpfr_div_ui(m->get(), m->get(), 3, kRound);

  MardenReport rep;
  // Tangency at side midpoints: q(m) = m^T S^{-1} m = 1/2 and grad q . side = 0.
  MpReal det(bits), q(bits), gx(bits), gy(bits);
  mpfr_mul(det.get(), a.get(), c.get(), kRound);
  mpfr_fms(det.get(), b.get(), b.get(), det.get(), kRound);
  mpfr_neg(det.get(), det.get(), kRound);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t j = (i + 1) % 3;
    MpComplex m(bits), side(bits);
    mpc::add(m, u[i], u[j]);
    mpfr_div_2ui(m.re.get(), m.re.get(), 1, kRound);
    mpfr_div_2ui(m.im.get(), m.im.get(), 1, kRound);
    mpc::sub(side, u[j], u[i]);
    // S^{-1} m = (c x - b y, a y - b x) / det
    mpfr_mul(gx.get(), c.get(), m.re.get(), kRound);
    mpfr_fms(gx.get(), b.get(), m.im.get(), gx.get(), kRound);
    mpfr_neg(gx.get(), gx.get(), kRound);
    mpfr_div(gx.get(), gx.get(), det.get(), kRound);
    mpfr_mul(gy.get(), a.get(), m.im.get(), kRound);
    mpfr_fms(gy.get(), b.get(), m.re.get(), gy.get(), kRound);
    mpfr_neg(gy.get(), gy.get(), kRound);
    mpfr_div(gy.get(), gy.get(), det.get(), kRound);
    mpfr_mul(q.get(), gx.get(), m.re.get(), kRound);
    mpfr_fma(q.get(), gy.get(), m.im.get(), q.get(), kRound);
    mpfr_sub_d(q.get(), q.get(), 0.5, kRound);
    rep.tangency_error = std::max(rep.tangency_error, std::abs(q.to_double()));
    mpfr_mul(t.get(), gx.get(), side.re.get(), kRound);
    mpfr_fma(t.get(), gy.get(), side.im.get(), t.get(), kRound);
    rep.tangency_error = std::max(rep.tangency_error, std::abs(t.to_double()) / scale);
  }

  // Focal offset sqrt(w), w = ((a - c) + 2ib) / 2, principal branch.
  MpComplex w(bits), f(bits);
  mpfr_sub(w.re.get(), a.get(), c.get(), kRound);
  mpfr_div_2ui(w.re.get(), w.re.get(), 1, kRound);
  mpfr_set(w.im.get(), b.get(), kRound);
  MpReal mod(bits);
  mpc::abs(mod, w);
  mpfr_add(t.get(), mod.get(), w.re.get(), kRound);
  mpfr_div_2ui(t.get(), t.get(), 1, kRound);
  mpfr_sqrt(f.re.get(), t.get(), kRound);
  mpfr_sub(t.get(), mod.get(), w.re.get(), kRound);
  mpfr_div_2ui(t.get(), t.get(), 1, kRound);
  mpfr_sqrt(f.im.get(), t.get(), kRound);
  if (mpfr_sgn(w.im.get()) < 0) mpfr_neg(f.im.get(), f.im.get(), kRound);
  std::array<MpComplex, 2> foci{MpComplex(bits), MpComplex(bits)};
  mpc::add(foci[0], g, f);
  mpc::sub(foci[1], g, f);

  const CriticalPointSet cps =
      critical_points(RootPolynomial(std::vector<MpComplex>{z1, z2, z3}, bits));
  MpComplex d(bits);
  auto dist = [&](const MpComplex& x, const MpComplex& y) {
    mpc::sub(d, x, y);
    return mpc::abs(d);
  };
  const double straight =
      std::max(dist(foci[0], cps.points_mp[0]), dist(foci[1], cps.points_mp[1]));
  const double crossed =
      std::max(dist(foci[0], cps.points_mp[1]), dist(foci[1], cps.points_mp[0]));
  rep.max_deviation = std::min(straight, crossed);
  rep.foci = {foci[0].to_cplx(), foci[1].to_cplx()};
  rep.critical_points = {cps.points[0], cps.points[1]};
  return rep;
}

inline MardenReport marden_check(cplx z1, cplx z2, cplx z3,
                                 mpfr_prec_t bits = kDefaultPrecisionBits) {
  return marden_check(MpComplex(z1, bits), MpComplex(z2, bits), MpComplex(z3, bits), bits);
}

struct PerturbationReport {
  std::size_t n = 0;
  std::size_t moved_index = 0;
  /// t: the moved root sits at angle 2 pi (j + t) / n.
  std::vector<double> fraction;
  std::vector<double> max_modulus;

  void write_csv(std::ostream& os) const {
    os << "fraction,max_modulus\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < fraction.size(); ++i)
      os << fraction[i] << ',' << max_modulus[i] << '\n';
  }
};

/// Critical points of z^n - 1 as one root slides along the circle onto its
/// neighbour: the largest critical-point modulus jumps from 0 to 1. The seed
/// chooses which root moves.
inline PerturbationReport perturbation_demo(std::size_t n, std::uint64_t seed,
                                            std::size_t steps = 20,
                                            mpfr_prec_t bits = kDefaultPrecisionBits) {
  if (n < 3) throw DomainError("perturbation_demo: n must be at least 3");
  if (steps < 2) throw DomainError("perturbation_demo: need at least 2 steps");
  PerturbationReport rep;
  rep.n = n;
  rep.moved_index = static_cast<std::size_t>(seed % n);
  const long j = static_cast<long>(rep.moved_index);
  const long ln = static_cast<long>(n);
  const long ls = static_cast<long>(steps);
  // Angles as reduced fractions of a turn so that the endpoint coincides
  // bit for bit with the neighbour.
  auto root = [&](long num, long den) {
    num %= den;
    const long d = std::gcd(num, den);
    return mpc::unit_root(num / d, den / d, bits);
  };
  for (long k = 0; k <= ls; ++k) {
    std::vector<MpComplex> roots;
    for (long i = 0; i < ln; ++i)
      roots.push_back(i == j ? root(j * ls + k, ln * ls) : root(i, ln));
    const CriticalPointSet cps = critical_points(RootPolynomial(std::move(roots), bits));
    double m = 0.0;
    for (const cplx& a : cps.points) m = std::max(m, std::abs(a));
    rep.fraction.push_back(static_cast<double>(k) / static_cast<double>(steps));
    rep.max_modulus.push_back(m);
  }
  return rep;
}

}  // namespace critpoints
