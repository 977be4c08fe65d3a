#pragma once

// Polynomials in root form and their critical points.
//
// Critical points are found by Aberth-Ehrlich simultaneous iteration on the
// logarithmic derivative of f' evaluated directly from the roots, never from
// expanded coefficients: in root form the conditioning does not degrade with
// the size of the monomial coefficients. The pipeline is
//
//   1. merge roots closer than 2^{-P/2} into multiplicity atoms; an atom of
//      multiplicity m contributes m-1 critical points at the atom itself;
//   2. expand the reduced derivative sum_k m_k prod_{l != k} (z - Y_l) and
//      deflate any trailing run of coefficients indistinguishable from zero
//      (exact critical points at the origin, e.g. for z^n - 1);
//   3. double-precision Aberth started next to each root, at the first-order
//      offset of its attached critical point, then one double-double sweep;
//   4. Newton polish at P bits, falling back to multiprecision Aberth on
//      stagnation or coincident approximations;
//   5. certify every point at 2P bits; on failure double P and repeat.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "critpoints/ddouble.hpp"
#include "critpoints/errors.hpp"
#include "critpoints/precision.hpp"

namespace critpoints {

inline constexpr mpfr_prec_t kDefaultPrecisionBits = 256;
inline constexpr int kMaxEscalations = 8;

/// Starting precision for a degree-n solve. Root-form evaluation does not
/// need precision growing with n, so this is flat.
constexpr mpfr_prec_t default_precision_bits(std::size_t /*n*/) { return kDefaultPrecisionBits; }

class RootPolynomial {
 public:
  RootPolynomial(std::span<const cplx> roots, mpfr_prec_t precision_bits = kDefaultPrecisionBits)
      : bits_(precision_bits) {
    check(roots.size());
    roots_.reserve(roots.size());
    for (const cplx& r : roots) roots_.emplace_back(r, bits_);
  }

  RootPolynomial(std::vector<MpComplex> roots, mpfr_prec_t precision_bits)
      : roots_(std::move(roots)), bits_(precision_bits) {
    check(roots_.size());
    for (auto& r : roots_) r.set_bits(bits_);
  }

  /// The n-th roots of unity, each correctly rounded at precision_bits.
  static RootPolynomial roots_of_unity(std::size_t n, mpfr_prec_t precision_bits) {
    std::vector<MpComplex> r;
    r.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
      r.push_back(mpc::unit_root(static_cast<long>(k), static_cast<long>(n), precision_bits));
    return RootPolynomial(std::move(r), precision_bits);
  }

  std::size_t degree() const noexcept { return roots_.size(); }
  mpfr_prec_t precision_bits() const noexcept { return bits_; }
  const std::vector<MpComplex>& roots() const noexcept { return roots_; }

  std::vector<cplx> roots_double() const {
    std::vector<cplx> out;
    out.reserve(roots_.size());
    for (const auto& r : roots_) out.push_back(r.to_cplx());
    return out;
  }

  /// Same roots carried at a higher precision (exact widening).
  RootPolynomial widened(mpfr_prec_t bits) const {
    return RootPolynomial(roots_, std::max(bits, bits_));
  }

  RootPolynomial conjugate() const {
    std::vector<MpComplex> r = roots_;
    for (auto& z : r) mpfr_neg(z.im.get(), z.im.get(), kRound);
    return RootPolynomial(std::move(r), bits_);
  }

 private:
  void check(std::size_t n) const {
    if (n < 1) throw DomainError("RootPolynomial: at least one root required");
    if (bits_ < 53) throw DomainError("RootPolynomial: precision_bits must be at least 53");
  }

  std::vector<MpComplex> roots_;
  mpfr_prec_t bits_;
};

/// Zeros with per-point certificates, sorted by (Re, Im).
struct CertifiedZeros {
  std::vector<MpComplex> points_mp;
  std::vector<cplx> points;
  /// Relative residual |F(a)| / sum|terms| evaluated at twice the working precision.
  std::vector<double> residuals;
  /// Radius within which the exact zero is located (Newton-distance estimate).
  std::vector<double> uncertainty;
  mpfr_prec_t precision_bits = 0;
  double tau_cert = 0.0;
  int escalations = 0;

  std::size_t size() const noexcept { return points.size(); }
};

using CriticalPointSet = CertifiedZeros;

/// tau_cert = n * 2^{-P/4}, compared against relative residuals.
inline double certification_threshold(std::size_t n, mpfr_prec_t bits) {
  return static_cast<double>(n) * std::ldexp(1.0, -static_cast<int>(bits / 4));
}

/// f'(z)/f(z) = sum_j 1/(z - X_j), accumulated at twice the working precision.
inline cplx eval_log_derivative(const RootPolynomial& p, const MpComplex& z) {
  const mpfr_prec_t wide = 2 * std::max(p.precision_bits(), z.bits());
  Scratch s(wide);
  MpComplex acc(wide), d(wide);
  for (std::size_t j = 0; j < p.degree(); ++j) {
    mpc::sub(d, z, p.roots()[j]);
    if (d.is_zero()) throw PoleError(j, "eval_log_derivative: z equals root " + std::to_string(j));
    mpc::inv(d, d, s);
    mpc::add(acc, acc, d);
  }
  return acc.to_cplx();
}

inline cplx eval_log_derivative(const RootPolynomial& p, cplx z) {
  return eval_log_derivative(p, MpComplex(z, p.precision_bits()));
}

namespace detail {

/// Distinct roots with multiplicities.
struct MergedRoots {
  std::vector<MpComplex> values;
  std::vector<long> mult;
  bool all_simple = true;
};

/// Groups roots closer than 2^{-P/2} (absolute); the representative is the
/// lowest-index member of each group.
inline MergedRoots merge_roots(const RootPolynomial& p) {
  const auto& x = p.roots();
  const std::size_t n = x.size();
  const mpfr_prec_t bits = p.precision_bits();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int c = mpfr_cmp(x[a].re.get(), x[b].re.get());
    return c != 0 ? c < 0 : a < b;
  });

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  MpReal thr(1.0, bits);
  mpfr_mul_2si(thr.get(), thr.get(), -static_cast<long>(bits / 2), kRound);
  MpReal thr2(bits), dist2(2 * bits), dre(2 * bits), dim(2 * bits);
  mpfr_sqr(thr2.get(), thr.get(), kRound);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& u = x[order[a]];
      const auto& v = x[order[b]];
      mpfr_sub(dre.get(), v.re.get(), u.re.get(), kRound);
      if (mpfr_cmp(dre.get(), thr.get()) >= 0) break;
      mpfr_sub(dim.get(), v.im.get(), u.im.get(), kRound);
      mpfr_sqr(dist2.get(), dre.get(), kRound);
      mpfr_fma(dist2.get(), dim.get(), dim.get(), dist2.get(), kRound);
      if (mpfr_cmp(dist2.get(), thr2.get()) < 0) {
        const std::size_t ra = find(order[a]);
        const std::size_t rb = find(order[b]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  MergedRoots out;
  std::vector<long> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(out.values.size());
      out.values.push_back(x[r]);
      out.mult.push_back(0);
    }
    ++out.mult[static_cast<std::size_t>(slot[r])];
  }
  out.all_simple = std::all_of(out.mult.begin(), out.mult.end(), [](long m) { return m == 1; });
  return out;
}

struct Expansion {
  /// Coefficients of sum_k m_k prod_{l != k}(z - Y_l), lowest degree first.
  std::vector<MpComplex> coeffs;
  /// Same recurrence on |Y_l|: a componentwise magnitude bound.
  std::vector<MpReal> magnitude;
  /// Leading run of coefficients below their uncertainty bound.
  std::size_t trailing_zeros = 0;
  /// Per-coefficient uncertainty bound used for the deflation test.
  std::vector<MpReal> bounds;
};

/// Expands P = prod (z - Y_l) and H = sum m_k P/(z - Y_k) together:
/// multiplying by (z - Y) with weight m maps (P, H) to (P(z-Y), H(z-Y) + mP).
/// Only coefficients of degree < keep are formed.
inline Expansion expand_weighted_derivative(std::span<const MpComplex> y,
                                            std::span<const long> mult, mpfr_prec_t bits,
                                            std::size_t keep = static_cast<std::size_t>(-1)) {
  const std::size_t d = y.size();
  const std::size_t K = std::min(keep, d);
  Scratch s(bits);
  std::vector<MpComplex> P(K, MpComplex(bits)), H(K, MpComplex(bits));
  std::vector<MpReal> Pa(K, MpReal(bits)), Ha(K, MpReal(bits));
  mpfr_set_ui(P[0].re.get(), 1, kRound);
  mpfr_set_ui(Pa[0].get(), 1, kRound);
  MpComplex t(bits);
  MpReal ya(bits), ta(bits);
  long total = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const long m = mult[k];
    total += m;
    mpc::abs(ya, y[k]);
    // Before this step P has degree k and H degree k-1.
    for (std::size_t i = std::min(k, K - 1) + 1; i-- > 0;) {
      if (i < k) {
        mpc::mul(t, y[k], H[i], s);
        mpfr_neg(t.re.get(), t.re.get(), kRound);
        mpfr_neg(t.im.get(), t.im.get(), kRound);
        mpfr_mul(ta.get(), ya.get(), Ha[i].get(), kRound);
      } else {
        t.set_zero();
        mpfr_set_zero(ta.get(), 1);
      }
      if (i >= 1) {
        mpc::add(t, t, H[i - 1]);
        mpfr_add(ta.get(), ta.get(), Ha[i - 1].get(), kRound);
      }
      mpfr_mul_si(s[5], P[i].re.get(), m, kRound);
      mpfr_add(t.re.get(), t.re.get(), s[5], kRound);
      mpfr_mul_si(s[5], P[i].im.get(), m, kRound);
      mpfr_add(t.im.get(), t.im.get(), s[5], kRound);
      mpfr_mul_si(s[5], Pa[i].get(), m, kRound);
      mpfr_add(ta.get(), ta.get(), s[5], kRound);
      H[i].assign(t);
      Ha[i].assign(ta);
    }
    for (std::size_t i = std::min(k + 1, K - 1) + 1; i-- > 0;) {
      if (i <= k) {
        mpc::mul(t, y[k], P[i], s);
        mpfr_neg(t.re.get(), t.re.get(), kRound);
        mpfr_neg(t.im.get(), t.im.get(), kRound);
        mpfr_mul(ta.get(), ya.get(), Pa[i].get(), kRound);
      } else {
        t.set_zero();
        mpfr_set_zero(ta.get(), 1);
      }
      if (i >= 1) {
        mpc::add(t, t, P[i - 1]);
        mpfr_add(ta.get(), ta.get(), Pa[i - 1].get(), kRound);
      }
      P[i].assign(t);
      Pa[i].assign(ta);
    }
  }

  Expansion out;
  out.coeffs = std::move(H);
  out.magnitude = std::move(Ha);
  if (K == d) {
    // The leading coefficient is the integer sum of multiplicities.
    mpfr_set_si(out.coeffs.back().re.get(), total, kRound);
    mpfr_set_zero(out.coeffs.back().im.get(), 1);
  }

  // Input rounding and expansion rounding are both O(total * 2^-P) relative
  // to the magnitude polynomial; 4x margin.
  out.bounds.reserve(K);
  MpReal factor(static_cast<double>(4 * (total + 2)), bits);
  mpfr_mul_2si(factor.get(), factor.get(), -static_cast<long>(bits), kRound);
  for (std::size_t i = 0; i < K; ++i) {
    MpReal b(bits);
    mpfr_mul(b.get(), out.magnitude[i].get(), factor.get(), kRound);
    out.bounds.push_back(std::move(b));
  }
  MpReal mag(bits);
  while (out.trailing_zeros < K && out.trailing_zeros + 1 < d) {
    const std::size_t i = out.trailing_zeros;
    mpc::abs(mag, out.coeffs[i]);
    if (mpfr_cmp(mag.get(), out.bounds[i].get()) > 0) break;
    out.coeffs[i].set_zero();
    ++out.trailing_zeros;
  }
  return out;
}

/// Low-order part of the reduced derivative, long enough to contain the
/// first coefficient that is distinguishable from zero.
inline Expansion origin_expansion(const MergedRoots& merged, mpfr_prec_t bits) {
  const std::size_t d = merged.values.size();
  for (std::size_t keep = 2;; keep *= 2) {
    Expansion ex = expand_weighted_derivative(merged.values, merged.mult, bits, keep);
    if (ex.trailing_zeros < keep || keep >= d) return ex;
  }
}

/// Exponent test: true when |w| <= 2^{-(bits - 8)} * ref (ref >= 1 in practice).
inline bool step_negligible(const MpComplex& w, double ref, mpfr_prec_t bits) {
  const long limit = static_cast<long>(std::floor(std::log2(ref))) - static_cast<long>(bits) + 8;
  for (const MpReal* c : {&w.re, &w.im}) {
    if (mpfr_zero_p(c->get())) continue;
    if (!mpfr_number_p(c->get())) return false;
    if (mpfr_get_exp(c->get()) > limit) return false;
  }
  return true;
}

struct Certificate {
  MpReal residual;
  double uncertainty = 0.0;
};

/// Logarithmic derivative of sum_k m_k prod_{l != k}(z - Y_l) / z^{m0}, i.e. of
/// f'/(z^{m0} prod (z - Y_k)^{m_k - 1}), from the distinct roots directly.
class RootFormSystem {
 public:
  RootFormSystem(const MergedRoots& merged, std::size_t deflated, mpfr_prec_t bits)
      : bits_(bits),
        m0_(static_cast<long>(deflated)),
        all_simple_(merged.all_simple),
        mult_(merged.mult),
        s_(bits),
        d_(bits),
        q_(bits),
        g_(bits),
        sg_(bits),
        gp_(bits) {
    values_.reserve(merged.values.size());
    for (const auto& v : merged.values) {
      values_.push_back(v);
      values_.back().set_bits(bits);
      y_.push_back(v.to_cplx());
      ydd_.push_back({dd::from_mpfr(v.re.get()), dd::from_mpfr(v.im.get())});
      scale_ = std::max(scale_, std::abs(y_.back()));
    }
    for (long m : mult_) total_ += m;
  }

  mpfr_prec_t bits() const { return bits_; }
  std::size_t free_count() const { return values_.size() - 1 - static_cast<std::size_t>(m0_); }
  double scale() const { return scale_; }

  /// First-order estimates Y_j - m_j / sum_{k != j} m_k/(Y_j - Y_k) of the
  /// critical point attached to each root, keeping the free_count() smallest
  /// offsets.
  std::vector<cplx> initial_points() const {
    const std::size_t d = y_.size();
    std::vector<std::pair<double, cplx>> cand;
    cand.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      cplx g{0.0, 0.0};
      for (std::size_t k = 0; k < d; ++k)
        if (k != j) g += static_cast<double>(mult_[k]) * inverse(y_[j] - y_[k]);
      cplx off = static_cast<double>(mult_[j]) * inverse(g);
      if (!finite(off)) off = cplx(scale_, 0.0);
      cand.emplace_back(std::abs(off), y_[j] - off);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<cplx> z(free_count());
    for (std::size_t i = 0; i < z.size(); ++i)
      z[i] = cand[i].second + std::polar(1e-9 * scale_, 2.399963 * static_cast<double>(i));
    return z;
  }

  cplx log_derivative(cplx z) const {
    cplx G{0.0, 0.0}, S{0.0, 0.0}, Gp{0.0, 0.0};
    for (std::size_t k = 0; k < y_.size(); ++k) {
      const cplx q = inverse(z - y_[k]);
      const double m = static_cast<double>(mult_[k]);
      G += m * q;
      S += q;
      Gp -= m * q * q;
    }
    cplx L = Gp * inverse(G) + S;
    if (m0_ > 0) L -= static_cast<double>(m0_) * inverse(z);
    return L;
  }

  /// One Newton sweep in double-double; needs at least 107 working bits.
  void refine_dd(std::vector<MpComplex>& z) const {
    if (bits_ < 107) return;
    for (auto& p : z) {
      const DDComplex zd{dd::from_mpfr(p.re.get()), dd::from_mpfr(p.im.get())};
      DDComplex G{}, S{}, Gp{};
      bool pole = false;
      for (std::size_t k = 0; k < ydd_.size(); ++k) {
        const DDComplex d = dd::sub(zd, ydd_[k]);
        if (dd::is_zero(d)) {
          pole = true;
          break;
        }
        const DDComplex q = dd::inv(d);
        const double m = static_cast<double>(mult_[k]);
        const DDComplex q2 = dd::mul(q, q);
        if (mult_[k] == 1) {
          G = dd::add(G, q);
          Gp = dd::sub(Gp, q2);
        } else {
          G = dd::add(G, DDComplex{dd::mul(q.re, m), dd::mul(q.im, m)});
          Gp = dd::sub(Gp, DDComplex{dd::mul(q2.re, m), dd::mul(q2.im, m)});
        }
        S = dd::add(S, q);
      }
      if (pole || dd::is_zero(G) || (m0_ > 0 && dd::is_zero(zd))) continue;
      DDComplex L = dd::add(dd::div(Gp, G), S);
      if (m0_ > 0) {
        const DDComplex r = dd::inv(zd);
        L = dd::sub(L, DDComplex{dd::mul(r.re, static_cast<double>(m0_)),
                                 dd::mul(r.im, static_cast<double>(m0_))});
      }
      if (dd::is_zero(L)) continue;
      const DDComplex w = dd::inv(L);
      const DDComplex next = dd::sub(zd, w);
      if (!std::isfinite(next.re.hi) || !std::isfinite(next.im.hi)) continue;
      dd::to_mpfr(p.re.get(), next.re);
      dd::to_mpfr(p.im.get(), next.im);
    }
  }

  /// Returns false when z coincides with a pole.
  bool log_derivative(const MpComplex& z, MpComplex& L) {
    g_.set_zero();
    sg_.set_zero();
    gp_.set_zero();
    for (std::size_t k = 0; k < values_.size(); ++k) {
      mpc::sub(d_, z, values_[k]);
      // q = conj(d)/|d|^2
      mpfr_sqr(s_[0], d_.re.get(), kRound);
      mpfr_sqr(s_[1], d_.im.get(), kRound);
      mpfr_add(s_[0], s_[0], s_[1], kRound);
      if (mpfr_zero_p(s_[0])) return false;
      mpfr_ui_div(s_[0], 1, s_[0], kRound);
      mpfr_mul(q_.re.get(), d_.re.get(), s_[0], kRound);
      mpfr_mul(q_.im.get(), d_.im.get(), s_[0], kRound);
      mpfr_neg(q_.im.get(), q_.im.get(), kRound);
      const long m = mult_[k];
      // q^2
      mpfr_sqr(s_[1], q_.re.get(), kRound);
      mpfr_sqr(s_[2], q_.im.get(), kRound);
      mpfr_sub(s_[1], s_[1], s_[2], kRound);
      mpfr_mul(s_[2], q_.re.get(), q_.im.get(), kRound);
      mpfr_mul_2ui(s_[2], s_[2], 1, kRound);
      if (m == 1) {
        mpc::add(g_, g_, q_);
        mpfr_sub(gp_.re.get(), gp_.re.get(), s_[1], kRound);
        mpfr_sub(gp_.im.get(), gp_.im.get(), s_[2], kRound);
      } else {
        mpfr_mul_si(s_[3], q_.re.get(), m, kRound);
        mpfr_add(g_.re.get(), g_.re.get(), s_[3], kRound);
        mpfr_mul_si(s_[3], q_.im.get(), m, kRound);
        mpfr_add(g_.im.get(), g_.im.get(), s_[3], kRound);
        mpfr_mul_si(s_[1], s_[1], m, kRound);
        mpfr_mul_si(s_[2], s_[2], m, kRound);
        mpfr_sub(gp_.re.get(), gp_.re.get(), s_[1], kRound);
        mpfr_sub(gp_.im.get(), gp_.im.get(), s_[2], kRound);
      }
      if (!all_simple_) mpc::add(sg_, sg_, q_);
    }
    if (g_.is_zero()) return false;
    // L = Gp/G + S - m0/z
    mpc::div(L, gp_, g_, s_);
    if (all_simple_) {
      mpc::add(L, L, g_);
    } else {
      mpc::add(L, L, sg_);
    }
    if (m0_ > 0) {
      if (z.is_zero()) return false;
      mpc::inv(d_, z, s_);
      mpfr_mul_si(d_.re.get(), d_.re.get(), m0_, kRound);
      mpfr_mul_si(d_.im.get(), d_.im.get(), m0_, kRound);
      mpc::sub(L, L, d_);
    }
    return true;
  }

  /// Newton step w = G/G' for G = sum m_k/(z - Y_k), whose zeros away from
  /// the roots are the free critical points. Only G needs the working
  /// precision: a relative error e in G' moves the update by e|w|, and with
  /// G' in double-double that stays below 2^-P once |w| is below 2^-(P-104).
  /// Returns false on a pole or a vanishing G'.
  bool newton_step(const MpComplex& z, MpComplex& w) {
    if (bits_ < 107) {
      MpComplex L(bits_);
      if (!log_derivative(z, L) || L.is_zero()) return false;
      mpc::inv(w, L, s_);
      return true;
    }
    g_.set_zero();
    const DDComplex zd{dd::from_mpfr(z.re.get()), dd::from_mpfr(z.im.get())};
    DDComplex Gp{};
    for (std::size_t k = 0; k < values_.size(); ++k) {
      mpc::sub(d_, z, values_[k]);
      mpfr_sqr(s_[0], d_.re.get(), kRound);
      mpfr_sqr(s_[1], d_.im.get(), kRound);
      mpfr_add(s_[0], s_[0], s_[1], kRound);
      if (mpfr_zero_p(s_[0])) return false;
      mpfr_ui_div(s_[0], 1, s_[0], kRound);
      const long m = mult_[k];
      if (m != 1) mpfr_mul_si(s_[0], s_[0], m, kRound);
      // G += m conj(d)/|d|^2
      // (mul + add is several times cheaper than mpfr_fma at these sizes)
      mpfr_mul(s_[1], d_.re.get(), s_[0], kRound);
      mpfr_add(g_.re.get(), g_.re.get(), s_[1], kRound);
      mpfr_mul(s_[1], d_.im.get(), s_[0], kRound);
      mpfr_sub(g_.im.get(), g_.im.get(), s_[1], kRound);
      const DDComplex q = dd::inv(dd::sub(zd, ydd_[k]));
      const DDComplex q2 = dd::mul(q, q);
      if (m == 1) {
        Gp = dd::sub(Gp, q2);
      } else {
        const double md = static_cast<double>(m);
        Gp = dd::sub(Gp, DDComplex{dd::mul(q2.re, md), dd::mul(q2.im, md)});
      }
    }
    if (dd::is_zero(Gp)) return false;
    dd::to_mpfr(gp_.re.get(), Gp.re);
    dd::to_mpfr(gp_.im.get(), Gp.im);
    mpc::div(w, g_, gp_, s_);
    return true;
  }

  /// Relative residual |G(a)| / sum m_k/|a - Y_k| of f'/f at 2P bits, and the
  /// Newton distance 2|G/G'| as the location uncertainty.
  Certificate certify(const MpComplex& a) const {
    const mpfr_prec_t wide = 2 * bits_;
    MpReal n2(wide), t(wide);
    MpComplex d(wide), G(wide);
    // The residual needs the cancellation-free sum at 2P; the denominator and
    // G' only need a few correct digits.
    double denom = 0.0;
    cplx Gp{0.0, 0.0};
    for (std::size_t k = 0; k < values_.size(); ++k) {
      mpc::sub(d, a, values_[k]);
      mpfr_sqr(n2.get(), d.re.get(), kRound);
      mpfr_sqr(t.get(), d.im.get(), kRound);
      mpfr_add(n2.get(), n2.get(), t.get(), kRound);
      if (mpfr_zero_p(n2.get())) return {MpReal(1.0, wide), 0.0};
      mpfr_ui_div(n2.get(), 1, n2.get(), kRound);
      const long m = mult_[k];
      if (m != 1) mpfr_mul_si(n2.get(), n2.get(), m, kRound);
      // G += m conj(d)/|d|^2
      mpfr_mul(t.get(), d.re.get(), n2.get(), kRound);
      mpfr_add(G.re.get(), G.re.get(), t.get(), kRound);
      mpfr_mul(t.get(), d.im.get(), n2.get(), kRound);
      mpfr_sub(G.im.get(), G.im.get(), t.get(), kRound);
      const cplx q = inverse(d.to_cplx());
      const double md = static_cast<double>(m);
      denom += md * std::abs(q);
      Gp -= md * q * q;
    }
    Certificate c{MpReal(wide), 0.0};
    mpc::abs(c.residual, G);
    mpfr_div_d(c.residual.get(), c.residual.get(), denom, kRound);
    if (Gp != cplx(0.0, 0.0)) c.uncertainty = 2.0 * std::abs(G.to_cplx()) / std::abs(Gp);
    return c;
  }

  long deflated() const { return m0_; }
  long total() const { return total_; }

 private:
  mpfr_prec_t bits_;
  long m0_;
  bool all_simple_;
  std::vector<long> mult_;
  std::vector<MpComplex> values_;
  std::vector<cplx> y_;
  std::vector<DDComplex> ydd_;
  double scale_ = 1.0;
  long total_ = 0;
  Scratch s_;
  MpComplex d_, q_, g_, sg_, gp_;
};

/// Logarithmic derivative p'/p of a polynomial given by coefficients.
class CoefficientSystem {
 public:
  /// `coeffs` lowest degree first with nonzero leading and constant terms.
  CoefficientSystem(std::span<const cplx> coeffs, mpfr_prec_t bits)
      : bits_(bits), c_(coeffs.begin(), coeffs.end()), s_(bits), p_(bits), dp_(bits) {
    for (const cplx& c : c_) cm_.emplace_back(c, bits);
    const std::size_t m = c_.size() - 1;
    // Fujiwara bound on the moduli of the zeros.
    double bound = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double r = std::pow(std::abs(c_[k] / c_[m]), 1.0 / static_cast<double>(m - k));
      if (k == 0) r *= std::pow(0.5, 1.0 / static_cast<double>(m));
      bound = std::max(bound, r);
    }
    radius_ = 2.0 * bound;
    scale_ = std::max(1.0, radius_);
  }

  mpfr_prec_t bits() const { return bits_; }
  std::size_t free_count() const { return c_.size() - 1; }
  double scale() const { return scale_; }
  /// Jittered circle of radius twice the Fujiwara bound.
  std::vector<cplx> initial_points() const {
    const std::size_t r = free_count();
    std::vector<cplx> z(r);
    for (std::size_t i = 0; i < r; ++i) {
      const double t = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.25) /
                           static_cast<double>(r) +
                       0.05 * std::sin(static_cast<double>(i) + 1.0);
      z[i] = std::polar(radius_, t);
    }
    return z;
  }

  cplx log_derivative(cplx z) const {
    cplx p = c_.back(), dp{0.0, 0.0};
    for (std::size_t k = c_.size() - 1; k-- > 0;) {
      dp = dp * z + p;
      p = p * z + c_[k];
    }
    return dp / p;
  }

  bool log_derivative(const MpComplex& z, MpComplex& L) {
    p_.assign(cm_.back());
    dp_.set_zero();
    for (std::size_t k = cm_.size() - 1; k-- > 0;) {
      mpc::mul(dp_, dp_, z, s_);
      mpc::add(dp_, dp_, p_);
      mpc::mul(p_, p_, z, s_);
      mpc::add(p_, p_, cm_[k]);
    }
    if (p_.is_zero()) return false;
    mpc::div(L, dp_, p_, s_);
    return true;
  }

  /// |p(a)| / sum |c_k||a|^k at 2P bits and Newton distance 2|p/p'|.
  Certificate certify(const MpComplex& a) const {
    const mpfr_prec_t wide = 2 * bits_;
    Scratch s(wide);
    MpComplex p(wide), dp(wide), c(wide);
    MpReal ab(wide), mag(wide), cabs(wide);
    mpc::abs(ab, a);
    p.assign(cm_.back());
    mpc::abs(mag, cm_.back());
    for (std::size_t k = cm_.size() - 1; k-- > 0;) {
      mpc::mul(dp, dp, a, s);
      mpc::add(dp, dp, p);
      mpc::mul(p, p, a, s);
      mpc::add(p, p, cm_[k]);
      mpc::abs(cabs, cm_[k]);
      mpfr_fma(mag.get(), mag.get(), ab.get(), cabs.get(), kRound);
    }
    Certificate out{MpReal(wide), 0.0};
    mpc::abs(out.residual, p);
    mpfr_div(out.residual.get(), out.residual.get(), mag.get(), kRound);
    if (!dp.is_zero()) {
      mpc::div(c, p, dp, s);
      out.uncertainty = 2.0 * mpc::abs(c);
    }
    return out;
  }

 private:
  mpfr_prec_t bits_;
  std::vector<cplx> c_;
  std::vector<MpComplex> cm_;
  double radius_ = 1.0;
  double scale_ = 1.0;
  Scratch s_;
  MpComplex p_, dp_;
};

/// Aberth-Ehrlich in double precision, Gauss-Seidel order, from the
/// system's starting points. Returns the approximations whether or not all
/// converged; points stalled at the double-precision floor are frozen.
template <class System>
std::vector<cplx> aberth_double(const System& sys, int max_iter = 500) {
  std::vector<cplx> z = sys.initial_points();
  const std::size_t r = z.size();
  std::vector<char> done(r, 0);
  std::vector<double> last(r, std::numeric_limits<double>::infinity());
  constexpr double kEps = 4.0 * std::numeric_limits<double>::epsilon();
  for (int it = 0; it < max_iter; ++it) {
    bool all = true;
    for (std::size_t i = 0; i < r; ++i) {
      if (done[i]) continue;
      const cplx L = sys.log_derivative(z[i]);
      if (!finite(L)) {
        z[i] += cplx(1e-9, 1e-9) * (1.0 + std::abs(z[i]));
        all = false;
        continue;
      }
      cplx A{0.0, 0.0};
      for (std::size_t j = 0; j < r; ++j) {
        if (j == i) continue;
        const cplx d = z[i] - z[j];
        if (d != cplx(0.0, 0.0)) A += inverse(d);
      }
      const cplx w = inverse(L - A);
      if (!finite(w)) {
        all = false;
        continue;
      }
      z[i] -= w;
      const double step = std::abs(w);
      const double ref = std::abs(z[i]) + 1e-6 * sys.scale();
      if (step <= kEps * ref || (step <= 1e-10 * ref && step > 0.5 * last[i]))
        done[i] = 1;
      else
        all = false;
      last[i] = step;
    }
    if (all) break;
  }
  return z;
}

/// Quadratic-convergence stopping rule: once |w| <= 2^{-(P/2 + 16)} * ref the
/// step just taken leaves an error far below 2^{-P} * ref.
inline bool step_final(const MpComplex& w, double ref, mpfr_prec_t bits) {
  return step_negligible(w, ref, bits / 2 + 24);
}

/// Newton sweeps at the system precision; returns true when every point
/// converged.
template <class System>
bool newton_polish(System& sys, std::vector<MpComplex>& z, int max_sweeps) {
  const mpfr_prec_t bits = sys.bits();
  Scratch s(bits);
  MpComplex L(bits), w(bits);
  std::vector<char> done(z.size(), 0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool all = true;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (done[i]) continue;
      if constexpr (requires { sys.newton_step(z[i], w); }) {
        if (!sys.newton_step(z[i], w)) return false;
      } else {
        if (!sys.log_derivative(z[i], L) || L.is_zero()) return false;
        mpc::inv(w, L, s);
      }
      mpc::sub(z[i], z[i], w);
      if (step_final(w, std::abs(z[i].to_cplx()) + sys.scale(), bits))
        done[i] = 1;
      else
        all = false;
    }
    if (all) return true;
  }
  return false;
}

/// Multiprecision Aberth sweeps; returns true when every step became negligible.
template <class System>
bool aberth_polish(System& sys, std::vector<MpComplex>& z, int max_sweeps) {
  const mpfr_prec_t bits = sys.bits();
  Scratch s(bits);
  MpComplex L(bits), A(bits), d(bits), w(bits);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool all = true;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (!sys.log_derivative(z[i], L)) {
        // Sitting on a pole: nudge off it.
        MpComplex nudge(cplx(1e-30, 1e-30), bits);
        mpc::add(z[i], z[i], nudge);
        all = false;
        continue;
      }
      A.set_zero();
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (j == i) continue;
        mpc::sub(d, z[i], z[j]);
        if (d.is_zero()) continue;
        mpc::inv(d, d, s);
        mpc::add(A, A, d);
      }
      mpc::sub(A, L, A);
      if (A.is_zero()) {
        all = false;
        continue;
      }
      mpc::inv(w, A, s);
      mpc::sub(z[i], z[i], w);
      if (!step_final(w, std::abs(z[i].to_cplx()) + sys.scale(), bits)) all = false;
    }
    if (all) return true;
  }
  return false;
}

/// True when two approximations agree to about half the working precision.
inline bool has_coincident(const std::vector<MpComplex>& z, double scale, mpfr_prec_t bits) {
  std::vector<cplx> v;
  v.reserve(z.size());
  for (const auto& p : z) v.push_back(p.to_cplx());
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a].real() < v[b].real(); });
  const double thr = std::ldexp(scale, -static_cast<int>(bits / 2)) + 1e-300;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (v[order[b]].real() - v[order[a]].real() > thr) break;
      if (std::abs(v[order[a]] - v[order[b]]) <= thr) return true;
    }
  }
  return false;
}

struct PolishOutcome {
  std::vector<MpComplex> points;
  std::vector<Certificate> certs;
  bool certified = false;
  MpReal worst{53};
};

/// Steps 4 and 5 of the pipeline for one precision level.
template <class System>
PolishOutcome polish_and_certify(System& sys, std::vector<MpComplex> z, bool force_aberth,
                                 const MpReal& tau) {
  const mpfr_prec_t bits = sys.bits();
  for (auto& p : z) p.set_bits(bits);
  bool ok = false;
  if constexpr (requires { sys.refine_dd(z); }) {
    if (!force_aberth) sys.refine_dd(z);
  }
  if (!force_aberth) {
    ok = newton_polish(sys, z, 24) && !has_coincident(z, sys.scale(), bits);
  }
  if (!ok) {
    aberth_polish(sys, z, 200);
  }
  PolishOutcome out;
  out.certified = true;
  out.worst = MpReal(2 * bits);
  for (const auto& p : z) {
    out.certs.push_back(sys.certify(p));
    if (mpfr_cmp(out.certs.back().residual.get(), out.worst.get()) > 0)
      out.worst.assign(out.certs.back().residual);
    if (mpfr_cmp(out.certs.back().residual.get(), tau.get()) > 0) out.certified = false;
  }
  out.points = std::move(z);
  return out;
}

inline void sort_zeros(CertifiedZeros& cz) {
  std::vector<std::size_t> order(cz.points_mp.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mpc::less(cz.points_mp[a], cz.points_mp[b]);
  });
  CertifiedZeros s;
  s.precision_bits = cz.precision_bits;
  s.tau_cert = cz.tau_cert;
  s.escalations = cz.escalations;
  for (std::size_t i : order) {
    s.points_mp.push_back(std::move(cz.points_mp[i]));
    s.points.push_back(cz.points[i]);
    s.residuals.push_back(cz.residuals[i]);
    s.uncertainty.push_back(cz.uncertainty[i]);
  }
  cz = std::move(s);
}

inline void append_zero(CertifiedZeros& cz, MpComplex p, double residual, double uncertainty) {
  cz.points.push_back(p.to_cplx());
  cz.points_mp.push_back(std::move(p));
  cz.residuals.push_back(residual);
  cz.uncertainty.push_back(uncertainty);
}

/// Deflated zeros at the origin are only known to within the radius at which
/// the discarded coefficients could move them.
inline double deflation_radius(const Expansion& e) {
  const std::size_t m0 = e.trailing_zeros;
  if (m0 == 0) return 0.0;
  const double lead = mpc::abs(e.coeffs[m0]);
  double r = 0.0;
  for (std::size_t k = 0; k < m0; ++k) {
    long exp2 = 0;
    const double b = mpfr_get_d_2exp(&exp2, e.bounds[k].get(), kRound);
    // (b 2^exp2 / lead)^{1/(m0-k)} computed in logs to avoid underflow.
    const double lg = (std::log2(std::max(b, 1e-300)) + static_cast<double>(exp2) -
                       std::log2(lead)) /
                      static_cast<double>(m0 - k);
    r = std::max(r, std::exp2(lg));
  }
  return 2.0 * r;
}

}  // namespace detail

/// Coefficients of f'(z) lowest degree first, at the polynomial's precision.
/// A trailing run of coefficients below their rounding-uncertainty bound is
/// set to exactly zero; the leading coefficient is exactly n.
inline std::vector<MpComplex> derivative_coefficients(const RootPolynomial& p) {
  std::vector<long> ones(p.degree(), 1);
  return detail::expand_weighted_derivative(p.roots(), ones, p.precision_bits()).coeffs;
}

inline std::vector<cplx> derivative_coefficients_double(const RootPolynomial& p) {
  std::vector<cplx> out;
  for (const auto& c : derivative_coefficients(p)) out.push_back(c.to_cplx());
  return out;
}

/// All n-1 zeros of f', certified, sorted by (Re, Im).
inline CriticalPointSet critical_points(const RootPolynomial& poly) {
  const std::size_t n = poly.degree();
  if (n < 2) throw DomainError("critical_points: need at least two roots");

  mpfr_prec_t bits = poly.precision_bits();
  std::vector<MpComplex> previous;
  std::size_t previous_deflated = 0;
  bool have_previous = false;
  MpReal worst(53);

  for (int level = 0; level <= kMaxEscalations; ++level, bits *= 2) {
    const RootPolynomial p = poly.widened(bits);
    const detail::MergedRoots merged = detail::merge_roots(p);
    CertifiedZeros out;
    out.precision_bits = bits;
    out.tau_cert = certification_threshold(n, bits);
    out.escalations = level;

    for (std::size_t k = 0; k < merged.values.size(); ++k)
      for (long c = 1; c < merged.mult[k]; ++c) detail::append_zero(out, merged.values[k], 0.0, 0.0);

    if (merged.values.size() == 1) {
      detail::sort_zeros(out);
      return out;
    }

    const detail::Expansion ex =
        detail::origin_expansion(merged, bits);
    const std::size_t m0 = ex.trailing_zeros;

    detail::RootFormSystem sys(merged, m0, bits);
    MpReal tau(out.tau_cert, 2 * bits);

    // Deflated points: certify against f'/f like any other point.
    const double defl_radius = detail::deflation_radius(ex);
    bool certified = true;
    worst = MpReal(2 * bits);
    if (m0 > 0) {
      MpComplex origin(bits);
      detail::Certificate c0 = sys.certify(origin);
      if (mpfr_cmp(c0.residual.get(), tau.get()) > 0) certified = false;
      worst.assign(c0.residual);
      for (std::size_t k = 0; k < m0; ++k)
        detail::append_zero(out, origin, c0.residual.to_double(), defl_radius);
    }

    if (sys.free_count() > 0) {
      std::vector<MpComplex> start;
      const bool reuse = have_previous && previous_deflated == m0 &&
                         previous.size() == sys.free_count();
      if (reuse) {
        start = previous;
      } else {
        for (const cplx& z : detail::aberth_double(sys)) start.emplace_back(z, bits);
      }
      detail::PolishOutcome po = detail::polish_and_certify(sys, std::move(start), reuse, tau);
      certified = certified && po.certified;
      if (mpfr_cmp(po.worst.get(), worst.get()) > 0) worst.assign(po.worst);
      for (std::size_t i = 0; i < po.points.size(); ++i)
        detail::append_zero(out, po.points[i], po.certs[i].residual.to_double(),
                            std::max(po.certs[i].uncertainty,
                                     std::ldexp(std::abs(po.points[i].to_cplx()) + sys.scale(),
                                                -static_cast<int>(bits))));
      previous = std::move(po.points);
      previous_deflated = m0;
      have_previous = true;
    }

    if (certified) {
      detail::sort_zeros(out);
      return out;
    }
  }
  throw SolverFailure(worst.to_double(), "critical_points: certification failed after " +
                                             std::to_string(kMaxEscalations) +
                                             " precision escalations");
}

/// Zeros of sum_k c_k z^k (lowest degree first), certified. Exact zero
/// constant terms are deflated as zeros at the origin; trailing zero leading
/// coefficients are dropped.
inline CertifiedZeros polynomial_zeros(std::span<const cplx> coeffs,
                                       mpfr_prec_t bits = kDefaultPrecisionBits) {
  std::size_t hi = coeffs.size();
  while (hi > 0 && coeffs[hi - 1] == cplx(0.0, 0.0)) --hi;
  if (hi < 2) throw DomainError("polynomial_zeros: degree must be at least one");
  std::size_t lo = 0;
  while (coeffs[lo] == cplx(0.0, 0.0)) ++lo;
  const std::span<const cplx> core = coeffs.subspan(lo, hi - lo);
  const std::size_t degree = hi - 1;

  std::vector<MpComplex> previous;
  MpReal worst(53);
  for (int level = 0; level <= kMaxEscalations; ++level, bits *= 2) {
    CertifiedZeros out;
    out.precision_bits = bits;
    out.tau_cert = certification_threshold(degree, bits);
    out.escalations = level;
    for (std::size_t k = 0; k < lo; ++k) detail::append_zero(out, MpComplex(bits), 0.0, 0.0);
    if (core.size() < 2) {
      detail::sort_zeros(out);
      return out;
    }
    detail::CoefficientSystem sys(core, bits);
    MpReal tau(out.tau_cert, 2 * bits);
    std::vector<MpComplex> start;
    const bool reuse = !previous.empty();
    if (reuse) {
      start = previous;
    } else {
      for (const cplx& z : detail::aberth_double(sys)) start.emplace_back(z, bits);
    }
    detail::PolishOutcome po = detail::polish_and_certify(sys, std::move(start), reuse, tau);
    for (std::size_t i = 0; i < po.points.size(); ++i)
      detail::append_zero(out, po.points[i], po.certs[i].residual.to_double(),
                          po.certs[i].uncertainty);
    if (po.certified) {
      detail::sort_zeros(out);
      return out;
    }
    worst.assign(po.worst);
    previous = std::move(po.points);
  }
  throw SolverFailure(worst.to_double(), "polynomial_zeros: certification failed");
}

/// Number of certified points strictly inside |z - center| < radius.
inline std::size_t rouche_ball_count(const CriticalPointSet& cps, cplx center, double radius) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const double dist = std::abs(cps.points[i] - center);
    const double margin = 2.0 * cps.uncertainty[i];
    if (std::abs(dist - radius) <= margin) {
      std::ostringstream os;
      os << "rouche_ball_count: point " << i << " within " << margin << " of the boundary";
      throw IndeterminateCount(os.str());
    }
    if (dist < radius) ++count;
  }
  return count;
}

inline std::size_t rouche_ball_count(const RootPolynomial& p, cplx center, double radius) {
  return rouche_ball_count(critical_points(p), center, radius);
}

}  // namespace critpoints
