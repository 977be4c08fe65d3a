#pragma once

// Double-double arithmetic (about 106 significant bits), used for one cheap
// refinement sweep between the double-precision and MPFR stages.

#include <mpfr.h>

#include <cmath>

namespace critpoints {

struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;
};

struct DDComplex {
  DoubleDouble re;
  DoubleDouble im;
};

namespace dd {

inline DoubleDouble quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

inline DoubleDouble two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline DoubleDouble add(DoubleDouble a, DoubleDouble b) {
  DoubleDouble s = two_sum(a.hi, b.hi);
  const DoubleDouble t = two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return quick_two_sum(s.hi, s.lo);
}

inline DoubleDouble neg(DoubleDouble a) { return {-a.hi, -a.lo}; }
inline DoubleDouble sub(DoubleDouble a, DoubleDouble b) { return add(a, neg(b)); }

inline DoubleDouble mul(DoubleDouble a, DoubleDouble b) {
  const double p = a.hi * b.hi;
  double e = std::fma(a.hi, b.hi, -p);
  e += a.hi * b.lo + a.lo * b.hi;
  return quick_two_sum(p, e);
}

inline DoubleDouble mul(DoubleDouble a, double b) {
  const double p = a.hi * b;
  double e = std::fma(a.hi, b, -p);
  e += a.lo * b;
  return quick_two_sum(p, e);
}

inline DoubleDouble div(DoubleDouble a, DoubleDouble b) {
  const double q1 = a.hi / b.hi;
  DoubleDouble r = sub(a, mul(b, q1));
  const double q2 = r.hi / b.hi;
  r = sub(r, mul(b, q2));
  const double q3 = r.hi / b.hi;
  return add(quick_two_sum(q1, q2), DoubleDouble{q3, 0.0});
}

inline DoubleDouble from_mpfr(mpfr_srcptr x) {
  const double hi = mpfr_get_d(x, MPFR_RNDN);
  mpfr_t t;
  mpfr_init2(t, mpfr_get_prec(x));
  mpfr_sub_d(t, x, hi, MPFR_RNDN);
  const double lo = mpfr_get_d(t, MPFR_RNDN);
  mpfr_clear(t);
  return {hi, lo};
}

/// Exact when the destination has at least 107 bits.
inline void to_mpfr(mpfr_ptr out, DoubleDouble a) {
  mpfr_set_d(out, a.hi, MPFR_RNDN);
  mpfr_add_d(out, out, a.lo, MPFR_RNDN);
}

inline DDComplex add(const DDComplex& a, const DDComplex& b) {
  return {add(a.re, b.re), add(a.im, b.im)};
}
inline DDComplex sub(const DDComplex& a, const DDComplex& b) {
  return {sub(a.re, b.re), sub(a.im, b.im)};
}
inline DDComplex mul(const DDComplex& a, const DDComplex& b) {
  return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
}
inline DDComplex inv(const DDComplex& a) {
  const DoubleDouble n = add(mul(a.re, a.re), mul(a.im, a.im));
  const DoubleDouble s = div(DoubleDouble{1.0, 0.0}, n);
  return {mul(a.re, s), neg(mul(a.im, s))};
}
inline DDComplex div(const DDComplex& a, const DDComplex& b) { return mul(a, inv(b)); }

inline bool is_zero(const DDComplex& a) { return a.re.hi == 0.0 && a.im.hi == 0.0; }

}  // namespace dd
}  // namespace critpoints
