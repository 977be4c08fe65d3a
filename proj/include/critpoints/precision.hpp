#pragma once

// Multiprecision scalars backed by MPFR.
//
// MpReal owns one mpfr_t and carries its precision with it: copies keep the
// source precision, arithmetic through the free functions below rounds into
// the destination's precision. Hot loops in the solver call these kernels
// directly with a reusable Scratch to avoid allocating temporaries.

#include <mpfr.h>

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace critpoints {

using cplx = std::complex<double>;

inline constexpr mpfr_rnd_t kRound = MPFR_RNDN;

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

/// 1/z without the inf/nan recovery of std::complex division.
inline cplx inverse(cplx z) {
  const double n = z.real() * z.real() + z.imag() * z.imag();
  return {z.real() / n, -z.imag() / n};
}

class MpReal {
 public:
  explicit MpReal(mpfr_prec_t bits = 53) {
    mpfr_init2(v_, bits);
    mpfr_set_zero(v_, 1);
  }
  MpReal(double x, mpfr_prec_t bits) {
    mpfr_init2(v_, bits);
    mpfr_set_d(v_, x, kRound);
  }
  MpReal(const MpReal& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, kRound);
  }
  MpReal(MpReal&& o) noexcept {
    mpfr_init2(v_, MPFR_PREC_MIN);
    mpfr_swap(v_, o.v_);
  }
  MpReal& operator=(const MpReal& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, kRound);
    }
    return *this;
  }
  MpReal& operator=(MpReal&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
  }
  ~MpReal() { mpfr_clear(v_); }

  mpfr_ptr get() noexcept { return v_; }
  mpfr_srcptr get() const noexcept { return v_; }
  mpfr_prec_t bits() const noexcept { return mpfr_get_prec(v_); }

  /// Changes precision keeping the value (rounded if narrowing).
  void set_bits(mpfr_prec_t bits) { mpfr_prec_round(v_, bits, kRound); }
  void set(double x) { mpfr_set_d(v_, x, kRound); }
  void assign(const MpReal& o) { mpfr_set(v_, o.v_, kRound); }
  double to_double() const { return mpfr_get_d(v_, kRound); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }

  std::string to_string(int digits = 40) const {
    std::vector<char> buf(static_cast<std::size_t>(digits) + 32);
    mpfr_snprintf(buf.data(), buf.size(), "%.*Rg", digits, v_);
    return buf.data();
  }

 private:
  mpfr_t v_;
};

struct MpComplex {
  MpReal re;
  MpReal im;

  explicit MpComplex(mpfr_prec_t bits = 53) : re(bits), im(bits) {}
  MpComplex(cplx z, mpfr_prec_t bits) : re(z.real(), bits), im(z.imag(), bits) {}

  mpfr_prec_t bits() const noexcept { return re.bits(); }
  void set_bits(mpfr_prec_t bits) {
    re.set_bits(bits);
    im.set_bits(bits);
  }
  void set(cplx z) {
    re.set(z.real());
    im.set(z.imag());
  }
  void assign(const MpComplex& o) {
    re.assign(o.re);
    im.assign(o.im);
  }
  void set_zero() {
    mpfr_set_zero(re.get(), 1);
    mpfr_set_zero(im.get(), 1);
  }
  bool is_zero() const { return re.is_zero() && im.is_zero(); }
  cplx to_cplx() const { return {re.to_double(), im.to_double()}; }
};

/// Temporaries for the complex kernels; sized once per solve.
class Scratch {
 public:
  explicit Scratch(mpfr_prec_t bits) : t_(6, MpReal(bits)) {}
  mpfr_ptr operator[](std::size_t i) { return t_[i].get(); }
  mpfr_prec_t bits() const { return t_.front().bits(); }

 private:
  std::vector<MpReal> t_;
};

namespace mpc {

inline void add(MpComplex& r, const MpComplex& a, const MpComplex& b) {
  mpfr_add(r.re.get(), a.re.get(), b.re.get(), kRound);
  mpfr_add(r.im.get(), a.im.get(), b.im.get(), kRound);
}

inline void sub(MpComplex& r, const MpComplex& a, const MpComplex& b) {
  mpfr_sub(r.re.get(), a.re.get(), b.re.get(), kRound);
  mpfr_sub(r.im.get(), a.im.get(), b.im.get(), kRound);
}

// r may alias a or b.
inline void mul(MpComplex& r, const MpComplex& a, const MpComplex& b, Scratch& s) {
  mpfr_mul(s[0], a.re.get(), b.re.get(), kRound);
  mpfr_mul(s[1], a.im.get(), b.im.get(), kRound);
  mpfr_mul(s[2], a.re.get(), b.im.get(), kRound);
  mpfr_mul(s[3], a.im.get(), b.re.get(), kRound);
  mpfr_sub(r.re.get(), s[0], s[1], kRound);
  mpfr_add(r.im.get(), s[2], s[3], kRound);
}

// r = 1/a. r may alias a.
inline void inv(MpComplex& r, const MpComplex& a, Scratch& s) {
  mpfr_sqr(s[0], a.re.get(), kRound);
  mpfr_fma(s[0], a.im.get(), a.im.get(), s[0], kRound);
  mpfr_div(r.re.get(), a.re.get(), s[0], kRound);
  mpfr_div(r.im.get(), a.im.get(), s[0], kRound);
  mpfr_neg(r.im.get(), r.im.get(), kRound);
}

// r = a / b. r may alias a or b.
inline void div(MpComplex& r, const MpComplex& a, const MpComplex& b, Scratch& s) {
  mpfr_sqr(s[4], b.re.get(), kRound);
  mpfr_fma(s[4], b.im.get(), b.im.get(), s[4], kRound);
  mpfr_mul(s[0], a.re.get(), b.re.get(), kRound);
  mpfr_mul(s[1], a.im.get(), b.im.get(), kRound);
  mpfr_mul(s[2], a.im.get(), b.re.get(), kRound);
  mpfr_mul(s[3], a.re.get(), b.im.get(), kRound);
  mpfr_add(s[0], s[0], s[1], kRound);
  mpfr_sub(s[2], s[2], s[3], kRound);
  mpfr_div(r.re.get(), s[0], s[4], kRound);
  mpfr_div(r.im.get(), s[2], s[4], kRound);
}

inline void abs(MpReal& r, const MpComplex& a) {
  mpfr_hypot(r.get(), a.re.get(), a.im.get(), kRound);
}

inline double abs(const MpComplex& a) {
  MpReal r(a.bits());
  abs(r, a);
  return r.to_double();
}

/// Lexicographic (re, im) comparison at full precision.
inline bool less(const MpComplex& a, const MpComplex& b) {
  const int c = mpfr_cmp(a.re.get(), b.re.get());
  if (c != 0) return c < 0;
  return mpfr_cmp(a.im.get(), b.im.get()) < 0;
}

/// exp(i*theta) with theta = 2*pi*num/den evaluated at `bits`.
inline MpComplex unit_root(long num, long den, mpfr_prec_t bits) {
  MpComplex z(bits);
  MpReal theta(bits + 16);
  mpfr_const_pi(theta.get(), kRound);
  mpfr_mul_si(theta.get(), theta.get(), 2 * num, kRound);
  mpfr_div_si(theta.get(), theta.get(), den, kRound);
  mpfr_sin_cos(z.im.get(), z.re.get(), theta.get(), kRound);
  return z;
}

}  // namespace mpc

/// Neumaier-compensated running sum of doubles.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Complex pair of compensated sums.
class CompensatedComplexSum {
 public:
  void add(cplx z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  cplx value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_;
  CompensatedSum im_;
};

}  // namespace critpoints
