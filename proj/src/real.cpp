#include "circlin/real.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "circlin/error.hpp"

namespace circlin {

namespace {

thread_local long g_working_bits = 128;

long max_bits(const Real& a, const Real& b) { return std::max(a.bits(), b.bits()); }

}  // namespace

long working_precision() { return g_working_bits; }

PrecisionScope::PrecisionScope(long bits) : saved_(g_working_bits) {
  if (bits < kMinPrecisionBits || bits > kMaxPrecisionBits) {
    throw ValidationError("precision out of range: " + std::to_string(bits));
  }
  g_working_bits = bits;
}

PrecisionScope::~PrecisionScope() { g_working_bits = saved_; }

Real::Real(long bits, int) { mpfr_init2(v_, bits); }

Real::Real() : Real(g_working_bits, 0) { mpfr_set_zero(v_, 1); }

Real::Real(double v) : Real(g_working_bits, 0) { mpfr_set_d(v_, v, MPFR_RNDN); }

Real::Real(int v) : Real(g_working_bits, 0) { mpfr_set_si(v_, v, MPFR_RNDN); }

Real::Real(long v) : Real(g_working_bits, 0) { mpfr_set_si(v_, v, MPFR_RNDN); }

Real::Real(const BigInt& z) : Real(g_working_bits, 0) {
  mpfr_set_z(v_, z.get_mpz_t(), MPFR_RNDN);
}

Real::Real(const Real& other) : Real(other.bits(), 0) {
  mpfr_set(v_, other.v_, MPFR_RNDN);
}

Real::Real(Real&& other) noexcept : Real(MPFR_PREC_MIN, 0) { mpfr_swap(v_, other.v_); }

Real& Real::operator=(const Real& other) {
  if (this != &other) {
    mpfr_set_prec(v_, other.bits());
    mpfr_set(v_, other.v_, MPFR_RNDN);
  }
  return *this;
}

Real& Real::operator=(Real&& other) noexcept {
  mpfr_swap(v_, other.v_);
  return *this;
}

Real::~Real() { mpfr_clear(v_); }

Real Real::zero(long bits) {
  Real r(bits, 0);
  mpfr_set_zero(r.v_, 1);
  return r;
}

Real Real::parse(const std::string& text, long bits) {
  Real r(bits, 0);
  // Accept "p/q" rationals as well as decimal literals.
  if (auto slash = text.find('/'); slash != std::string::npos) {
    BigInt p, q;
    if (p.set_str(text.substr(0, slash), 10) != 0 || q.set_str(text.substr(slash + 1), 10) != 0 ||
        q == 0) {
      throw ValidationError("malformed rational: '" + text + "'");
    }
    return from_ratio(p, q, bits);
  }
  char* end = nullptr;
  mpfr_strtofr(r.v_, text.c_str(), &end, 10, MPFR_RNDN);
  if (end == text.c_str() || *end != '\0') {
    throw ValidationError("malformed number: '" + text + "'");
  }
  return r;
}

Real Real::pi(long bits) {
  Real r(bits, 0);
  mpfr_const_pi(r.v_, MPFR_RNDN);
  return r;
}

Real Real::two_pi(long bits) {
  Real r(bits, 0);
  mpfr_const_pi(r.v_, MPFR_RNDN);
  mpfr_mul_2ui(r.v_, r.v_, 1, MPFR_RNDN);
  return r;
}

Real Real::from_ratio(const BigInt& p, const BigInt& q, long bits) {
  Real r(bits, 0);
  mpq_class ratio(p, q);
  ratio.canonicalize();
  mpfr_set_q(r.v_, ratio.get_mpq_t(), MPFR_RNDN);
  return r;
}

Real Real::rounded(long bits) const {
  Real r(bits, 0);
  mpfr_set(r.v_, v_, MPFR_RNDN);
  return r;
}

std::string Real::str(int digits) const {
  if (mpfr_nan_p(v_)) return "nan";
  if (mpfr_inf_p(v_)) return mpfr_sgn(v_) > 0 ? "inf" : "-inf";
  if (digits <= 0) {
    digits = static_cast<int>(std::ceil(static_cast<double>(bits()) * 0.30103)) + 1;
  }
  if (mpfr_zero_p(v_)) return "0";
  std::vector<char> buf(static_cast<size_t>(digits) + 64);
  mpfr_snprintf(buf.data(), buf.size(), "%.*Re", digits - 1, v_);
  return std::string(buf.data());
}

BigInt Real::floor() const {
  BigInt z;
  mpfr_get_z(z.get_mpz_t(), v_, MPFR_RNDD);
  return z;
}

BigInt Real::round() const {
  BigInt z;
  mpfr_get_z(z.get_mpz_t(), v_, MPFR_RNDN);
  return z;
}

Real& Real::operator+=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_add(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}

Real& Real::operator-=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_sub(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}

Real& Real::operator*=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_mul(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}

Real& Real::operator/=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_div(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}

Real operator+(const Real& a, const Real& b) {
  Real r(max_bits(a, b), 0);
  mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}

Real operator-(const Real& a, const Real& b) {
  Real r(max_bits(a, b), 0);
  mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}

Real operator*(const Real& a, const Real& b) {
  Real r(max_bits(a, b), 0);
  mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}

Real operator/(const Real& a, const Real& b) {
  Real r(max_bits(a, b), 0);
  mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}

Real operator-(const Real& a) {
  Real r(a.bits(), 0);
  mpfr_neg(r.v_, a.v_, MPFR_RNDN);
  return r;
}

std::partial_ordering operator<=>(const Real& a, const Real& b) {
  if (mpfr_unordered_p(a.v_, b.v_)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp(a.v_, b.v_);
  if (c < 0) return std::partial_ordering::less;
  if (c > 0) return std::partial_ordering::greater;
  return std::partial_ordering::equivalent;
}

namespace {

template <typename F>
Real unary(const Real& x, F f) {
  Real r = Real::zero(x.bits());
  f(r.get(), x.get(), MPFR_RNDN);
  return r;
}

}  // namespace

Real abs(const Real& x) { return unary(x, mpfr_abs); }
Real sqrt(const Real& x) { return unary(x, mpfr_sqrt); }
Real exp(const Real& x) { return unary(x, mpfr_exp); }
Real log(const Real& x) { return unary(x, mpfr_log); }
Real sin(const Real& x) { return unary(x, mpfr_sin); }
Real cos(const Real& x) { return unary(x, mpfr_cos); }

void sin_cos(const Real& x, Real& s, Real& c) {
  if (s.bits() != x.bits()) s = Real::zero(x.bits());
  if (c.bits() != x.bits()) c = Real::zero(x.bits());
  mpfr_sin_cos(s.get(), c.get(), x.get(), MPFR_RNDN);
}

Real pow(const Real& base, const Real& e) {
  Real r = Real::zero(std::max(base.bits(), e.bits()));
  mpfr_pow(r.get(), base.get(), e.get(), MPFR_RNDN);
  return r;
}

Real floor(const Real& x) {
  Real r = Real::zero(x.bits());
  mpfr_floor(r.get(), x.get());
  return r;
}

Real frac(const Real& x) {
  Real f = floor(x);
  Real r = Real::zero(x.bits());
  mpfr_sub(r.get(), x.get(), f.get(), MPFR_RNDN);
  return r;
}

Real max(const Real& a, const Real& b) { return a < b ? b : a; }
Real min(const Real& a, const Real& b) { return b < a ? b : a; }

Real mul_z(const Real& x, const BigInt& z) {
  Real r = Real::zero(x.bits());
  mpfr_mul_z(r.get(), x.get(), z.get_mpz_t(), MPFR_RNDN);
  return r;
}

Real add_z(const Real& x, const BigInt& z) {
  Real r = Real::zero(x.bits());
  mpfr_add_z(r.get(), x.get(), z.get_mpz_t(), MPFR_RNDN);
  return r;
}

long bit_length(const BigInt& z) {
  if (z == 0) return 0;
  return static_cast<long>(mpz_sizeinbase(z.get_mpz_t(), 2));
}

// ---------------------------------------------------------------- Interval

Interval::Interval() : lo(0), hi(0) {}

Interval::Interval(Real lo_, Real hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {}

Interval Interval::point(const Real& x) { return Interval(x, x); }

Interval Interval::exact(const BigInt& z, long bits) {
  Real lo = Real::zero(bits), hi = Real::zero(bits);
  mpfr_set_z(lo.get(), z.get_mpz_t(), MPFR_RNDD);
  mpfr_set_z(hi.get(), z.get_mpz_t(), MPFR_RNDU);
  return Interval(std::move(lo), std::move(hi));
}

Interval Interval::ratio(const BigInt& p, const BigInt& q, long bits) {
  mpq_class r(p, q);
  r.canonicalize();
  Real lo = Real::zero(bits), hi = Real::zero(bits);
  mpfr_set_q(lo.get(), r.get_mpq_t(), MPFR_RNDD);
  mpfr_set_q(hi.get(), r.get_mpq_t(), MPFR_RNDU);
  return Interval(std::move(lo), std::move(hi));
}

Interval Interval::at_least(const Real& lo_) {
  Real hi = Real::zero(lo_.bits());
  mpfr_set_inf(hi.get(), 1);
  return Interval(lo_, std::move(hi));
}

long Interval::bits() const { return std::max(lo.bits(), hi.bits()); }

Real Interval::width() const {
  Real r = Real::zero(bits());
  mpfr_sub(r.get(), hi.get(), lo.get(), MPFR_RNDU);
  return r;
}

Real Interval::mid() const {
  Real r = Real::zero(bits());
  mpfr_add(r.get(), lo.get(), hi.get(), MPFR_RNDN);
  mpfr_div_2ui(r.get(), r.get(), 1, MPFR_RNDN);
  return r;
}

bool Interval::straddles_integer() const {
  const BigInt f = hi.floor();
  return mpfr_cmp_z(lo.get(), f.get_mpz_t()) <= 0;
}

namespace {

long ibits(const Interval& a, const Interval& b) { return std::max(a.bits(), b.bits()); }

Real op_round(int (*f)(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t), const Real& a,
              const Real& b, mpfr_rnd_t rnd, long bits) {
  Real r = Real::zero(bits);
  f(r.get(), a.get(), b.get(), rnd);
  return r;
}

}  // namespace

Interval operator+(const Interval& a, const Interval& b) {
  const long p = ibits(a, b);
  return Interval(op_round(mpfr_add, a.lo, b.lo, MPFR_RNDD, p),
                  op_round(mpfr_add, a.hi, b.hi, MPFR_RNDU, p));
}

Interval operator-(const Interval& a, const Interval& b) {
  const long p = ibits(a, b);
  return Interval(op_round(mpfr_sub, a.lo, b.hi, MPFR_RNDD, p),
                  op_round(mpfr_sub, a.hi, b.lo, MPFR_RNDU, p));
}

Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

Interval operator*(const Interval& a, const Interval& b) {
  const long p = ibits(a, b);
  const Real* pairs[4][2] = {{&a.lo, &b.lo}, {&a.lo, &b.hi}, {&a.hi, &b.lo}, {&a.hi, &b.hi}};
  Real lo = op_round(mpfr_mul, *pairs[0][0], *pairs[0][1], MPFR_RNDD, p);
  Real hi = op_round(mpfr_mul, *pairs[0][0], *pairs[0][1], MPFR_RNDU, p);
  for (int i = 1; i < 4; ++i) {
    Real l = op_round(mpfr_mul, *pairs[i][0], *pairs[i][1], MPFR_RNDD, p);
    Real h = op_round(mpfr_mul, *pairs[i][0], *pairs[i][1], MPFR_RNDU, p);
    if (l < lo) lo = std::move(l);
    if (h > hi) hi = std::move(h);
  }
  return Interval(std::move(lo), std::move(hi));
}

Interval reciprocal(const Interval& a) {
  if (a.lo.sign() <= 0 && a.hi.sign() >= 0) {
    throw PrecisionExhausted("reciprocal of an interval containing zero");
  }
  const long p = a.bits();
  Real one(1);
  return Interval(op_round(mpfr_div, one, a.hi, MPFR_RNDD, p),
                  op_round(mpfr_div, one, a.lo, MPFR_RNDU, p));
}

Interval operator/(const Interval& a, const Interval& b) { return a * reciprocal(b); }

Interval operator+(const Interval& a, const BigInt& z) {
  return a + Interval::exact(z, a.bits());
}

Interval operator*(const Interval& a, const BigInt& z) {
  Real lo = Real::zero(a.bits()), hi = Real::zero(a.bits());
  if (z >= 0) {
    mpfr_mul_z(lo.get(), a.lo.get(), z.get_mpz_t(), MPFR_RNDD);
    mpfr_mul_z(hi.get(), a.hi.get(), z.get_mpz_t(), MPFR_RNDU);
  } else {
    mpfr_mul_z(lo.get(), a.hi.get(), z.get_mpz_t(), MPFR_RNDD);
    mpfr_mul_z(hi.get(), a.lo.get(), z.get_mpz_t(), MPFR_RNDU);
  }
  return Interval(std::move(lo), std::move(hi));
}

Interval abs(const Interval& a) {
  if (a.lo.sign() >= 0) return a;
  if (a.hi.sign() <= 0) return -a;
  return Interval(Real::zero(a.bits()), max(-a.lo, a.hi));
}

Interval dist_to_int(const Interval& x) {
  // Shift so that the nearest integer to the midpoint is 0.
  const BigInt n = x.mid().round();
  Interval y = abs(x + BigInt(-n));
  Real half = Real::zero(x.bits());
  mpfr_set_d(half.get(), 0.5, MPFR_RNDN);
  if (y.hi > half) {
    if (y.lo >= half) {
      throw PrecisionExhausted("distance-to-integer enclosure inconsistent");
    }
    // Enclosure crosses a half-integer: ||x|| is within [lo, 1/2].
    return Interval(y.lo, half);
  }
  return y;
}

Interval pow_pos(const Interval& a, const Real& e) {
  if (a.lo.sign() < 0) throw ValidationError("pow_pos of a negative interval");
  const long p = std::max(a.bits(), e.bits());
  Real lo = Real::zero(p), hi = Real::zero(p);
  if (e.sign() >= 0) {
    mpfr_pow(lo.get(), a.lo.get(), e.get(), MPFR_RNDD);
    mpfr_pow(hi.get(), a.hi.get(), e.get(), MPFR_RNDU);
  } else {
    mpfr_pow(lo.get(), a.hi.get(), e.get(), MPFR_RNDD);
    mpfr_pow(hi.get(), a.lo.get(), e.get(), MPFR_RNDU);
  }
  return Interval(std::move(lo), std::move(hi));
}

Interval log_pos(const Interval& a) {
  if (a.lo.sign() <= 0) throw ValidationError("log of a non-positive interval");
  Real lo = Real::zero(a.bits()), hi = Real::zero(a.bits());
  mpfr_log(lo.get(), a.lo.get(), MPFR_RNDD);
  mpfr_log(hi.get(), a.hi.get(), MPFR_RNDU);
  return Interval(std::move(lo), std::move(hi));
}

Interval intersect(const Interval& a, const Interval& b) {
  Interval r(max(a.lo, b.lo), min(a.hi, b.hi));
  if (r.hi < r.lo) throw CertificationError("disjoint enclosures");
  return r;
}

}  // namespace circlin
