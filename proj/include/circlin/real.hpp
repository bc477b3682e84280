#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <compare>
#include <cstdint>
#include <string>

namespace circlin {

using BigInt = mpz_class;

inline constexpr long kMinPrecisionBits = 8;
inline constexpr long kMaxPrecisionBits = 1L << 16;

// Thread-local precision (bits) given to reals that are not told otherwise.
long working_precision();

// Sets the working precision for the current thread until destruction.
class PrecisionScope {
 public:
  explicit PrecisionScope(long bits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  long saved_;
};

// Arbitrary-precision binary float (MPFR), round-to-nearest. Binary
// operations produce a result at the larger of the operand precisions.
class Real {
 public:
  Real();
  Real(double v);  // NOLINT(google-explicit-constructor)
  Real(int v);     // NOLINT(google-explicit-constructor)
  Real(long v);    // NOLINT(google-explicit-constructor)
  explicit Real(const BigInt& z);
  Real(const Real& other);
  Real(Real&& other) noexcept;
  Real& operator=(const Real& other);
  Real& operator=(Real&& other) noexcept;
  ~Real();

  static Real zero(long bits);
  static Real parse(const std::string& text, long bits = working_precision());
  static Real pi(long bits = working_precision());
  static Real two_pi(long bits = working_precision());
  static Real from_ratio(const BigInt& p, const BigInt& q,
                         long bits = working_precision());

  long bits() const { return static_cast<long>(mpfr_get_prec(v_)); }
  Real rounded(long bits) const;

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  long double to_long_double() const { return mpfr_get_ld(v_, MPFR_RNDN); }
  // Scientific notation with `digits` significant digits (0: enough to
  // round-trip the precision).
  std::string str(int digits = 0) const;
  BigInt floor() const;
  BigInt round() const;

  bool is_finite() const { return mpfr_number_p(v_) != 0; }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  int sign() const { return mpfr_sgn(v_); }

  Real& operator+=(const Real& o);
  Real& operator-=(const Real& o);
  Real& operator*=(const Real& o);
  Real& operator/=(const Real& o);

  friend Real operator+(const Real& a, const Real& b);
  friend Real operator-(const Real& a, const Real& b);
  friend Real operator*(const Real& a, const Real& b);
  friend Real operator/(const Real& a, const Real& b);
  friend Real operator-(const Real& a);

  friend bool operator==(const Real& a, const Real& b) {
    return mpfr_equal_p(a.v_, b.v_) != 0;
  }
  friend std::partial_ordering operator<=>(const Real& a, const Real& b);

 private:
  explicit Real(long bits, int /*tag*/);
  mpfr_t v_;
};

Real abs(const Real& x);
Real sqrt(const Real& x);
Real exp(const Real& x);
Real log(const Real& x);
Real sin(const Real& x);
Real cos(const Real& x);
void sin_cos(const Real& x, Real& s, Real& c);
Real pow(const Real& base, const Real& e);
Real floor(const Real& x);
// x - floor(x), in [0, 1).
Real frac(const Real& x);
Real max(const Real& a, const Real& b);
Real min(const Real& a, const Real& b);
// Exact product with an integer (no rounding beyond the result precision).
Real mul_z(const Real& x, const BigInt& z);
Real add_z(const Real& x, const BigInt& z);

// Closed interval with outward-rounded endpoints.
struct Interval {
  Real lo;
  Real hi;

  Interval();
  Interval(Real lo_, Real hi_);
  static Interval point(const Real& x);
  static Interval exact(const BigInt& z, long bits = working_precision());
  static Interval ratio(const BigInt& p, const BigInt& q,
                        long bits = working_precision());
  // [lo, +inf]
  static Interval at_least(const Real& lo_);

  long bits() const;
  Real width() const;  // rounded up
  Real mid() const;
  bool contains(const Real& x) const { return lo <= x && x <= hi; }
  bool positive() const { return lo.sign() > 0; }
  bool straddles_integer() const;
};

Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator-(const Interval& a);
Interval operator*(const Interval& a, const Interval& b);
// Requires 0 not in b.
Interval operator/(const Interval& a, const Interval& b);
Interval operator+(const Interval& a, const BigInt& z);
Interval operator*(const Interval& a, const BigInt& z);
Interval reciprocal(const Interval& a);
Interval abs(const Interval& a);
// Enclosure of the distance to the nearest integer, ||x||. Throws
// PrecisionExhausted when the enclosure reaches across a half-integer
// and an integer simultaneously (too wide to be meaningful).
Interval dist_to_int(const Interval& x);
// a^e for a > 0, e real: monotone in a.
Interval pow_pos(const Interval& a, const Real& e);
Interval log_pos(const Interval& a);
Interval intersect(const Interval& a, const Interval& b);

// Decimal representation of a big integer.
inline std::string to_string(const BigInt& z) { return z.get_str(); }
// Number of bits in |z|.
long bit_length(const BigInt& z);

}  // namespace circlin
