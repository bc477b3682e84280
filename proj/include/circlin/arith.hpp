#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "circlin/real.hpp"

namespace circlin::arith {

// How the CF stream continues past the stored prefix.
enum class TailKind { periodic, constant, reject };

struct TailPolicy {
  TailKind kind = TailKind::reject;
  std::vector<BigInt> block;  // periodic block, or {a} for a constant tail

  static TailPolicy periodic(std::vector<BigInt> block);
  static TailPolicy constant(const BigInt& a);
  static TailPolicy reject();
};

// Irrational number in (0,1) = [0; a_1, a_2, ...]. The CF stream is
// canonical; the value is derived from it. Angles recovered from a value
// enclosure (see tilde_angles) keep that enclosure as their value and a
// rejecting tail past the certified coefficients.
class Angle {
 public:
  Angle() = default;

  static Angle from_cf(std::vector<BigInt> coeffs, TailPolicy tail, long precision_bits);
  // Certified CF recovery by the Gauss map on an enclosure of a number in
  // (0,1). Recovers at most max_coeffs coefficients; throws
  // PrecisionExhausted if fewer than min_coeffs separate.
  static Angle from_enclosure(const Interval& value, long precision_bits, int min_coeffs,
                              int max_coeffs = 400);

  const std::vector<BigInt>& prefix() const { return prefix_; }
  const TailPolicy& tail() const { return tail_; }
  long precision_bits() const { return precision_bits_; }
  bool value_derived() const { return value_derived_; }

  // Partial quotient a_i, i >= 1. Throws CoefficientsExhausted.
  BigInt coeff(std::size_t i) const;
  bool has_coeff(std::size_t i) const;
  // True if coefficients never run out.
  bool unbounded() const { return tail_.kind != TailKind::reject; }

  // Enclosure of the value with width < 2^-precision_bits (when the CF
  // stream or recovered enclosure allows it).
  const Interval& value() const { return value_; }
  Real mid() const { return value_.mid(); }
  // Enclosure at an arbitrary precision. CF angles are re-evaluated; value
  // derived angles return their stored enclosure.
  Interval value_at(long bits) const;
  // Enclosure of the complete quotient [a_j; a_{j+1}, ...], j >= 1, with
  // relative width about 2^-bits if the stream allows it.
  Interval complete_quotient(std::size_t j, long bits) const;

 private:
  std::vector<BigInt> prefix_;
  TailPolicy tail_;
  long precision_bits_ = 0;
  bool value_derived_ = false;
  Interval value_;
};

// Enclosure of ||k theta|| wide enough to be certified at `bits`.
Interval norm_k(const Angle& a, const BigInt& k, long bits);

struct ConvergentRow {
  int n = 0;     // index, rows start at n = 1 with q_1 = 1
  BigInt a;      // partial quotient producing q_n (0 when q_n = 1 = q_0)
  BigInt p;
  BigInt q;
  Interval theta;  // |q_n theta - p_n|
};

// Rows follow the strictly increasing denominators of best approximations:
// q_1 = 1 < q_2 < ... The predecessor pair (p_0, q_0) closes the recurrence
// q_{n+1} = a_{n+1} q_n + q_{n-1} for n = 1.
struct ConvergentTable {
  std::vector<ConvergentRow> rows;
  BigInt p0, q0;

  int depth() const { return static_cast<int>(rows.size()); }
  const ConvergentRow& row(int n) const;  // 1-based, throws ValidationError
  const BigInt& q(int n) const { return row(n).q; }
};

// Up to N denominators q_1..q_N (fewer if the stream stops; `complete`
// says whether all N were produced). Cheap, no real arithmetic.
struct Denominators {
  std::vector<BigInt> q;  // q[0] = q_1
  std::vector<BigInt> p;
  std::vector<BigInt> a;
  BigInt p0, q0;
  int offset = 0;  // standard CF index of row n is n - 1 + offset
  bool complete = true;
};
Denominators denominators(const Angle& a, int N);
// Denominators until the first q_n >= bound (inclusive) or the stream ends.
Denominators denominators_until(const Angle& a, const BigInt& bound, int max_rows = 100000);

ConvergentTable convergents(const Angle& a, int N, long precision_bits = 0);

struct ExponentSchedule {
  double nu = 0;
  int d = 0;
  int r = 0;
  int b = 0;
  double K = 2;
  double tau = 0;
  double sigma = 0;
  double epsilon = 0;
  double eta = 0;
  long N = 0;
  long k_reg = 0;
  BigInt K_tilde;
  BigInt K_yoccoz;
};

// tau_s by the recurrence tau_0 = nu, tau_s = 2 tau_{s-1} + 3.
double tau_recurrence(double nu, int s);
ExponentSchedule exponent_schedule(double nu, int d, int r, int b, double K = 2.0);

enum class Verdict { yes, no, indeterminate };

// lhs <= base^tau, exact when tau is a dyadic rational with small
// numerator, else a certified log comparison with tie margin 2^-64.
Verdict power_le(const BigInt& lhs, const BigInt& base, double tau);
// base^tau <= rhs.
Verdict power_ge(const BigInt& rhs, const BigInt& base, double tau);

bool in_A_tau(const ConvergentTable& table, int s, double tau);
// Same on a bare denominator list (q[0] = q_1).
bool in_A_tau(const std::vector<BigInt>& q, int s, double tau);

struct DSetResult {
  bool member = true;
  std::optional<std::int64_t> witness;
};

// sup_i ||k theta_i|| >= C k^-tau for every integer k in [k_lo, k_hi].
DSetResult d_set_member(std::span<const Angle> angles, std::int64_t k_lo, std::int64_t k_hi,
                        double tau, const Real& C, int threads = 1);
// Largest C for which d_set_member holds on the range (a certified lower
// bound of min_k k^tau sup_i ||k theta_i||, rounded down).
Real fit_d_constant(std::span<const Angle> angles, std::int64_t k_lo, std::int64_t k_hi,
                    double tau, int threads = 1);

struct ExceptionWindow {
  BigInt k;    // k_s
  int angle;   // j_s
  Real end;    // e_s = min(V, ||k_s theta_{j_s}||^-eps)
};

struct ExceptionOptions {
  BigInt u0 = 1000;
  int d = 2;
  // Sampled length of the internal membership check; 0 disables it.
  std::int64_t verify_span = 2000;
  int threads = 1;
};

struct ExceptionScan {
  std::vector<ExceptionWindow> windows;
  long allowed = 0;           // N from the schedule with K = ln V / ln U
  bool tuples_verified = true;
  std::string verify_note;
};

// Exceptions: k with ||k theta_i|| <= k^-(2 nu + 3).
bool is_exception(const Angle& a, const BigInt& k, double nu);
ExceptionScan extract_exceptions(std::span<const Angle> angles, const BigInt& U, const BigInt& V,
                                 double nu, const ExceptionOptions& opt = {});

struct DiophantineString {
  int angle = 0;  // j
  int l = 0;
  int n = 0;
  double tau = 0;
  // Reaches the end of the computed table with an unbounded CF tail; the
  // tau^4 length condition is vacuous and the configuration ends here.
  bool open_ended = false;
};

DiophantineString find_string_covering(std::span<const Angle> angles, const BigInt& U,
                                       const BigInt& V, const ExponentSchedule& sched,
                                       int max_rows = 100000);

struct AlternatedConfig {
  std::vector<DiophantineString> strings;
  std::vector<int> margins;  // l'_i
  double xi = 0;
  double tau = 0;
  bool complete = true;
  std::string failure;
};

struct AlternatedOptions {
  BigInt start = 2;     // lower end of the first window
  int max_rows = 2000;  // per angle
};

AlternatedConfig find_alternated_config(std::span<const Angle> angles,
                                        const ExponentSchedule& sched, double xi, int depth,
                                        const AlternatedOptions& opt = {});
// Every violated invariant as a message; empty when valid.
std::vector<std::string> validate_config(const AlternatedConfig& config,
                                         std::span<const Angle> angles, int max_rows = 2000);
// A_i = ln q_{n_i} / ln q_{l_i} for string i.
double string_exponent(const DiophantineString& s, std::span<const Angle> angles);

// theta~_s = sum_t s^t theta_{t+1} mod 1, s = 1..p.
std::vector<Angle> tilde_angles(std::span<const Angle> base, int p, long precision_bits,
                                int min_coeffs = 8);

}  // namespace circlin::arith
