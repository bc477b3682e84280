#include "circlin/arith.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "circlin/error.hpp"
#include "circlin/parallel.hpp"

namespace circlin::arith {

namespace {

Real pow2(long e, long bits) {
  Real r = Real::zero(bits);
  mpfr_set_ui_2exp(r.get(), 1, e, MPFR_RNDN);
  return r;
}

// width <= |lo| * 2^-rel_bits
bool relatively_tight(const Interval& x, long rel_bits) {
  if (!x.hi.is_finite() || !x.lo.is_finite()) return false;
  Real bound = abs(x.lo);
  mpfr_mul_2si(bound.get(), bound.get(), -rel_bits, MPFR_RNDD);
  return x.width() <= bound;
}

}  // namespace

// ------------------------------------------------------------------ tails

TailPolicy TailPolicy::periodic(std::vector<BigInt> block) {
  TailPolicy t;
  t.kind = TailKind::periodic;
  t.block = std::move(block);
  return t;
}

TailPolicy TailPolicy::constant(const BigInt& a) {
  TailPolicy t;
  t.kind = TailKind::constant;
  t.block = {a};
  return t;
}

TailPolicy TailPolicy::reject() { return TailPolicy{}; }

// ------------------------------------------------------------------ Angle

Angle Angle::from_cf(std::vector<BigInt> coeffs, TailPolicy tail, long precision_bits) {
  if (coeffs.empty()) throw ValidationError("angle: empty CF coefficient list");
  for (const auto& a : coeffs) {
    if (a < 1) throw ValidationError("angle: CF coefficient must be >= 1, got " + to_string(a));
  }
  if (precision_bits < kMinPrecisionBits || precision_bits > kMaxPrecisionBits) {
    throw ValidationError("angle: precision_bits out of range: " + std::to_string(precision_bits));
  }
  if (tail.kind != TailKind::reject) {
    if (tail.block.empty()) throw ValidationError("angle: empty tail block");
    for (const auto& a : tail.block) {
      if (a < 1) throw ValidationError("angle: tail coefficient must be >= 1");
    }
    if (tail.kind == TailKind::constant) tail.block.resize(1);
  } else {
    tail.block.clear();
  }
  Angle x;
  x.prefix_ = std::move(coeffs);
  x.tail_ = std::move(tail);
  x.precision_bits_ = precision_bits;
  x.value_ = x.value_at(precision_bits + 8);
  return x;
}

Angle Angle::from_enclosure(const Interval& value, long precision_bits, int min_coeffs,
                            int max_coeffs) {
  if (!(value.lo.sign() > 0 && value.hi < Real(1))) {
    throw ValidationError("angle: enclosure not inside (0,1)");
  }
  std::vector<BigInt> coeffs;
  Interval y = value;
  while (static_cast<int>(coeffs.size()) < max_coeffs) {
    if (!(y.lo.sign() > 0)) break;
    Interval r = reciprocal(y);
    if (!r.hi.is_finite()) break;
    const BigInt a = r.lo.floor();
    if (a != r.hi.floor() || a < 1) break;
    coeffs.push_back(a);
    y = r + BigInt(-a);
  }
  if (static_cast<int>(coeffs.size()) < std::max(min_coeffs, 1)) {
    throw PrecisionExhausted("CF recovery stalled after " + std::to_string(coeffs.size()) +
                             " coefficients (requested " + std::to_string(min_coeffs) + ")");
  }
  Angle x;
  x.prefix_ = std::move(coeffs);
  x.tail_ = TailPolicy::reject();
  x.precision_bits_ = precision_bits;
  x.value_derived_ = true;
  x.value_ = value;
  return x;
}

bool Angle::has_coeff(std::size_t i) const {
  return i >= 1 && (i <= prefix_.size() || tail_.kind != TailKind::reject);
}

BigInt Angle::coeff(std::size_t i) const {
  if (i == 0) throw ValidationError("angle: coefficient index starts at 1");
  if (i <= prefix_.size()) return prefix_[i - 1];
  switch (tail_.kind) {
    case TailKind::constant: return tail_.block[0];
    case TailKind::periodic: return tail_.block[(i - 1 - prefix_.size()) % tail_.block.size()];
    case TailKind::reject: break;
  }
  throw CoefficientsExhausted("a_" + std::to_string(i) + " requested but only " +
                              std::to_string(prefix_.size()) + " coefficients are known");
}

Interval Angle::complete_quotient(std::size_t j, long bits) const {
  if (value_derived_) {
    // Recover from the stored value: zeta_1 = 1/x, zeta_{j+1} = 1/(zeta_j - a_j).
    Interval z = reciprocal(value_);
    for (std::size_t i = 1; i < j; ++i) z = reciprocal(z + BigInt(-coeff(i)));
    return z;
  }
  if (!has_coeff(j)) coeff(j);  // throws
  const long wbits = bits + 16;
  std::size_t m = 16;
  Interval z;
  for (;;) {
    std::size_t last = j + m - 1;
    bool exhausted = false;
    if (tail_.kind == TailKind::reject && last > prefix_.size()) {
      last = prefix_.size();
      exhausted = true;
    }
    // Tail beyond `last` is a complete quotient >= 1.
    z = Interval::at_least(Real(1).rounded(wbits));
    for (std::size_t i = last; i >= j; --i) {
      z = reciprocal(z) + coeff(i);
      if (i == j) break;
    }
    if (exhausted || relatively_tight(z, bits) || m > static_cast<std::size_t>(64 * wbits)) break;
    m *= 2;
  }
  return z;
}

Interval Angle::value_at(long bits) const {
  if (value_derived_) return value_;
  return reciprocal(complete_quotient(1, bits + 4));
}

namespace {

Interval norm_from_value(const Interval& x, const BigInt& k) { return dist_to_int(x * k); }

}  // namespace

Interval norm_k(const Angle& a, const BigInt& k, long bits) {
  return norm_from_value(a.value_at(bits + bit_length(k) + 8), k);
}

// ------------------------------------------------------- denominators

namespace {

struct DenomState {
  Denominators d;
  std::size_t next_std = 1;  // next standard CF index to consume
  BigInt pm2, qm2, pm1, qm1;  // standard (p,q)_{k-2}, (p,q)_{k-1}
};

DenomState denom_start(const Angle& a) {
  DenomState st;
  // Standard indexing: (p,q)_{-1} = (1,0), (p,q)_0 = (0,1).
  st.pm2 = 1;
  st.qm2 = 0;
  st.pm1 = 0;
  st.qm1 = 1;
  const bool a1_is_one = a.coeff(1) == 1;
  st.d.offset = a1_is_one ? 1 : 0;
  if (!a1_is_one) {
    st.d.p0 = 1;
    st.d.q0 = 0;
    st.d.q.push_back(1);
    st.d.p.push_back(0);
    st.d.a.push_back(0);
  } else {
    st.d.p0 = 0;
    st.d.q0 = 1;
  }
  return st;
}

// Appends the next row; false if the stream ended.
bool denom_step(const Angle& a, DenomState& st) {
  if (!a.has_coeff(st.next_std)) return false;
  const BigInt ak = a.coeff(st.next_std++);
  BigInt p = ak * st.pm1 + st.pm2;
  BigInt q = ak * st.qm1 + st.qm2;
  st.pm2 = st.pm1;
  st.qm2 = st.qm1;
  st.pm1 = p;
  st.qm1 = q;
  st.d.q.push_back(q);
  st.d.p.push_back(p);
  st.d.a.push_back(ak);
  return true;
}

}  // namespace

Denominators denominators(const Angle& a, int N) {
  DenomState st = denom_start(a);
  while (static_cast<int>(st.d.q.size()) < N) {
    if (!denom_step(a, st)) {
      st.d.complete = false;
      break;
    }
  }
  if (static_cast<int>(st.d.q.size()) > N) {
    st.d.q.resize(N);
    st.d.p.resize(N);
    st.d.a.resize(N);
  }
  return st.d;
}

Denominators denominators_until(const Angle& a, const BigInt& bound, int max_rows) {
  DenomState st = denom_start(a);
  for (;;) {
    if (!st.d.q.empty() && st.d.q.back() >= bound) break;
    if (static_cast<int>(st.d.q.size()) >= max_rows || !denom_step(a, st)) {
      st.d.complete = false;
      break;
    }
  }
  return st.d;
}

const ConvergentRow& ConvergentTable::row(int n) const {
  if (n < 1 || n > depth()) {
    throw ValidationError("convergent row " + std::to_string(n) + " outside table depth " +
                          std::to_string(depth()));
  }
  return rows[static_cast<std::size_t>(n - 1)];
}

ConvergentTable convergents(const Angle& a, int N, long precision_bits) {
  if (N < 0) throw ValidationError("convergents: N must be >= 0");
  if (precision_bits <= 0) precision_bits = a.precision_bits();
  const Denominators d = denominators(a, N);
  if (!d.complete) {
    throw CoefficientsExhausted("convergent n=" + std::to_string(N) + " needs a_" +
                                std::to_string(N - 1 + d.offset));
  }
  ConvergentTable t;
  t.p0 = d.p0;
  t.q0 = d.q0;
  const long wbits = precision_bits + 16;
  for (int n = 1; n <= N; ++n) {
    ConvergentRow r;
    r.n = n;
    r.a = d.a[n - 1];
    r.p = d.p[n - 1];
    r.q = d.q[n - 1];
    const std::size_t k = static_cast<std::size_t>(n - 1 + d.offset);  // standard index
    if (a.value_derived()) {
      Interval x = a.value_at(wbits);
      r.theta = abs(x * r.q + BigInt(-r.p));
    } else {
      // theta_n = 1/(q_k zeta_{k+1} + q_{k-1}) in standard indexing.
      const BigInt& qkm1 = n >= 2 ? d.q[n - 2] : d.q0;
      Interval z = a.complete_quotient(k + 1, precision_bits);
      Interval den = z * r.q + qkm1;
      r.theta = reciprocal(den);
    }
    if (!(r.theta.lo.sign() > 0) || !relatively_tight(r.theta, 10)) {
      const std::string msg = "theta_" + std::to_string(n) + " not separated from 0 at " +
                              std::to_string(precision_bits) + " bits";
      if (a.value_derived() || a.unbounded()) throw PrecisionExhausted(msg);
      throw CoefficientsExhausted(msg);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

// ------------------------------------------------------------ schedule

double tau_recurrence(double nu, int s) {
  double tau = nu;
  for (int i = 1; i <= s; ++i) tau = 2 * tau + 3;
  return tau;
}

ExponentSchedule exponent_schedule(double nu, int d, int r, int b, double K) {
  if (!(nu > 0)) throw ValidationError("schedule: nu must be > 0");
  if (d < 2) throw ValidationError("schedule: d must be >= 2");
  if (r < 1) throw ValidationError("schedule: r must be >= 1");
  if (b < 1) throw ValidationError("schedule: b must be >= 1");
  if (!(K >= 1)) throw ValidationError("schedule: K must be >= 1");
  ExponentSchedule s;
  s.nu = nu;
  s.d = d;
  s.r = r;
  s.b = b;
  s.K = K;
  s.tau = tau_recurrence(nu, d - 1);
  s.sigma = 1.0 / (2 * s.tau * s.tau);
  s.epsilon = 1.0 / (2 * nu + 2);
  s.eta = (2 * nu + 3) / (2 * nu + 2);
  s.N = static_cast<long>(std::floor(std::log(K) / std::log(s.eta))) + 2;
  s.k_reg = static_cast<long>(std::floor((r + 2) * (2 + s.tau))) + 2;
  PrecisionScope scope(256);
  Real tau(s.tau);
  const Real t = pow(tau, Real(4L * b + 1));
  s.K_tilde = 2 * t.floor();
  s.K_yoccoz = (Real(4) * tau * Real(s.K_tilde)).floor();
  return s;
}

// ---------------------------------------------------- power comparisons

namespace {

enum class Cmp { less, equal, greater, tie };

// lhs versus base^tau, lhs >= 1, base >= 1, tau >= 0.
Cmp cmp_power(const BigInt& lhs, const BigInt& base, double tau) {
  if (lhs < 1 || base < 1) throw ValidationError("power comparison needs positive integers");
  if (!(tau >= 0) || !std::isfinite(tau)) throw ValidationError("power comparison: bad exponent");
  if (base == 1) return lhs == 1 ? Cmp::equal : Cmp::greater;
  constexpr long kExactBitLimit = 1L << 22;
  for (int e = 0; e <= 6; ++e) {
    const double scaled = std::ldexp(tau, e);
    if (scaled != std::floor(scaled) || scaled > 65536) continue;
    const unsigned long m = static_cast<unsigned long>(scaled);
    if (bit_length(base) * static_cast<long>(m) > kExactBitLimit ||
        bit_length(lhs) * (1L << e) > kExactBitLimit) {
      break;
    }
    BigInt l, rr;
    mpz_pow_ui(l.get_mpz_t(), lhs.get_mpz_t(), 1UL << e);
    mpz_pow_ui(rr.get_mpz_t(), base.get_mpz_t(), m);
    const int c = cmp(l, rr);
    return c < 0 ? Cmp::less : (c > 0 ? Cmp::greater : Cmp::equal);
  }
  // Certified log comparison.
  for (long bits = 128; bits <= kMaxPrecisionBits; bits *= 2) {
    const long wb = bits + bit_length(BigInt(bit_length(lhs) + bit_length(base)));
    Interval ll = log_pos(Interval::exact(lhs, wb));
    Interval lb = log_pos(Interval::exact(base, wb));
    Real t = Real::zero(wb);
    mpfr_set_d(t.get(), tau, MPFR_RNDN);  // exact: doubles fit
    Interval diff = ll - lb * Interval::point(t);
    const Real margin = pow2(-64, wb);
    if (diff.hi <= -margin) return Cmp::less;
    if (diff.lo >= margin) return Cmp::greater;
    if (diff.lo >= -margin && diff.hi <= margin) return Cmp::tie;
  }
  return Cmp::tie;
}

}  // namespace

Verdict power_le(const BigInt& lhs, const BigInt& base, double tau) {
  switch (cmp_power(lhs, base, tau)) {
    case Cmp::less:
    case Cmp::equal: return Verdict::yes;
    case Cmp::greater: return Verdict::no;
    case Cmp::tie: break;
  }
  return Verdict::indeterminate;
}

Verdict power_ge(const BigInt& rhs, const BigInt& base, double tau) {
  switch (cmp_power(rhs, base, tau)) {
    case Cmp::greater:
    case Cmp::equal: return Verdict::yes;
    case Cmp::less: return Verdict::no;
    case Cmp::tie: break;
  }
  return Verdict::indeterminate;
}

bool in_A_tau(const std::vector<BigInt>& q, int s, double tau) {
  if (s < 1 || s + 1 > static_cast<int>(q.size())) {
    throw ValidationError("in_A_tau: rows " + std::to_string(s) + " and " +
                          std::to_string(s + 1) + " are not both available");
  }
  return power_le(q[s], q[s - 1], tau) == Verdict::yes;
}

bool in_A_tau(const ConvergentTable& table, int s, double tau) {
  if (s < 1 || s + 1 > table.depth()) {
    throw ValidationError("in_A_tau: rows " + std::to_string(s) + " and " +
                          std::to_string(s + 1) + " are not both available");
  }
  return power_le(table.q(s + 1), table.q(s), tau) == Verdict::yes;
}

// --------------------------------------------------------------- D sets

namespace {

struct ValueCache {
  std::span<const Angle> angles;
  std::map<long, std::vector<Interval>> by_bits;

  const std::vector<Interval>& at(long bits) {
    auto it = by_bits.find(bits);
    if (it != by_bits.end()) return it->second;
    std::vector<Interval> v;
    v.reserve(angles.size());
    for (const auto& a : angles) v.push_back(a.value_at(bits));
    return by_bits.emplace(bits, std::move(v)).first->second;
  }
};

// sup_i ||k theta_i|| as an enclosure at the given value precision.
Interval sup_norm(const std::vector<Interval>& xs, const BigInt& k) {
  Interval s = norm_from_value(xs[0], k);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    Interval t = norm_from_value(xs[i], k);
    s = Interval(max(s.lo, t.lo), max(s.hi, t.hi));
  }
  return s;
}

long base_bits(std::int64_t k_hi, double tau) {
  const long kb = bit_length(BigInt(static_cast<long>(std::max<std::int64_t>(k_hi, 1))));
  return std::max<long>(working_precision(),
                        static_cast<long>(std::ceil((tau + 2) * static_cast<double>(kb))) + 64);
}

}  // namespace

DSetResult d_set_member(std::span<const Angle> angles, std::int64_t k_lo, std::int64_t k_hi,
                        double tau, const Real& C, int threads) {
  if (angles.empty()) throw ValidationError("d_set_member: no angles");
  DSetResult res;
  if (k_lo > k_hi) return res;
  if (k_lo < 1) throw ValidationError("d_set_member: k range must start at 1 or above");
  const long b0 = base_bits(k_hi, tau);
  const std::int64_t count = k_hi - k_lo + 1;
  const int chunks = std::max(1, threads);
  std::vector<std::optional<std::int64_t>> first(static_cast<std::size_t>(chunks));
  const std::int64_t per = (count + chunks - 1) / chunks;
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
    ValueCache cache{angles, {}};
    const std::int64_t lo = k_lo + static_cast<std::int64_t>(c) * per;
    const std::int64_t hi = std::min(k_hi, lo + per - 1);
    for (std::int64_t k = lo; k <= hi; ++k) {
      const BigInt kz(static_cast<long>(k));
      bool decided = false;
      for (long bits = b0; bits <= kMaxPrecisionBits; bits *= 2) {
        const auto& xs = cache.at(bits);
        Interval s = sup_norm(xs, kz);
        Interval th = Interval::point(C) *
                      pow_pos(Interval::exact(kz, bits), Real(-tau).rounded(bits));
        if (s.lo >= th.hi) {
          decided = true;
          break;
        }
        if (s.hi < th.lo) {
          first[c] = k;
          return;
        }
      }
      if (!decided) {
        throw PrecisionExhausted("d_set_member undecided at k=" + std::to_string(k));
      }
    }
  });
  for (const auto& f : first) {
    if (f) {
      res.member = false;
      res.witness = f;
      break;
    }
  }
  return res;
}

Real fit_d_constant(std::span<const Angle> angles, std::int64_t k_lo, std::int64_t k_hi,
                    double tau, int threads) {
  if (angles.empty()) throw ValidationError("fit_d_constant: no angles");
  if (k_lo < 1 || k_lo > k_hi) throw ValidationError("fit_d_constant: empty or invalid range");
  const long bits = base_bits(k_hi, tau);
  const std::int64_t count = k_hi - k_lo + 1;
  const int chunks = std::max(1, threads);
  const std::int64_t per = (count + chunks - 1) / chunks;
  std::vector<Real> best(static_cast<std::size_t>(chunks), Real::zero(bits));
  std::vector<char> seen(static_cast<std::size_t>(chunks), 0);
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
    ValueCache cache{angles, {}};
    const auto& xs = cache.at(bits);
    const std::int64_t lo = k_lo + static_cast<std::int64_t>(c) * per;
    const std::int64_t hi = std::min(k_hi, lo + per - 1);
    for (std::int64_t k = lo; k <= hi; ++k) {
      const BigInt kz(static_cast<long>(k));
      Interval s = sup_norm(xs, kz);
      Interval v = Interval::point(s.lo) * pow_pos(Interval::exact(kz, bits), Real(tau).rounded(bits));
      if (!seen[c] || v.lo < best[c]) {
        best[c] = v.lo;
        seen[c] = 1;
      }
    }
  });
  Real out = Real::zero(bits);
  bool any = false;
  for (std::size_t c = 0; c < best.size(); ++c) {
    if (!seen[c]) continue;
    if (!any || best[c] < out) out = best[c];
    any = true;
  }
  return out;
}

// ------------------------------------------------------------ exceptions

bool is_exception(const Angle& a, const BigInt& k, double nu) {
  const double e = 2 * nu + 3;
  const long kb = bit_length(k);
  for (long bits = static_cast<long>(std::ceil((e + 1) * static_cast<double>(kb))) + 64;
       bits <= kMaxPrecisionBits; bits *= 2) {
    Interval n = norm_k(a, k, bits);
    Interval t = pow_pos(Interval::exact(k, bits), Real(-e).rounded(bits));
    if (n.hi <= t.lo) return true;
    if (n.lo > t.hi) return false;
    if (a.value_derived()) break;
  }
  throw PrecisionExhausted("exception test undecided at k=" + to_string(k));
}

ExceptionScan extract_exceptions(std::span<const Angle> angles, const BigInt& U, const BigInt& V,
                                 double nu, const ExceptionOptions& opt) {
  if (angles.empty()) throw ValidationError("extract_exceptions: no angles");
  if (U > V) throw ValidationError("extract_exceptions: U > V");
  if (!(nu > 0)) throw ValidationError("extract_exceptions: nu must be > 0");
  const BigInt u0 = std::max(opt.u0, BigInt(2));
  if (U < u0) {
    throw ValidationError("extract_exceptions: U=" + to_string(U) + " below U_0=" + to_string(u0));
  }
  const double e = 2 * nu + 3;
  const double eps = 1.0 / (2 * nu + 2);
  const double eta = (2 * nu + 3) / (2 * nu + 2);
  ExceptionScan scan;
  {
    PrecisionScope ps(128);
    const double lnU = log(Real(U)).to_double();
    const double lnV = log(Real(V)).to_double();
    const double K = std::max(1.0, lnV / lnU);
    scan.allowed = static_cast<long>(std::floor(std::log(K) / std::log(eta))) + 2;
  }

  // Exception sets through convergent multiples (Legendre: every exception
  // k >= 2 is m q_n with ||k theta|| = m theta_n).
  std::vector<std::set<BigInt>> E(angles.size());
  parallel_for(angles.size(), opt.threads, [&](std::size_t i) {
    const Denominators d = denominators_until(angles[i], V + 1);
    if (!d.complete) {
      throw CoefficientsExhausted("angle " + std::to_string(i) +
                                  ": denominators do not reach V=" + to_string(V));
    }
    for (const auto& q : d.q) {
      if (q > V) break;
      BigInt m = (U + q - 1) / q;
      if (m < 1) m = 1;
      for (;; ++m) {
        const BigInt k = m * q;
        if (k > V) break;
        if (!is_exception(angles[i], k, nu)) break;
        E[i].insert(k);
      }
    }
  });

  std::vector<char> excluded(angles.size(), 0);
  BigInt pos = U;
  for (;;) {
    std::optional<BigInt> best;
    int who = -1;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (excluded[i]) continue;
      auto it = E[i].lower_bound(pos);
      if (it == E[i].end()) continue;
      if (!best || *it < *best) {
        best = *it;
        who = static_cast<int>(i);
      }
    }
    if (!best || *best > V) break;
    ExceptionWindow w;
    w.k = *best;
    w.angle = who;
    {
      const long bits = 128 + bit_length(w.k) * static_cast<long>(std::ceil(e + 1));
      Interval n = norm_k(angles[static_cast<std::size_t>(who)], w.k, bits);
      Real end = pow(n.mid(), Real(-eps).rounded(bits));
      Real v(V);
      w.end = (v.rounded(bits) < end) ? v.rounded(bits) : end;
    }
    excluded[static_cast<std::size_t>(who)] = 1;
    pos = w.end.floor() + 1;
    scan.windows.push_back(std::move(w));
    if (static_cast<long>(scan.windows.size()) > scan.allowed) {
      throw ValidationError("extract_exceptions: more than N=" + std::to_string(scan.allowed) +
                            " exceptions in [" + to_string(U) + ", " + to_string(V) + "]");
    }
  }

  // Internal check: non-excepted (d-1)-tuples on a sampled sub-range.
  if (opt.verify_span > 0 && opt.d >= 2) {
    std::vector<int> free;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (!excluded[i]) free.push_back(static_cast<int>(i));
    }
    const int t = opt.d - 1;
    if (static_cast<int>(free.size()) < t) {
      scan.verify_note = "fewer non-excepted angles than d-1; nothing to verify";
    } else if (U <= BigInt(static_cast<long>(1) << 40)) {
      const std::int64_t lo = U.get_si();
      const BigInt hiz = std::min<BigInt>(V, U + BigInt(static_cast<long>(opt.verify_span)));
      const std::int64_t hi = hiz.get_si();
      std::vector<int> idx(static_cast<std::size_t>(t));
      for (int i = 0; i < t; ++i) idx[static_cast<std::size_t>(i)] = i;
      int checked = 0;
      const Real one = Real(1);
      for (;;) {
        std::vector<Angle> tuple;
        for (int i : idx) tuple.push_back(angles[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])]);
        DSetResult r = d_set_member(tuple, lo, hi, e, one, opt.threads);
        ++checked;
        if (!r.member) {
          scan.tuples_verified = false;
          std::string names;
          for (int i : idx) names += (names.empty() ? "" : ",") + std::to_string(free[static_cast<std::size_t>(i)]);
          scan.verify_note = "tuple (" + names + ") fails at k=" + std::to_string(*r.witness);
          break;
        }
        if (checked >= 64) {
          scan.verify_note = "sampled 64 tuples";
          break;
        }
        // Next combination.
        int pos_i = t - 1;
        const int nfree = static_cast<int>(free.size());
        while (pos_i >= 0 && idx[static_cast<std::size_t>(pos_i)] == nfree - t + pos_i) --pos_i;
        if (pos_i < 0) break;
        ++idx[static_cast<std::size_t>(pos_i)];
        for (int j = pos_i + 1; j < t; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
    } else {
      scan.verify_note = "U too large for the sampled check";
    }
  }
  return scan;
}

// ------------------------------------------------------------- strings

DiophantineString find_string_covering(std::span<const Angle> angles, const BigInt& U,
                                       const BigInt& V, const ExponentSchedule& sched,
                                       int max_rows) {
  if (angles.empty()) throw ValidationError("find_string_covering: no angles");
  if (U < 1 || U > V) throw ValidationError("find_string_covering: need 1 <= U <= V");
  if (U > 1 && power_le(V, U, sched.K) != Verdict::yes) {
    throw ValidationError("find_string_covering: V exceeds U^K for K=" + std::to_string(sched.K));
  }
  std::string state;
  for (std::size_t j = 0; j < angles.size(); ++j) {
    Denominators d = denominators_until(angles[j], V, max_rows);
    if (d.q.empty() || d.q.back() < V) {
      state += " angle " + std::to_string(j) + ": prefix exhausted at q=" +
               (d.q.empty() ? std::string("-") : to_string(d.q.back())) + ";";
      continue;
    }
    int l = 0;
    for (int s = 1; s <= static_cast<int>(d.q.size()); ++s) {
      if (d.q[s - 1] <= U) l = s;
    }
    int n = 0;
    for (int s = 1; s <= static_cast<int>(d.q.size()); ++s) {
      if (d.q[s - 1] >= V) {
        n = s;
        break;
      }
    }
    if (n == l) {
      // U = V = q_l: extend by one row.
      Denominators more = denominators(angles[j], l + 1);
      if (!more.complete) {
        state += " angle " + std::to_string(j) + ": prefix exhausted at row " + std::to_string(l) + ";";
        continue;
      }
      d = more;
      n = l + 1;
    }
    int bad = 0;
    for (int s = l; s <= n - 1; ++s) {
      if (!in_A_tau(d.q, s, sched.tau)) {
        bad = s;
        break;
      }
    }
    if (bad == 0) {
      DiophantineString out;
      out.angle = static_cast<int>(j);
      out.l = l;
      out.n = n;
      out.tau = sched.tau;
      return out;
    }
    state += " angle " + std::to_string(j) + ": rows [" + std::to_string(l) + "," +
             std::to_string(n) + "] break at s=" + std::to_string(bad) + ";";
  }
  throw CertificationError("no covering string for [" + to_string(U) + ", " + to_string(V) +
                           "]:" + state);
}

namespace {

struct AngleRows {
  std::vector<BigInt> q;
  std::vector<char> inA;  // inA[s-1]: s in A_tau (needs q_{s+1})
  bool exhausted = false;
};

AngleRows angle_rows(const Angle& a, double tau, int max_rows) {
  AngleRows r;
  Denominators d = denominators(a, max_rows);
  r.q = std::move(d.q);
  r.exhausted = !d.complete;
  r.inA.assign(r.q.size(), 0);
  for (std::size_t s = 1; s < r.q.size(); ++s) {
    r.inA[s - 1] = in_A_tau(r.q, static_cast<int>(s), tau) ? 1 : 0;
  }
  return r;
}

// Long integers abbreviated for messages.
std::string short_text(const BigInt& z) {
  const std::string t = to_string(z);
  return t.size() <= 40 ? t : t.substr(0, 12) + "... (" + std::to_string(t.size()) + " digits)";
}

// Largest l' <= l with l'..l-1 in A_tau and q_{l'} <= q_l^xi, or 0.
int find_margin(const AngleRows& r, int l, double xi) {
  for (int lp = l; lp >= 1; --lp) {
    if (lp < l && !r.inA[static_cast<std::size_t>(lp - 1)]) break;
    if (power_le(r.q[lp - 1], r.q[l - 1], xi) == Verdict::yes) return lp;
  }
  return 0;
}

}  // namespace

AlternatedConfig find_alternated_config(std::span<const Angle> angles,
                                        const ExponentSchedule& sched, double xi, int depth,
                                        const AlternatedOptions& opt) {
  if (depth < 0) throw ValidationError("find_alternated_config: depth must be >= 0");
  if (!(xi > 0)) throw ValidationError("find_alternated_config: xi must be > 0");
  AlternatedConfig cfg;
  cfg.xi = xi;
  cfg.tau = sched.tau;
  if (depth == 0) return cfg;
  if (angles.empty()) throw ValidationError("find_alternated_config: no angles");
  const double tau = sched.tau;
  const double tau2 = tau * tau;
  const double tau4 = tau2 * tau2;
  std::vector<AngleRows> rows;
  rows.reserve(angles.size());
  for (const auto& a : angles) rows.push_back(angle_rows(a, tau, opt.max_rows));

  std::optional<BigInt> prev_qn;
  for (int i = 0; i < depth; ++i) {
    bool found = false;
    for (std::size_t j = 0; j < angles.size() && !found; ++j) {
      const AngleRows& r = rows[j];
      const int nrows = static_cast<int>(r.q.size());
      for (int l = 1; l < nrows && !found; ++l) {
        const BigInt& ql = r.q[l - 1];
        if (!prev_qn) {
          if (ql < opt.start) continue;
        } else {
          // q_{n_prev}^{1/tau^2} <= q_l <= q_{n_prev}^{1/tau}
          if (power_le(*prev_qn, ql, tau2) != Verdict::yes) continue;
          if (power_ge(*prev_qn, ql, tau) != Verdict::yes) break;  // larger l fail too
        }
        // Maximal string from l.
        int n = l;
        while (n < nrows - 1 && r.inA[static_cast<std::size_t>(n - 1)]) ++n;
        if (n == nrows - 1 && r.inA[static_cast<std::size_t>(n - 1)]) n = nrows;  // reaches table end
        if (n == l) continue;
        const bool open = n == nrows && !r.exhausted;
        if (!open && power_ge(r.q[n - 1], ql, tau4) != Verdict::yes) continue;
        const int lp = find_margin(r, l, xi);
        if (lp == 0) continue;
        DiophantineString s;
        s.angle = static_cast<int>(j);
        s.l = l;
        s.n = n;
        s.tau = tau;
        s.open_ended = open;
        cfg.strings.push_back(s);
        cfg.margins.push_back(lp);
        prev_qn = r.q[n - 1];
        found = true;
      }
    }
    if (!found) {
      cfg.complete = false;
      cfg.failure = "no valid string for position " + std::to_string(i + 1) +
                    (prev_qn ? " after q_n=" + short_text(*prev_qn) : std::string()) +
                    " within " + std::to_string(opt.max_rows) + " rows (CF prefixes exhausted)";
      break;
    }
    if (cfg.strings.back().open_ended) break;
  }
  const auto problems = validate_config(cfg, angles, opt.max_rows);
  if (!problems.empty()) {
    throw CertificationError("alternated configuration failed validation: " + problems.front());
  }
  return cfg;
}

std::vector<std::string> validate_config(const AlternatedConfig& config,
                                         std::span<const Angle> angles, int max_rows) {
  std::vector<std::string> out;
  const double tau = config.tau;
  const double tau2 = tau * tau;
  if (config.margins.size() != config.strings.size()) out.push_back("margins/strings size mismatch");
  std::map<int, std::vector<BigInt>> qs;
  auto q_of = [&](int j) -> const std::vector<BigInt>& {
    auto it = qs.find(j);
    if (it == qs.end()) it = qs.emplace(j, denominators(angles[static_cast<std::size_t>(j)], max_rows).q).first;
    return it->second;
  };
  for (std::size_t i = 0; i < config.strings.size(); ++i) {
    const auto& s = config.strings[i];
    const std::string tag = "string " + std::to_string(i + 1) + ": ";
    if (s.angle < 0 || s.angle >= static_cast<int>(angles.size())) {
      out.push_back(tag + "angle index out of range");
      continue;
    }
    const auto& q = q_of(s.angle);
    if (s.l < 1 || s.n <= s.l || s.n > static_cast<int>(q.size())) {
      out.push_back(tag + "indices outside table");
      continue;
    }
    for (int t = s.l; t <= s.n - 1; ++t) {
      if (t + 1 > static_cast<int>(q.size())) break;  // open-ended string at table end
      if (!in_A_tau(q, t, tau)) out.push_back(tag + "row " + std::to_string(t) + " not in A_tau");
    }
    if (s.open_ended && i + 1 < config.strings.size()) out.push_back(tag + "open-ended string is not last");
    if (!s.open_ended && power_ge(q[s.n - 1], q[s.l - 1], tau2 * tau2) != Verdict::yes) {
      out.push_back(tag + "q_l^(tau^2) > q_n^(1/tau^2)");
    }
    if (i < config.margins.size()) {
      const int lp = config.margins[i];
      if (lp < 1 || lp > s.l) {
        out.push_back(tag + "margin index out of range");
      } else {
        if (power_le(q[lp - 1], q[s.l - 1], config.xi) != Verdict::yes) {
          out.push_back(tag + "q_{l'} > q_l^xi");
        }
        for (int t = lp; t <= s.l - 1; ++t) {
          if (!in_A_tau(q, t, tau)) out.push_back(tag + "margin row " + std::to_string(t) + " not in A_tau");
        }
      }
    }
    if (i + 1 < config.strings.size()) {
      const auto& nx = config.strings[i + 1];
      if (nx.angle < 0 || nx.angle >= static_cast<int>(angles.size())) continue;
      const auto& q2 = q_of(nx.angle);
      if (nx.l < 1 || nx.l > static_cast<int>(q2.size())) continue;
      const BigInt& qn = q[s.n - 1];
      const BigInt& ql2 = q2[nx.l - 1];
      if (power_le(qn, ql2, tau2) != Verdict::yes) out.push_back(tag + "next l below q_n^(1/tau^2)");
      if (power_ge(qn, ql2, tau) != Verdict::yes) out.push_back(tag + "next l above q_n^(1/tau)");
    }
  }
  return out;
}

double string_exponent(const DiophantineString& s, std::span<const Angle> angles) {
  const Denominators d = denominators(angles[static_cast<std::size_t>(s.angle)], s.n);
  if (!d.complete) throw CoefficientsExhausted("string exponent needs row " + std::to_string(s.n));
  PrecisionScope ps(128);
  const Real ln_l = log(Real(d.q[s.l - 1]));
  if (ln_l.is_zero()) return std::numeric_limits<double>::infinity();
  return (log(Real(d.q[s.n - 1])) / ln_l).to_double();
}

// -------------------------------------------------------------- tildes

std::vector<Angle> tilde_angles(std::span<const Angle> base, int p, long precision_bits,
                                int min_coeffs) {
  const int d = static_cast<int>(base.size());
  if (d < 1) throw ValidationError("tilde_angles: no base angles");
  if (p < d) throw ValidationError("tilde_angles: need p >= d");
  const long wbits = precision_bits + 64 + static_cast<long>(d) * bit_length(BigInt(p));
  std::vector<Interval> xs;
  for (const auto& a : base) xs.push_back(a.value_at(wbits));
  std::vector<Angle> out;
  for (int s = 1; s <= p; ++s) {
    Interval sum = Interval::exact(BigInt(0), wbits);
    BigInt w = 1;
    for (int t = 0; t < d; ++t) {
      sum = sum + xs[static_cast<std::size_t>(t)] * w;
      w *= s;
    }
    if (sum.straddles_integer()) {
      throw PrecisionExhausted("tilde angle " + std::to_string(s) + " straddles an integer");
    }
    const BigInt f = sum.lo.floor();
    sum = sum + BigInt(-f);
    out.push_back(Angle::from_enclosure(sum, precision_bits, min_coeffs));
  }
  return out;
}

}  // namespace circlin::arith
