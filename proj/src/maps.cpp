#include "circlin/maps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "circlin/error.hpp"
#include "circlin/parallel.hpp"

namespace circlin::maps {

namespace {

std::shared_ptr<Node> make_node(NodeKind k) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->shift = Real::zero(working_precision());
  return n;
}

bool is_identity(const Node& n) { return n.kind == NodeKind::rotation && n.shift.is_zero(); }

// Rough growth rate of Taylor coefficients (2 pi times total frequency).
double node_scale(const Node& n) {
  switch (n.kind) {
    case NodeKind::rotation: return 1.0;
    case NodeKind::trig: {
      double s = 1.0;
      for (const auto& h : n.harmonics) s = std::max(s, 2 * M_PI * h.m);
      return s;
    }
    case NodeKind::compose: return node_scale(*n.outer) + node_scale(*n.inner);
    case NodeKind::inverse: return node_scale(*n.inner);
    case NodeKind::power:
      return node_scale(*n.inner) * static_cast<double>(std::min<long>(std::labs(n.exponent), 64));
  }
  return 1.0;
}

void apply_node(const Node& n, const Series& X, Series& Y, Series* LD);

// ----------------------------------------------------------- double path

double eval_double_node(const Node& n, double x, double* d);

double solve_double(const Node& g, double r) {
  // g(y + k) = g(y) + k brackets the root in [lo, lo + 1].
  const double gr = eval_double_node(g, r, nullptr);
  const double shift = std::floor(r - gr);
  double lo = r + shift, hi = lo + 1;
  double y = r - (gr - r);
  if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double dg = 0;
    const double v = eval_double_node(g, y, &dg) - r;
    if (v > 0) {
      hi = std::min(hi, y);
    } else {
      lo = std::max(lo, y);
    }
    double next = (dg > 0) ? y - v / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - y);
    y = next;
    if (step <= 4e-16 * (1 + std::fabs(y)) || hi - lo <= 4e-16 * (1 + std::fabs(y))) break;
  }
  return y;
}

double eval_double_node(const Node& n, double x, double* d) {
  switch (n.kind) {
    case NodeKind::rotation:
      if (d) *d = 1;
      return x + n.shift.to_double();
    case NodeKind::trig: {
      double y = x + n.shift.to_double();
      double dy = 1;
      for (const auto& h : n.harmonics) {
        const double mx = static_cast<double>(h.m) * x;
        const double ph = 2 * M_PI * (mx - std::floor(mx));
        const double s = std::sin(ph), c = std::cos(ph);
        const double a = h.alpha.to_double(), b = h.beta.to_double();
        y += a * s + b * c;
        dy += 2 * M_PI * h.m * (a * c - b * s);
      }
      if (d) *d = dy;
      return y;
    }
    case NodeKind::compose: {
      double d1 = 1, d2 = 1;
      const double y1 = eval_double_node(*n.inner, x, d ? &d1 : nullptr);
      const double y = eval_double_node(*n.outer, y1, d ? &d2 : nullptr);
      if (d) *d = d1 * d2;
      return y;
    }
    case NodeKind::inverse: {
      const double fl = std::floor(x);
      const double y = solve_double(*n.inner, x - fl) + fl;
      if (d) {
        double dg = 1;
        eval_double_node(*n.inner, y, &dg);
        *d = 1 / dg;
      }
      return y;
    }
    case NodeKind::power: {
      double y = x, dd = 1;
      const long k = std::labs(n.exponent);
      for (long i = 0; i < k; ++i) {
        double di = 1;
        if (n.exponent > 0) {
          y = eval_double_node(*n.inner, y, d ? &di : nullptr);
        } else {
          const double fl = std::floor(y);
          const double z = solve_double(*n.inner, y - fl) + fl;
          if (d) {
            double dg = 1;
            eval_double_node(*n.inner, z, &dg);
            di = 1 / dg;
          }
          y = z;
        }
        dd *= di;
      }
      if (d) *d = dd;
      return y;
    }
  }
  return x;
}

// ---------------------------------------------------------- series path

Series zeros(std::size_t n) { return Series(n, Real::zero(working_precision())); }

void add_into(Series& acc, const Series& s) {
  for (std::size_t i = 0; i < acc.size() && i < s.size(); ++i) acc[i] += s[i];
}

void apply_trig(const Node& n, const Series& X, Series& Y, Series* LD) {
  const std::size_t L = X.size();
  const long bits = working_precision();
  const Real two_pi = Real::two_pi(bits);
  Y = X;
  Y[0] += n.shift;
  Series D;
  if (LD) {
    D = zeros(L);
    D[0] = Real(1);
  }
  Series arg(L), S, C;
  for (const auto& h : n.harmonics) {
    const Real m(static_cast<long>(h.m));
    const Real tm = two_pi * m;
    arg[0] = two_pi * frac(X[0] * m);
    for (std::size_t j = 1; j < L; ++j) arg[j] = X[j] * tm;
    jets::series_sin_cos(arg, S, C);
    for (std::size_t j = 0; j < L; ++j) Y[j] += h.alpha * S[j] + h.beta * C[j];
    if (LD) {
      const Real ta = tm * h.alpha, tb = tm * h.beta;
      for (std::size_t j = 0; j < L; ++j) D[j] += ta * C[j] - tb * S[j];
    }
  }
  if (LD) {
    if (!(D[0].sign() > 0)) {
      throw CertificationError("trig node derivative " + D[0].str(12) + " is not positive at x=" +
                               X[0].str(20));
    }
    *LD = jets::series_log(D);
  }
}

void apply_inverse(const Node& g, const Series& X, Series& Y, Series* LD) {
  const std::size_t L = X.size();
  const long prec = working_precision();
  const BigInt N = X[0].floor();
  const Real r = X[0] - Real(N);
  Real y(solve_double(g, r.to_double()));
  // Newton on (value, derivative) pairs, quadratic from the double seed.
  // The jet evaluation at the end doubles as one more Newton step, so the
  // loop stops once the step is below 2^-(prec/3); the residual correction
  // is then checked against 2^-(prec/2).
  Real coarse = Real(1), fine = Real(1);
  mpfr_mul_2si(coarse.get(), coarse.get(), -(prec / 3), MPFR_RNDN);
  mpfr_mul_2si(fine.get(), fine.get(), -(prec / 2), MPFR_RNDN);
  Series H;
  Real delta;
  for (int round = 0; round < 2; ++round) {
    const Real& tol = round == 0 ? coarse : fine;
    bool converged = false;
    for (int it = 0; it < 64 && !converged; ++it) {
      Series G;
      apply_node(g, jets::series_variable(y, 2), G, nullptr);
      if (!(G[1].sign() > 0)) throw CertificationError("inverse: non-positive derivative");
      const Real step = (G[0] - r) / G[1];
      y -= step;
      converged = abs(step) <= tol * max(Real(1), abs(y));
    }
    if (!converged) throw PrecisionExhausted("inverse: Newton iteration did not converge");
    apply_node(g, jets::series_variable(y, L + 1), H, nullptr);
    delta = (r - H[0]) / H[1];
    if (abs(delta) <= fine * max(Real(1), abs(y))) break;
    if (round == 1) throw PrecisionExhausted("inverse: residual correction too large");
  }
  if (!(H[1].sign() > 0)) throw CertificationError("inverse: non-positive derivative");
  // Series reversion: H(Z(t)) - H_0 = X(t) - X_0, Z_0 = 0.
  Series Z = zeros(L);
  std::vector<Series> pw(L, zeros(L));  // pw[i] = Z^i, i >= 1
  const Real inv1 = Real(1) / H[1];
  for (std::size_t j = 1; j < L; ++j) {
    Real acc = Real::zero(prec);
    for (std::size_t i = 2; i <= j; ++i) {
      Real c = Real::zero(prec);
      for (std::size_t m = 1; m + i - 1 <= j; ++m) c += Z[m] * pw[i - 1][j - m];
      pw[i][j] = c;
      acc += H[i] * c;
    }
    Z[j] = (X[j] - acc) * inv1;
    pw[1][j] = Z[j];
  }
  Y = Z;
  Y[0] = y + delta + Real(N);
  if (LD) {
    // ln Dg^{-1}(X) = -ln H'(Z)
    Series Dp = zeros(L);
    Dp[0] = H[1];
    for (std::size_t i = 2; i <= L && i < H.size(); ++i) {
      const Real ci = H[i] * Real(static_cast<long>(i));
      for (std::size_t j = i - 1; j < L; ++j) Dp[j] += ci * pw[i - 1][j];
    }
    Series l = jets::series_log(Dp);
    for (auto& v : l) v = -v;
    *LD = std::move(l);
  }
}

void apply_node(const Node& n, const Series& X, Series& Y, Series* LD) {
  switch (n.kind) {
    case NodeKind::rotation:
      Y = X;
      Y[0] += n.shift;
      if (LD) *LD = zeros(X.size());
      return;
    case NodeKind::trig: apply_trig(n, X, Y, LD); return;
    case NodeKind::compose: {
      Series Y1, L1, L2;
      apply_node(*n.inner, X, Y1, LD ? &L1 : nullptr);
      apply_node(*n.outer, Y1, Y, LD ? &L2 : nullptr);
      if (LD) *LD = jets::operator+(L1, L2);
      return;
    }
    case NodeKind::inverse: apply_inverse(*n.inner, X, Y, LD); return;
    case NodeKind::power: {
      Series cur = X, next, l;
      Series acc;
      if (LD) acc = zeros(X.size());
      const long k = std::labs(n.exponent);
      for (long i = 0; i < k; ++i) {
        if (n.exponent > 0) {
          apply_node(*n.inner, cur, next, LD ? &l : nullptr);
        } else {
          apply_inverse(*n.inner, cur, next, LD ? &l : nullptr);
        }
        if (LD) add_into(acc, l);
        cur = std::move(next);
      }
      Y = std::move(cur);
      if (LD) *LD = std::move(acc);
      return;
    }
  }
}

std::string describe_node(const Node& n) {
  std::ostringstream os;
  switch (n.kind) {
    case NodeKind::rotation: os << "R(" << n.shift.str(12) << ")"; break;
    case NodeKind::trig:
      os << "T(" << n.shift.str(6);
      for (const auto& h : n.harmonics) os << "; " << h.m << ":" << h.alpha.str(6) << "," << h.beta.str(6);
      os << ")";
      break;
    case NodeKind::compose: os << describe_node(*n.outer) << " o " << describe_node(*n.inner); break;
    case NodeKind::inverse: os << "(" << describe_node(*n.inner) << ")^-1"; break;
    case NodeKind::power: os << "(" << describe_node(*n.inner) << ")^" << n.exponent; break;
  }
  return os.str();
}

bool certify_trig(const Node& n) {
  const long bits = std::max(working_precision(), 64L);
  PrecisionScope ps(bits);
  const Real two_pi = Real::two_pi(bits);
  Real slope = Real::zero(bits), curv = Real::zero(bits);
  for (const auto& h : n.harmonics) {
    if (h.m < 1) return false;
    const Real tm = two_pi * Real(static_cast<long>(h.m));
    const Real a = abs(h.alpha) + abs(h.beta);
    slope += tm * a;
    curv += tm * tm * a;
  }
  if (Real(1) - slope > Real(0)) return true;
  // Grid check: min Df on the grid minus Lipschitz slack.
  for (int grid = 1024; grid <= (1 << 16); grid *= 4) {
    Real mn(1e300);
    for (int i = 0; i < grid; ++i) {
      Series Y, LD;
      Series X = jets::series_variable(Real(static_cast<long>(i)) / Real(static_cast<long>(grid)), 2);
      Node copy = n;
      copy.shift = Real::zero(bits);
      apply_trig(copy, X, Y, nullptr);
      mn = min(mn, Y[1]);
    }
    const Real slack = curv / Real(static_cast<long>(2 * grid));
    if (mn - slack > Real(0)) return true;
    if (mn.sign() <= 0) return false;
  }
  return false;
}

bool certify_node(const Node& n) {
  switch (n.kind) {
    case NodeKind::rotation: return true;
    case NodeKind::trig: return certify_trig(n);
    case NodeKind::compose: return certify_node(*n.outer) && certify_node(*n.inner);
    case NodeKind::inverse:
    case NodeKind::power: return certify_node(*n.inner);
  }
  return false;
}

}  // namespace

// ------------------------------------------------------------- CircleMap

CircleMap::CircleMap() : root_(make_node(NodeKind::rotation)) {}

CircleMap CircleMap::rotation(const Real& c) {
  auto n = make_node(NodeKind::rotation);
  n->shift = c;
  return CircleMap(n);
}

CircleMap CircleMap::trig(std::vector<Harmonic> harmonics, const Real& shift) {
  for (const auto& h : harmonics) {
    if (h.m < 1) throw ValidationError("trig harmonic index must be >= 1");
    if (!h.alpha.is_finite() || !h.beta.is_finite()) throw ValidationError("non-finite trig coefficient");
  }
  std::sort(harmonics.begin(), harmonics.end(),
            [](const Harmonic& a, const Harmonic& b) { return a.m < b.m; });
  auto n = make_node(NodeKind::trig);
  n->shift = shift;
  n->harmonics = std::move(harmonics);
  return CircleMap(n);
}

CircleMap compose(const CircleMap& outer, const CircleMap& inner) {
  if (is_identity(outer.root())) return CircleMap(inner.root_);
  if (is_identity(inner.root())) return CircleMap(outer.root_);
  auto n = make_node(NodeKind::compose);
  n->outer = outer.root_;
  n->inner = inner.root_;
  return CircleMap(n);
}

CircleMap CircleMap::inverse() const {
  if (root_->kind == NodeKind::rotation) return rotation(-root_->shift);
  if (root_->kind == NodeKind::inverse) return CircleMap(root_->inner);
  if (!certify_node(*root_)) {
    throw CertificationError("inverse requested for a map without certified Df > 0: " + describe());
  }
  auto n = make_node(NodeKind::inverse);
  n->inner = root_;
  return CircleMap(n);
}

CircleMap CircleMap::power(long k) const {
  if (k == 0) return CircleMap();
  if (k == 1) return *this;
  if (k < 0 && !certify_node(*root_)) {
    throw CertificationError("negative power of a map without certified Df > 0");
  }
  auto n = make_node(NodeKind::power);
  n->inner = root_;
  n->exponent = k;
  return CircleMap(n);
}

std::string CircleMap::describe() const { return describe_node(*root_); }

bool certify_diffeo(const CircleMap& f) { return certify_node(f.root()); }

void apply(const CircleMap& f, const Series& X, Series& Y, Series* LD) {
  if (X.empty()) throw ValidationError("apply: empty series");
  if (X.size() > static_cast<std::size_t>(jets::kMaxOrder) + 1) {
    throw ValidationError("apply: jet order above cap");
  }
  apply_node(f.root(), X, Y, LD);
}

Real eval(const CircleMap& f, const Real& x) {
  Series Y;
  apply_node(f.root(), Series{x}, Y, nullptr);
  return Y[0];
}

double eval_double(const CircleMap& f, double x, double* deriv) {
  return eval_double_node(f.root(), x, deriv);
}

jets::Jet evaluate(const CircleMap& f, const Real& x, int jet_order) {
  if (!x.is_finite()) throw ValidationError("evaluate: non-finite x");
  if (jet_order < 0 || jet_order > jets::kMaxOrder) throw ValidationError("evaluate: jet order out of range");
  Series Y;
  apply(f, jets::series_variable(x, static_cast<std::size_t>(jet_order) + 1), Y, nullptr);
  return jets::Jet(x, std::move(Y));
}

OrbitJet iterate(const CircleMap& f, const BigInt& q, const Real& x, int jet_order,
                 const OrbitOptions& opt) {
  if (jet_order < 0 || jet_order > jets::kMaxOrder) throw ValidationError("iterate: jet order out of range");
  if (!x.is_finite()) throw ValidationError("iterate: non-finite x");
  const BigInt steps = abs(q);
  if (steps > BigInt(static_cast<long>(opt.max_evaluations))) {
    throw BudgetExceeded("orbit of length " + to_string(steps) + " exceeds budget " +
                         std::to_string(opt.max_evaluations));
  }
  const CircleMap g = q < 0 ? f.inverse() : f;
  const std::size_t L = static_cast<std::size_t>(jet_order) + 1;
  BigInt offset = x.floor();
  Series X = jets::series_variable(x - Real(offset), L);
  Series acc = zeros(L), Y, LD;
  const long n = steps.get_si();
  for (long i = 0; i < n; ++i) {
    apply_node(g.root(), X, Y, opt.want_log_derivative ? &LD : nullptr);
    if (opt.want_log_derivative) add_into(acc, LD);
    X = std::move(Y);
    const BigInt k = X[0].floor();
    if (k != 0) {
      X[0] -= Real(k);
      offset += k;
    }
  }
  X[0] += Real(offset);
  OrbitJet out{jets::Jet(x, std::move(X)), std::move(acc)};
  return out;
}

Real iterate_value(const CircleMap& f, const BigInt& q, const Real& x, std::int64_t max_evaluations) {
  OrbitOptions opt;
  opt.max_evaluations = max_evaluations;
  opt.want_log_derivative = false;
  return iterate(f, q, x, 0, opt).jet.value();
}

// ------------------------------------------------------- rotation number

RotationNumber rotation_number(const CircleMap& f, int table_depth, const RotationOptions& opt) {
  if (table_depth < 1) throw ValidationError("rotation_number: table_depth must be >= 1");
  const long prec = working_precision();
  const Real zero = Real::zero(prec);
  const BigInt ip = eval(f, zero).floor();
  Real tol(1);
  mpfr_mul_2si(tol.get(), tol.get(), -(prec / 2), MPFR_RNDN);
  // +1 if the fractional rotation number exceeds p/q, -1 if below.
  auto side = [&](const BigInt& p, const BigInt& q) {
    if (q > BigInt(static_cast<long>(opt.max_q))) throw BudgetExceeded("rotation number: q above max_q");
    const Real v = iterate_value(f, q, zero, opt.max_q) - Real(p + ip * q);
    if (abs(v) <= tol) {
      throw CertificationError("rotation number not separated from " + to_string(p) + "/" +
                               to_string(q));
    }
    return v.sign() > 0 ? 1 : -1;
  };
  std::vector<BigInt> coeffs;
  BigInt P2 = 1, Q2 = 0, P1 = 0, Q1 = 1;  // (p,q)_{k-2}, (p,q)_{k-1}
  BigInt lo_p = 0, lo_q = 1, hi_p = 1, hi_q = 1;
  bool budget_hit = false;
  for (int k = 1; k <= table_depth && !budget_hit; ++k) {
    // Intermediate fractions (t P1 + P2)/(t Q1 + Q2) stay on the side of
    // P2/Q2 for t <= a_k: above for odd k, below for even k.
    const int keep = (k % 2 == 1) ? -1 : 1;
    auto same_side = [&](const BigInt& t) { return side(t * P1 + P2, t * Q1 + Q2) == keep; };
    BigInt good = 0, bad = 0;
    try {
      BigInt t = 1;
      while (same_side(t)) {
        good = t;
        t *= 2;
      }
      bad = t;
      while (bad - good > 1) {
        const BigInt mid = (good + bad) / 2;
        if (same_side(mid)) good = mid; else bad = mid;
      }
    } catch (const BudgetExceeded&) {
      budget_hit = true;
    }
    if (budget_hit) {
      if (good >= 1) {
        // a_k >= good: tighten the bound on the P2 side.
        if (keep == 1) { lo_p = good * P1 + P2; lo_q = good * Q1 + Q2; }
        else { hi_p = good * P1 + P2; hi_q = good * Q1 + Q2; }
      }
      break;
    }
    if (good < 1) throw CertificationError("rotation number: inconsistent sign tests");
    coeffs.push_back(good);
    const BigInt p = good * P1 + P2, q = good * Q1 + Q2;
    P2 = P1; Q2 = Q1; P1 = p; Q1 = q;
    // x lies between the last two convergents.
    if (k % 2 == 0) { lo_p = P1; lo_q = Q1; hi_p = P2; hi_q = Q2; }
    else { hi_p = P1; hi_q = Q1; lo_p = P2; lo_q = Q2; }
  }
  if (coeffs.empty()) throw BudgetExceeded("rotation number: no CF coefficient within max_q");
  RotationNumber out;
  out.angle = arith::Angle::from_cf(coeffs, arith::TailPolicy::reject(), prec);
  out.integer_part = ip;
  out.p_lo = lo_p;
  out.q_lo = lo_q;
  out.p_hi = hi_p;
  out.q_hi = hi_q;
  out.enclosure = Interval(Interval::ratio(lo_p, lo_q, prec).lo, Interval::ratio(hi_p, hi_q, prec).hi);
  return out;
}

// ------------------------------------------------------------- families

Real commutation_defect(const CircleMap& f, const CircleMap& g, int grid, int threads) {
  if (grid < 1) throw ValidationError("commutation_defect: grid must be >= 1");
  std::vector<Real> d(static_cast<std::size_t>(grid));
  parallel_for(static_cast<std::size_t>(grid), threads, [&](std::size_t i) {
    const Real x = Real(static_cast<long>(i)) / Real(static_cast<long>(grid));
    d[i] = abs(eval(f, eval(g, x)) - eval(g, eval(f, x)));
  });
  Real m = Real::zero(working_precision());
  for (const auto& v : d) m = max(m, v);
  return m;
}

Real family_tolerance(long bits) {
  PrecisionScope ps(std::max(bits, 64L));
  return pow(Real(10), Real(-static_cast<long>(bits / 4)));
}

namespace {

void check_family(CommutingFamily& fam, const FamilyOptions& opt) {
  const long bits = working_precision();
  fam.defect = Real::zero(bits);
  fam.defect_grid = opt.grid;
  if (opt.grid <= 0) return;
  for (std::size_t i = 0; i < fam.maps.size(); ++i) {
    for (std::size_t j = i + 1; j < fam.maps.size(); ++j) {
      fam.defect = max(fam.defect, commutation_defect(fam.maps[i], fam.maps[j], opt.grid, opt.threads));
    }
  }
  if (fam.defect > family_tolerance(bits)) {
    throw CertificationError("commutation defect " + fam.defect.str(6) + " exceeds family tolerance");
  }
}

}  // namespace

CommutingFamily make_conjugated_rotations(const CircleMap& h, const std::vector<arith::Angle>& angles,
                                          const FamilyOptions& opt) {
  if (!certify_diffeo(h)) throw CertificationError("conjugator fails Df > 0 certification");
  CommutingFamily fam;
  fam.provenance = Provenance::conjugated_rotations;
  fam.h = h;
  const CircleMap hinv = h.inverse();
  const long bits = working_precision();
  for (const auto& a : angles) {
    CircleMap f = compose(hinv, compose(CircleMap::rotation(a.value_at(bits).mid().rounded(bits)), h));
    f.cached_rotation_number = a;
    fam.maps.push_back(std::move(f));
    fam.rotation_numbers.push_back(a);
  }
  check_family(fam, opt);
  return fam;
}

CommutingFamily make_tilde_family(const CommutingFamily& base, int p, const FamilyOptions& opt) {
  const int d = static_cast<int>(base.maps.size());
  if (d < 1) throw ValidationError("make_tilde_family: empty base family");
  if (p < d) throw ValidationError("make_tilde_family: need p >= d");
  const long bits = working_precision();
  const auto angles = arith::tilde_angles(base.rotation_numbers, p, bits, 4);
  CommutingFamily fam;
  fam.provenance = Provenance::power_closure;
  fam.h = base.h;
  for (int s = 1; s <= p; ++s) {
    CircleMap f;
    long w = 1;
    for (int t = 0; t < d; ++t) {
      f = compose(f, base.maps[static_cast<std::size_t>(t)].power(w));
      w *= s;
    }
    const arith::Angle& target = angles[static_cast<std::size_t>(s - 1)];
    if (opt.check_depth > 0) {
      RotationOptions ro;
      ro.max_q = 20000;
      const RotationNumber rn = rotation_number(f, opt.check_depth, ro);
      const auto& a = rn.angle.prefix();
      const auto& b = target.prefix();
      const std::size_t n = std::min(a.size(), b.size());
      for (std::size_t i = 0; i < n; ++i) {
        // The last measured coefficient may be cut short by the budget.
        if (a[i] != b[i]) {
          throw CertificationError("tilde map " + std::to_string(s) +
                                   ": rotation number disagrees with the tilde angle at a_" +
                                   std::to_string(i + 1));
        }
      }
    }
    f.cached_rotation_number = target;
    fam.maps.push_back(std::move(f));
    fam.rotation_numbers.push_back(target);
  }
  check_family(fam, opt);
  return fam;
}

LiouvilleFamily make_liouville_family(const arith::Angle& target, const LiouvilleSchedule& schedule,
                                      int stages, const std::vector<arith::Angle>& companions,
                                      const FamilyOptions& opt) {
  constexpr int kMaxStages = 6;
  if (stages < 0 || stages > kMaxStages) {
    throw ValidationError("liouville: stages must be in [0, " + std::to_string(kMaxStages) + "]");
  }
  LiouvilleFamily out;
  const arith::Denominators den = arith::denominators(target, 64);
  const int rows = static_cast<int>(den.q.size());
  int s = schedule.burst_index;
  if (s == 0) {
    double best = 0;
    for (int n = 2; n + 1 <= rows; ++n) {
      const double r = std::log(mpz_get_d(den.q[n].get_mpz_t())) / std::log(mpz_get_d(den.q[n - 1].get_mpz_t()));
      if (r > best) {
        best = r;
        s = n;
      }
    }
  }
  if (s < 1 || s + 1 > rows) throw ValidationError("liouville: burst index outside the CF prefix");
  out.burst_index = s;
  out.burst_q = den.q[s - 1];
  const long bits = working_precision();
  const Real two_pi = Real::two_pi(bits);
  CircleMap H;
  for (int j = 0; j < stages; ++j) {
    const double amp = j < static_cast<int>(schedule.amplitudes.size()) ? schedule.amplitudes[j] : 0.6;
    const int mult = j < static_cast<int>(schedule.multipliers.size()) ? schedule.multipliers[j] : j + 1;
    if (!(amp >= 0 && amp < 1)) throw ValidationError("liouville: amplitude must lie in [0, 1)");
    if (mult < 1) throw ValidationError("liouville: multiplier must be >= 1");
    if (amp == 0) continue;
    const BigInt Nj = BigInt(mult) * out.burst_q;
    if (!Nj.fits_sint_p()) throw ValidationError("liouville: stage frequency too large");
    const Real alpha = Real(amp) / (two_pi * Real(Nj));
    CircleMap h = CircleMap::trig({Harmonic{static_cast<int>(Nj.get_si()), alpha, Real::zero(bits)}});
    if (!certify_diffeo(h)) throw CertificationError("liouville: stage " + std::to_string(j + 1) + " is not a diffeomorphism");
    H = compose(h, H);
  }
  std::vector<arith::Angle> angles{target};
  angles.insert(angles.end(), companions.begin(), companions.end());
  out.family = make_conjugated_rotations(H, angles, opt);
  out.family.provenance = Provenance::successive_conjugation;
  return out;
}

}  // namespace circlin::maps
