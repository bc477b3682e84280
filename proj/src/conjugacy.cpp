#include "circlin/conjugacy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "circlin/error.hpp"
#include "circlin/jets.hpp"
#include "circlin/parallel.hpp"

namespace circlin::conjugacy {

namespace {

double log_z(const BigInt& z) {
  long e = 0;
  const double m = mpz_get_d_2exp(&e, z.get_mpz_t());
  return std::log(m) + static_cast<double>(e) * std::log(2.0);
}

// ln x without overflowing a double on the way.
double to_d_log(const Real& x) { return log(x).to_double(); }

Real grid_point(long j, long grid) { return Real(j) / Real(grid); }

}  // namespace

DiophantineTimes diophantine_times(const arith::AlternatedConfig& config, const arith::ConvergentTable& table,
                                   const BigInt& bound, int angle, std::int64_t max_members) {
  DiophantineTimes out;
  out.angle = angle;
  out.bound = bound;
  std::set<int> indices;
  for (const auto& s : config.strings) {
    if (s.angle != angle) continue;
    for (int i = s.l; i <= s.n - 1; ++i) indices.insert(i);
  }
  for (int s : indices) {
    if (s < 1 || s + 1 > table.depth()) {
      throw ValidationError("diophantine_times: index " + std::to_string(s) + " needs table depth " +
                            std::to_string(s + 1) + ", have " + std::to_string(table.depth()));
    }
  }
  std::map<BigInt, std::vector<TimeTerm>> reach;
  reach.emplace(BigInt(0), std::vector<TimeTerm>{});
  for (int s : indices) {
    if (out.truncated) break;
    const BigInt& q = table.q(s);
    const BigInt amax = table.q(s + 1) / q;
    std::vector<std::pair<BigInt, std::vector<TimeTerm>>> base(reach.begin(), reach.end());
    for (const auto& [x, dec] : base) {
      for (BigInt a = 1; a <= amax; ++a) {
        const BigInt v = x + a * q;
        if (v > bound) break;
        if (reach.count(v)) continue;
        if (static_cast<std::int64_t>(reach.size()) > max_members) {
          out.truncated = true;
          break;
        }
        auto d = dec;
        d.push_back(TimeTerm{s, a});
        reach.emplace(v, std::move(d));
      }
      if (out.truncated) break;
    }
  }
  for (auto& [v, dec] : reach) {
    if (v == 0) continue;
    out.members.push_back(v);
    out.decompositions.push_back(std::move(dec));
  }
  return out;
}

DensityResult orbit_density_check(const DiophantineTimes& A, const DiophantineTimes& A_tilde,
                                  const arith::Angle& theta, const arith::Angle& beta, std::int64_t max_points) {
  const long bits = std::max(working_precision(), 128L);
  PrecisionScope ps(bits);
  const Real t = theta.value_at(bits).mid();
  const Real b = beta.value_at(bits).mid();
  auto fracs = [&](const DiophantineTimes& T, const Real& w) {
    std::vector<double> v{0.0};
    for (const auto& m : T.members) v.push_back(frac(mul_z(w, m)).to_double());
    return v;
  };
  const auto U = fracs(A, t);
  const auto V = fracs(A_tilde, b);
  if (static_cast<std::int64_t>(U.size()) * static_cast<std::int64_t>(V.size()) > max_points) {
    throw BudgetExceeded("orbit_density_check: " + std::to_string(U.size() * V.size()) +
                         " points exceed the budget");
  }
  std::vector<double> pts;
  pts.reserve(U.size() * V.size());
  for (double u : U) {
    for (double v : V) {
      double s = u + v;
      if (s >= 1) s -= 1;
      pts.push_back(s);
    }
  }
  std::sort(pts.begin(), pts.end());
  DensityResult r;
  r.points = pts.size();
  double gap = pts.front() + 1 - pts.back();
  for (std::size_t i = 1; i < pts.size(); ++i) gap = std::max(gap, pts[i] - pts[i - 1]);
  r.max_gap = gap;
  return r;
}

namespace {

// Orbit state as integer part plus a fraction in [0, 1).
struct OrbitD {
  long double k;
  double y;
  void step(const maps::CircleMap& f) {
    const double z = maps::eval_double(f, y);
    const double fl = std::floor(z);
    k += fl;
    y = z - fl;
  }
  long double value() const { return k + y; }
};

struct OrbitR {
  BigInt k;
  Real y;
  void step(const maps::CircleMap& f) {
    Real z = maps::eval(f, y);
    const BigInt fl = z.floor();
    k += fl;
    y = z - Real(fl);
  }
  Real value() const { return y + Real(k); }
};

void finish(ConjugacyEstimate& e, std::vector<Real>& raw, const std::vector<Real>& defects) {
  const long bits = working_precision();
  e.h.resize(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) e.h[j] = (raw[j] - raw[0]).rounded(bits);
  e.sup_defect = Real::zero(bits);
  for (const auto& d : defects) e.sup_defect = max(e.sup_defect, d);
  e.periodic_defect = abs(e.h.back() - e.h.front() - Real(1));
  e.monotone = true;
  for (std::size_t j = 1; j < e.h.size(); ++j) {
    if (!(e.h[j] > e.h[j - 1])) e.monotone = false;
  }
}

}  // namespace

ConjugacyEstimate cesaro_conjugacy(const maps::CircleMap& f, const arith::Angle& theta, std::int64_t n_terms,
                                   int grid, const ConjugacyOptions& opt) {
  if (n_terms < 1) throw ValidationError("cesaro_conjugacy: n_terms must be >= 1");
  if (grid < 1) throw ValidationError("cesaro_conjugacy: grid must be >= 1");
  const std::int64_t points = static_cast<std::int64_t>(grid) + 1;
  if (n_terms > opt.budget / points) {
    throw BudgetExceeded("cesaro_conjugacy: " + std::to_string(n_terms) + " terms on " + std::to_string(points) +
                         " points exceed the budget of " + std::to_string(opt.budget));
  }
  const long bits = working_precision();
  const Real th = theta.value_at(bits).mid().rounded(bits);
  ConjugacyEstimate e;
  e.n_terms = n_terms;
  std::vector<Real> raw(static_cast<std::size_t>(points)), defect(static_cast<std::size_t>(points));
  e.x.resize(static_cast<std::size_t>(points));
  parallel_for(static_cast<std::size_t>(points), opt.threads, [&](std::size_t j) {
    const Real x = grid_point(static_cast<long>(j), grid);
    e.x[j] = x;
    if (opt.high_precision) {
      OrbitR o{x.floor(), frac(x)};
      Real sum = Real::zero(bits);
      for (std::int64_t i = 0; i < n_terms; ++i) {
        sum += (Real(o.k) - th * Real(static_cast<long>(i))) + o.y;
        o.step(f);
      }
      const Real n(static_cast<long>(n_terms));
      raw[j] = sum / n;
      defect[j] = abs(o.value() - x - th * n) / n;
    } else {
      const long double t = th.to_long_double();
      const double xd = x.to_double();
      OrbitD o{std::floor(xd), xd - std::floor(xd)};
      long double sum = 0;
      for (std::int64_t i = 0; i < n_terms; ++i) {
        sum += (o.k - t * static_cast<long double>(i)) + o.y;
        o.step(f);
      }
      const long double n = static_cast<long double>(n_terms);
      raw[j] = Real(static_cast<double>(sum / n));
      defect[j] = Real(static_cast<double>(std::fabs((o.k - xd - t * n) + o.y) / n));
    }
  });
  finish(e, raw, defect);
  return e;
}

TimesConjugacy conjugacy_at_diophantine_times(const maps::CircleMap& f, const maps::CircleMap& g,
                                              const DiophantineTimes& A, const DiophantineTimes& A_tilde,
                                              const arith::Angle& theta, const arith::Angle& beta, int grid,
                                              const ConjugacyOptions& opt) {
  if (grid < 1) throw ValidationError("conjugacy_at_diophantine_times: grid must be >= 1");
  auto times = [](const DiophantineTimes& T) {
    std::vector<std::int64_t> v{0};
    for (const auto& m : T.members) {
      if (!m.fits_slong_p()) throw BudgetExceeded("conjugacy_at_diophantine_times: time too large");
      v.push_back(m.get_si());
    }
    return v;
  };
  const auto U = times(A);
  const auto V = times(A_tilde);
  const std::int64_t points = static_cast<std::int64_t>(grid) + 1;
  const long double cost = static_cast<long double>(points) *
                           (static_cast<long double>(V.back()) +
                            static_cast<long double>(V.size()) * static_cast<long double>(U.back() + 1));
  if (cost > static_cast<long double>(opt.budget)) {
    throw BudgetExceeded("conjugacy_at_diophantine_times: orbit cost exceeds the budget");
  }
  const long bits = working_precision();
  const Real th = theta.value_at(bits).mid().rounded(bits);
  const Real be = beta.value_at(bits).mid().rounded(bits);
  const std::int64_t N = static_cast<std::int64_t>(U.size() * V.size());
  TimesConjugacy out;
  ConjugacyEstimate& e = out.estimate;
  e.n_terms = N;
  std::vector<Real> raw(static_cast<std::size_t>(points)), defect(static_cast<std::size_t>(points));
  e.x.resize(static_cast<std::size_t>(points));
  parallel_for(static_cast<std::size_t>(points), opt.threads, [&](std::size_t j) {
    const Real x = grid_point(static_cast<long>(j), grid);
    e.x[j] = x;
    if (opt.high_precision) {
      Real sum = Real::zero(bits), dsum = Real::zero(bits);
      OrbitR go{x.floor(), frac(x)};
      std::int64_t gv = 0;
      for (std::int64_t v : V) {
        while (gv < v) {
          go.step(g);
          ++gv;
        }
        OrbitR fo = go;
        std::int64_t fu = 0;
        for (std::int64_t u : U) {
          while (fu < u) {
            fo.step(f);
            ++fu;
          }
          const Real here = fo.value();
          OrbitR nx = fo;
          nx.step(f);
          sum += here - th * Real(static_cast<long>(u)) - be * Real(static_cast<long>(v));
          dsum += nx.value() - here - th;
        }
      }
      const Real n(static_cast<long>(N));
      raw[j] = sum / n;
      defect[j] = abs(dsum) / n;
    } else {
      const long double t = th.to_long_double(), b = be.to_long_double();
      const double xd = x.to_double();
      long double sum = 0, dsum = 0;
      OrbitD go{std::floor(xd), xd - std::floor(xd)};
      std::int64_t gv = 0;
      for (std::int64_t v : V) {
        while (gv < v) {
          go.step(g);
          ++gv;
        }
        OrbitD fo = go;
        std::int64_t fu = 0;
        for (std::int64_t u : U) {
          while (fu < u) {
            fo.step(f);
            ++fu;
          }
          OrbitD nx = fo;
          nx.step(f);
          sum += (fo.k - t * static_cast<long double>(u) - b * static_cast<long double>(v)) + fo.y;
          dsum += (nx.k - fo.k - t) + (static_cast<long double>(nx.y) - fo.y);
        }
      }
      const long double n = static_cast<long double>(N);
      raw[j] = Real(static_cast<double>(sum / n));
      defect[j] = Real(static_cast<double>(std::fabs(dsum) / n));
    }
  });
  finish(e, raw, defect);
  out.plain_defect = cesaro_conjugacy(f, theta, N, grid, opt).sup_defect;
  return out;
}

namespace {

// Grid sup of |D^j ln Df^q| for each j in `orders`, sampled at i / G.
std::vector<Real> log_derivative_sups(const maps::CircleMap& f, const BigInt& q, long G, long stride,
                                      long offset, int max_order, const std::vector<int>& orders,
                                      int threads, std::int64_t budget) {
  const long count = G / stride;
  std::vector<std::vector<Real>> vals(static_cast<std::size_t>(count));
  parallel_for(vals.size(), threads, [&](std::size_t i) {
    const Real x = grid_point(static_cast<long>(i) * stride + offset, G);
    maps::OrbitOptions oo;
    oo.max_evaluations = budget;
    const maps::OrbitJet oj = maps::iterate(f, q, x, max_order, oo);
    std::vector<Real> r;
    for (int j : orders) r.push_back(abs(oj.log_derivative[static_cast<std::size_t>(j)] * jets::factorial(j)));
    vals[i] = std::move(r);
  });
  std::vector<Real> sup(orders.size(), Real::zero(working_precision()));
  for (const auto& v : vals) {
    for (std::size_t j = 0; j < v.size(); ++j) sup[j] = max(sup[j], v[j]);
  }
  return sup;
}

}  // namespace

std::vector<DeltaRow> delta_norms(const maps::CircleMap& f, const arith::ConvergentTable& table, int s_lo,
                                  int s_hi, int k, int grid, const DeltaOptions& opt) {
  if (k < 1 || k - 1 > jets::kMaxOrder) {
    throw ValidationError("delta_norms: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(jets::kMaxOrder + 1) + "]");
  }
  if (grid < 1) throw ValidationError("delta_norms: grid must be >= 1");
  if (s_lo < 1 || s_hi > table.depth()) throw ValidationError("delta_norms: s range outside table depth");
  const long bits = working_precision();
  std::vector<DeltaRow> out;
  for (int s = s_lo; s <= s_hi; ++s) {
    const arith::ConvergentRow& cr = table.row(s);
    const long total = grid >= 2 ? 2L * grid : 1L;
    if (BigInt(total) * cr.q > BigInt(static_cast<long>(opt.budget))) {
      throw BudgetExceeded("delta_norms: q_" + std::to_string(s) + " = " + to_string(cr.q) + " on " +
                           std::to_string(total) + " points exceeds the budget");
    }
    DeltaRow r;
    r.s = s;
    r.k = k;
    r.q = cr.q;
    r.theta = cr.theta.mid().rounded(bits);
    const std::vector<int> orders{k - 1};
    const Real coarse =
        log_derivative_sups(f, cr.q, grid, 1, 0, k - 1, orders, opt.threads, opt.budget)[0];
    if (grid >= 2) {
      // Refine to 2G with the G new midpoints.
      const Real mids = log_derivative_sups(f, cr.q, 2L * grid, 2, 1, k - 1, orders, opt.threads, opt.budget)[0];
      r.sup_log = max(coarse, mids);
      r.grid = 2 * grid;
      r.certified = r.sup_log - coarse <= r.sup_log * Real(opt.refine_tol);
    } else {
      r.sup_log = coarse;
      r.grid = 1;
      r.certified = false;
    }
    r.delta = r.sup_log + r.theta;
    r.bound = pow(Real(cr.q), Real(static_cast<double>(k - 1) / 2));
    r.bound_ok = r.delta <= r.bound;
    out.push_back(std::move(r));
  }
  return out;
}

Real cocycle_direct(const maps::CircleMap& f, const BigInt& q, const Real& x) {
  if (q < 0) throw ValidationError("cocycle_direct: q must be >= 0");
  const long bits = working_precision();
  Real sum = Real::zero(bits), prod(1);
  BigInt off = x.floor();
  Real y = x - Real(off);
  for (BigInt i = 0; i < q; ++i) {
    const jets::Jet j = maps::evaluate(f, y, 2);
    const auto& c = j.coeffs();
    // (ln Df)' = D^2 f / Df = 2 c_2 / c_1
    sum += Real(2) * c[2] / c[1] * prod;
    prod *= c[1];
    y = c[0];
    const BigInt fl = y.floor();
    y -= Real(fl);
  }
  return sum;
}

GateReport regularity_gate(const maps::CircleMap& f, const std::vector<DeltaRow>& delta,
                           const arith::ConvergentTable& table, const arith::ExponentSchedule& sched,
                           const GateOptions& opt) {
  GateReport rep;
  rep.r = sched.r;
  if (rep.r < 0 || rep.r + 1 > jets::kMaxOrder) throw ValidationError("regularity_gate: r out of range");
  if (opt.grid < 1) throw ValidationError("regularity_gate: grid must be >= 1");
  const int r = rep.r;
  std::vector<int> orders;
  for (int j = 1; j <= r + 1; ++j) orders.push_back(j);
  std::vector<double> xs, ys;
  bool all_zero = true;
  for (const auto& d : delta) {
    if (d.s + 1 > table.depth()) {
      throw ValidationError("regularity_gate: row s = " + std::to_string(d.s) + " needs q_{s+1}");
    }
    rep.k = d.k;
    const int k = d.k;
    GateRow g;
    g.s = d.s;
    g.q = table.q(d.s);
    g.q_next = table.q(d.s + 1);
    g.delta = d.delta;
    const double ln_q = log_z(g.q);
    const double ln_qn = log_z(g.q_next);
    const double ln_delta = to_d_log(d.delta);
    g.scale_log_lhs = (ln_delta + ln_qn) / k - ln_q;
    g.scale_log_rhs = -ln_q / 4;
    g.scale_ok = g.scale_log_lhs <= g.scale_log_rhs;

    const BigInt ratio = g.q_next / g.q;
    std::set<BigInt> as;
    if (opt.full_a) {
      for (BigInt a = 1; a <= ratio; ++a) as.insert(a);
    } else {
      as.insert(BigInt(1));
      as.insert(std::max<BigInt>(BigInt(1), (ratio + 1) / 2));
      as.insert(std::max<BigInt>(BigInt(1), ratio));
    }
    g.norm = Real::zero(working_precision());
    for (const auto& a : as) {
      const BigInt steps = a * g.q;
      if (BigInt(opt.grid) * steps > BigInt(static_cast<long>(opt.budget))) {
        throw BudgetExceeded("regularity_gate: a q_s = " + to_string(steps) + " on " + std::to_string(opt.grid) +
                             " points exceeds the budget");
      }
      const auto sups = log_derivative_sups(f, steps, opt.grid, 1, 0, r + 1, orders, opt.threads, opt.budget);
      Real n = Real::zero(working_precision());
      for (const auto& v : sups) n = max(n, v);
      g.a_values.push_back(a);
      g.norms.push_back(n);
      g.norm = max(g.norm, n);
    }
    // rhs = q_s^-1 (Delta_s q_{s+1})^rho
    const double rho = static_cast<double>(r + 2) / k;
    const double ln_rhs = -ln_q + rho * (ln_delta + ln_qn);
    if (g.norm.sign() > 0) {
      all_zero = false;
      const double ln_norm = to_d_log(g.norm);
      g.norm_ratio = std::exp(ln_norm - ln_rhs);
      xs.push_back(ln_q);
      ys.push_back(ln_norm);
    }
    rep.norm_ratio_max = std::max(rep.norm_ratio_max, g.norm_ratio);
    rep.rows.push_back(std::move(g));
  }
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx > 0) rep.slope = sxy / sxx;
  }
  rep.decay = all_zero || (rep.slope && *rep.slope < 0);
  return rep;
}

}  // namespace circlin::conjugacy
