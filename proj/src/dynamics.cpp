#include "circlin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "circlin/error.hpp"
#include "circlin/parallel.hpp"

namespace circlin::dynamics {

namespace {

struct Sample {
  Real d, slope, curvature;
};

Sample sample_point(const maps::CircleMap& f, const BigInt& q, const BigInt& p, const Real& x,
                    std::int64_t budget) {
  maps::OrbitOptions oo;
  oo.max_evaluations = budget;
  oo.want_log_derivative = false;
  const maps::OrbitJet oj = maps::iterate(f, q, x, 2, oo);
  const auto& c = oj.jet.coeffs();
  Sample s;
  s.d = abs(c[0] - x - Real(p));
  s.slope = abs(c[1] - Real(1));
  s.curvature = abs(c[2] * Real(2));
  return s;
}

double to_d(const Real& x) { return x.to_double(); }

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Displacement displacement_extrema(const maps::CircleMap& f, const BigInt& q, const BigInt& p, int grid,
                                  const DisplacementOptions& opt) {
  const long bits = working_precision();
  Displacement out;
  out.M = out.m = out.slope = out.curvature = out.error_bound = Real::zero(bits);
  if (q == 0) {
    out.certified = true;
    return out;
  }
  if (grid < 2) throw ValidationError("displacement_extrema: grid must be >= 2");
  if (opt.budget <= 0) throw ValidationError("displacement_extrema: budget must be positive");
  const BigInt steps = abs(q);
  if (!steps.fits_slong_p() || steps > BigInt(static_cast<long>(opt.budget))) {
    throw BudgetExceeded("displacement_extrema: q = " + to_string(q) + " exceeds the evaluation budget");
  }
  const std::int64_t per_point = steps.get_si();
  if (per_point * grid > opt.budget) {
    throw BudgetExceeded("displacement_extrema: initial grid of " + std::to_string(grid) + " points at q = " +
                         to_string(q) + " exceeds the evaluation budget");
  }

  // Points of [0, 1) in increasing order; d is 1-periodic so the last cell
  // closes at 1.
  struct Point {
    Real x;
    Sample s;
  };
  std::vector<Point> pts(static_cast<std::size_t>(grid));
  parallel_for(pts.size(), opt.threads, [&](std::size_t i) {
    pts[i].x = Real(static_cast<long>(i)) / Real(static_cast<long>(grid));
    pts[i].s = sample_point(f, q, p, pts[i].x, opt.budget);
  });
  out.evaluations = per_point * grid;

  // Within a cell of width w the nearest endpoint to an interior extremum
  // is at most w/2 away, and d' vanishes there, so the cell can exceed its
  // endpoint values by at most C w^2 / 8.
  while (true) {
    Real M = pts[0].s.d, m = pts[0].s.d, sl = pts[0].s.slope, cu = pts[0].s.curvature;
    for (const auto& pt : pts) {
      M = max(M, pt.s.d);
      m = min(m, pt.s.d);
      sl = max(sl, pt.s.slope);
      cu = max(cu, pt.s.curvature);
    }
    const std::size_t n = pts.size();
    const Real one(1);
    std::vector<Real> excess(n);
    Real err = Real::zero(bits);
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = pts[i];
      const Point& b = pts[(i + 1) % n];
      const Real w = (i + 1 < n ? b.x : one) - a.x;
      const Real slack = cu * w * w / Real(8);
      const Real up = max(a.s.d, b.s.d) + slack - M;
      const Real lo = m - (min(a.s.d, b.s.d) - slack);
      excess[i] = max(up, lo);
      err = max(err, excess[i]);
    }
    out.M = M;
    out.m = m;
    out.slope = sl;
    out.curvature = cu;
    out.error_bound = err;
    out.grid = static_cast<int>(n);
    out.certified = m.sign() > 0 && err <= m * Real(opt.rel_tol);
    if (out.certified) break;
    // Bisect only the cells that could still hide a better extremum.
    const Real threshold = m * Real(opt.rel_tol);
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < n; ++i) {
      if (excess[i] > threshold) cells.push_back(i);
    }
    const auto extra = static_cast<std::int64_t>(cells.size());
    if (static_cast<std::int64_t>(n) + extra > opt.max_grid || out.evaluations + per_point * extra > opt.budget) break;
    std::vector<Point> mids(cells.size());
    parallel_for(mids.size(), opt.threads, [&](std::size_t k) {
      const std::size_t i = cells[k];
      const Real right = i + 1 < n ? pts[i + 1].x : one;
      mids[k].x = (pts[i].x + right) / Real(2);
      mids[k].s = sample_point(f, q, p, mids[k].x, opt.budget);
    });
    out.evaluations += per_point * extra;
    std::vector<Point> merged;
    merged.reserve(n + mids.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      merged.push_back(std::move(pts[i]));
      if (k < cells.size() && cells[k] == i) merged.push_back(std::move(mids[k++]));
    }
    pts = std::move(merged);
  }
  return out;
}

const TraceRow& DynamicsTrace::row(int n) const {
  if (n < 1 || n > depth()) {
    throw ValidationError("trace row " + std::to_string(n) + " outside depth " + std::to_string(depth()));
  }
  return rows[static_cast<std::size_t>(n - 1)];
}

namespace {

void check_rotation(const maps::CircleMap& f, const arith::ConvergentTable& table, int depth,
                    const DisplacementOptions& opt) {
  arith::Denominators den;
  if (f.cached_rotation_number) {
    den = arith::denominators(*f.cached_rotation_number, depth);
  } else {
    maps::RotationOptions ro;
    ro.max_q = std::min<std::int64_t>(opt.budget, 1000000);
    const maps::RotationNumber rn = maps::rotation_number(f, std::min(depth, 8), ro);
    den = arith::denominators(rn.angle, depth);
  }
  const int n = std::min(depth, static_cast<int>(den.q.size()));
  if (n < 1) throw ValidationError("build_trace: rotation number of the map yields no denominators");
  for (int i = 1; i <= n; ++i) {
    if (den.q[static_cast<std::size_t>(i - 1)] != table.q(i)) {
      throw ValidationError("build_trace: rotation number mismatch at row " + std::to_string(i) + " (map q = " +
                            to_string(den.q[static_cast<std::size_t>(i - 1)]) + ", table q = " +
                            to_string(table.q(i)) + ")");
    }
  }
}

}  // namespace

DynamicsTrace build_trace(const maps::CircleMap& f, const arith::ConvergentTable& table, int depth, int grid,
                          const DisplacementOptions& opt) {
  if (depth < 0 || depth > table.depth()) {
    throw ValidationError("build_trace: depth " + std::to_string(depth) + " outside table depth " +
                          std::to_string(table.depth()));
  }
  if (grid < 2) throw ValidationError("build_trace: grid must be >= 2");
  DynamicsTrace trace;
  if (depth == 0) return trace;
  check_rotation(f, table, depth, opt);
  const long bits = working_precision();
  trace.integer_part = maps::eval(f, Real::zero(bits)).floor();
  Real rel(1);
  mpfr_mul_2si(rel.get(), rel.get(), -(bits / 2), MPFR_RNDN);
  for (int n = 1; n <= depth; ++n) {
    const arith::ConvergentRow& cr = table.row(n);
    TraceRow row;
    row.n = n;
    row.q = cr.q;
    row.p = cr.p;
    row.theta = cr.theta.mid().rounded(bits);
    const Displacement d = displacement_extrema(f, cr.q, cr.p + trace.integer_part * cr.q, grid, opt);
    row.M = d.M;
    row.m = d.m;
    row.error_bound = d.error_bound;
    row.grid = d.grid;
    row.certified = d.certified;
    row.U = d.m.sign() > 0 ? d.M / d.m : Real(kInf);
    row.u = d.M.sign() > 0 ? log(d.M) / log(row.theta) : Real(kInf);
    const Real tol = d.error_bound + row.theta * rel;
    row.sandwich = d.m - tol <= row.theta && row.theta <= d.M + tol;
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

std::vector<YoccozRow> yoccoz_residuals(const DynamicsTrace& trace, int K) {
  if (K < 1) throw ValidationError("yoccoz_residuals: K must be >= 1");
  std::vector<YoccozRow> out;
  Real running = Real::zero(working_precision());
  for (int n = 2; n <= trace.depth(); ++n) {
    const TraceRow& a = trace.row(n - 1);
    const TraceRow& b = trace.row(n);
    if (!a.certified || !b.certified) {
      throw CertificationError("yoccoz_residuals: row " + std::to_string(a.certified ? n : n - 1) +
                               " is not certified");
    }
    const Real& M = a.M;
    const Real r = b.theta / a.theta;
    const Real sq = sqrt(M);
    const Real MK = pow(M, Real(K));
    const Real zero = Real::zero(working_precision());
    YoccozRow y;
    y.n = n;
    // M_n (1 - C sqrt M) <= M r + C M^{K+1}
    y.C_upper = max(zero, (b.M - M * r) / (b.M * sq + M * MK));
    // m_n (1 + C sqrt M) >= m_{n-1} (r - C M^K)
    y.C_lower = max(zero, (a.m * r - b.m) / (b.m * sq + a.m * MK));
    y.C = max(y.C_upper, y.C_lower);
    running = max(running, y.C);
    y.running_max = running;
    y.admissible = y.C * sq < Real(1);
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<SwitchReport> transfer_check(const std::vector<const DynamicsTrace*>& traces,
                                         const arith::AlternatedConfig& config) {
  std::vector<SwitchReport> out;
  const auto& S = config.strings;
  for (std::size_t i = 0; i + 1 < S.size(); ++i) {
    const auto& s = S[i];
    const auto& t = S[i + 1];
    if (s.angle < 0 || t.angle < 0 || s.angle >= static_cast<int>(traces.size()) ||
        t.angle >= static_cast<int>(traces.size())) {
      throw ValidationError("transfer_check: string angle without a trace");
    }
    const DynamicsTrace& from = *traces[static_cast<std::size_t>(s.angle)];
    const DynamicsTrace& to = *traces[static_cast<std::size_t>(t.angle)];
    SwitchReport r;
    r.index = static_cast<int>(i);
    r.from_angle = s.angle;
    r.to_angle = t.angle;
    r.from_row = s.n - 1;
    r.to_row = t.l - 1;
    if (r.from_row < 1 || r.from_row > from.depth() || r.to_row < 1 || r.to_row > to.depth()) {
      throw ValidationError("transfer_check: switch " + std::to_string(i) + " indices (" +
                            std::to_string(r.from_row) + ", " + std::to_string(r.to_row) +
                            ") outside trace depth");
    }
    const TraceRow& A = from.row(r.from_row);
    const TraceRow& B = to.row(r.to_row);
    if (!A.certified || !B.certified) {
      throw CertificationError("transfer_check: switch " + std::to_string(i) + " uses an uncertified row");
    }
    r.L = (B.theta / A.theta).floor();
    const Real L(r.L);
    const Real one(1);
    // Grid values bracket the true extrema: M in [M, M + err], m in [m - err, m].
    r.upper_ok = B.M <= (one + L) * (A.M + A.error_bound);
    r.upper_margin = to_d((one + L) * A.M / B.M);
    if (r.L == 0) {
      r.lower_ok = r.ratio_ok = true;
      r.lower_margin = r.ratio_margin = kInf;
    } else {
      r.lower_ok = B.m >= L * (A.m - A.error_bound);
      r.lower_margin = to_d(B.m / (L * A.m));
      const Real factor = one + one / L;
      const Real U_hi = (A.M + A.error_bound) / (A.m - A.error_bound);
      r.ratio_ok = B.U <= factor * U_hi;
      r.ratio_margin = to_d(factor * A.U / B.U);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SwitchReport> transfer_check(const DynamicsTrace& f_trace, const DynamicsTrace& g_trace,
                                         const arith::AlternatedConfig& config) {
  return transfer_check(std::vector<const DynamicsTrace*>{&f_trace, &g_trace}, config);
}

std::vector<ExponentRow> exponent_dynamics(const DynamicsTrace& trace, const arith::AlternatedConfig& config,
                                           const arith::ExponentSchedule& sched, int b, int angle) {
  if (b < 1) throw ValidationError("exponent_dynamics: b must be >= 1");
  std::vector<ExponentRow> out;
  for (std::size_t i = 0; i < config.strings.size(); ++i) {
    const auto& s = config.strings[i];
    if (s.angle != angle) continue;
    if (s.l < 2 || s.n > trace.depth() || s.l > s.n) {
      throw ValidationError("exponent_dynamics: string " + std::to_string(i) + " [" + std::to_string(s.l) +
                            ", " + std::to_string(s.n) + "] outside trace depth " +
                            std::to_string(trace.depth()));
    }
    const TraceRow& in = trace.row(s.l - 1);
    const TraceRow& outr = trace.row(s.n - 1);
    if (!in.certified || !outr.certified) {
      throw CertificationError("exponent_dynamics: string " + std::to_string(i) + " uses an uncertified row");
    }
    const double ln_ql = std::log(mpz_get_d(trace.row(s.l).q.get_mpz_t()));
    const double ln_qn = std::log(mpz_get_d(trace.row(s.n).q.get_mpz_t()));
    if (!(ln_ql > 0)) throw ValidationError("exponent_dynamics: q_l must exceed 1");
    ExponentRow e;
    e.string_index = static_cast<int>(i);
    e.l = s.l;
    e.n = s.n;
    e.A = ln_qn / ln_ql;
    e.u_in = to_d(in.u);
    e.u_out = to_d(outr.u);
    e.rho = std::min(1.0 - sched.sigma, std::pow(e.A, b) * e.u_in);
    const double tol = 1e-9;
    e.satisfied = e.u_out >= e.rho - tol;
    e.q_bound_ok = to_d(log(outr.M)) <= -e.rho * ln_qn + tol * ln_qn;
    out.push_back(e);
  }
  return out;
}

Dichotomy dichotomy(const arith::AlternatedConfig& config, std::span<const arith::Angle> angles) {
  Dichotomy d;
  double s1 = 0, s2 = 0;
  for (std::size_t j = 0; j + 1 < config.strings.size(); j += 2) {
    const double A = arith::string_exponent(config.strings[j], angles);
    const double B = arith::string_exponent(config.strings[j + 1], angles);
    s1 += 2 * std::log(A) - std::log(B);
    s2 += 2 * std::log(B) - std::log(A);
    d.log_first.push_back(s1);
    d.log_second.push_back(s2);
  }
  auto increasing = [](const std::vector<double>& v) {
    if (v.size() < 2) return false;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (!(v[i] > v[i - 1])) return false;
    }
    return true;
  };
  d.growth = increasing(d.log_first) || increasing(d.log_second);
  return d;
}

LocalScan local_criterion(const DynamicsTrace& trace, const arith::AlternatedConfig& config,
                          const arith::ExponentSchedule& sched, int angle) {
  std::vector<int> ends;
  for (const auto& s : config.strings) {
    if (s.angle == angle) ends.push_back(s.n);
  }
  if (ends.empty()) {
    for (int n = 2; n <= trace.depth(); ++n) ends.push_back(n);
  }
  LocalScan scan;
  for (int n : ends) {
    if (n < 2 || n > trace.depth()) continue;
    const TraceRow& prev = trace.row(n - 1);
    LocalRow r;
    r.n = n;
    r.log_lhs = to_d(log(prev.M));
    r.log_rhs = -(1.0 - sched.sigma) * std::log(mpz_get_d(trace.row(n).q.get_mpz_t()));
    r.ok = r.log_lhs <= r.log_rhs;
    if (r.ok && !scan.first) scan.first = n;
    scan.rows.push_back(r);
  }
  return scan;
}

}  // namespace circlin::dynamics
