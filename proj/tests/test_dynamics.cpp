#include "doctest.h"

#include <cmath>

#include "circlin/dynamics.hpp"
#include "circlin/error.hpp"
#include "oracles.hpp"

using namespace circlin;
using namespace circlin::dynamics;

namespace {

arith::Angle golden() { return arith::Angle::from_cf({1}, arith::TailPolicy::constant(1), 256); }
arith::Angle silver() { return arith::Angle::from_cf({2}, arith::TailPolicy::constant(2), 256); }

maps::CircleMap rotation_of(const arith::Angle& a) {
  maps::CircleMap f = maps::CircleMap::rotation(a.mid());
  f.cached_rotation_number = a;
  return f;
}

arith::AlternatedConfig manual_config(std::vector<std::array<int, 3>> s) {
  arith::AlternatedConfig c;
  for (const auto& [j, l, n] : s) {
    arith::DiophantineString d;
    d.angle = j;
    d.l = l;
    d.n = n;
    c.strings.push_back(d);
    c.margins.push_back(1);
  }
  c.tau = 5;
  c.xi = 0.5;
  return c;
}

}  // namespace

TEST_CASE("rotation displacement is constant") {
  PrecisionScope ps(256);
  const arith::Angle g = golden();
  const arith::ConvergentTable t = arith::convergents(g, 12, 256);
  const maps::CircleMap f = rotation_of(g);
  for (int n = 2; n <= 12; ++n) {
    const Displacement d = displacement_extrema(f, t.q(n), t.row(n).p, 16);
    CHECK(d.certified);
    const double th = t.row(n).theta.mid().to_double();
    CHECK(d.M.to_double() == doctest::Approx(th).epsilon(1e-12));
    CHECK(d.m.to_double() == doctest::Approx(th).epsilon(1e-12));
    CHECK(d.slope.to_double() < 1e-60);
  }
}

TEST_CASE("rotation trace: U = 1 and Yoccoz residuals vanish") {
  PrecisionScope ps(256);
  const arith::Angle g = golden();
  const arith::ConvergentTable t = arith::convergents(g, 15, 256);
  const DynamicsTrace tr = build_trace(rotation_of(g), t, 15, 16);
  REQUIRE(tr.depth() == 15);
  for (const auto& r : tr.rows) {
    CHECK(r.certified);
    CHECK(r.sandwich);
    CHECK(std::fabs(r.U.to_double() - 1) < 1e-30);
  }
  const auto y = yoccoz_residuals(tr, 4);
  REQUIRE(y.size() == 14);
  for (const auto& row : y) {
    CHECK(row.C.to_double() < std::ldexp(1.0, -100));
    CHECK(row.admissible);
  }
  CHECK_THROWS_AS(yoccoz_residuals(tr, 0), ValidationError);
}

TEST_CASE("conjugated displacement brackets a closed-form sample") {
  PrecisionScope ps(256);
  const arith::Angle g = golden();
  const maps::CircleMap h = maps::CircleMap::trig({{1, Real(0.05), Real(0)}});
  const auto fam = maps::make_conjugated_rotations(h, {g}, maps::FamilyOptions{100, 1, 6});
  const arith::ConvergentTable t = arith::convergents(g, 8, 256);
  const maps::CircleMap hinv = h.inverse();
  for (int n = 3; n <= 8; ++n) {
    const Displacement d = displacement_extrema(fam.maps[0], t.q(n), t.row(n).p, 64);
    REQUIRE(d.certified);
    // |h^-1(h(x) + q theta - p) - x| sampled on a grid not aligned with
    // the one inside displacement_extrema.
    const Real shift = mul_z(g.mid(), t.q(n)) - Real(t.row(n).p);
    double hi = 0, lo = 1e300;
    for (int i = 0; i < 97; ++i) {
      const Real x(i / 97.0 + 0.0031);
      const double v = std::fabs((maps::eval(hinv, maps::eval(h, x) + shift) - x).to_double());
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    const double err = d.error_bound.to_double();
    CHECK(hi <= d.M.to_double() + err + 1e-30);
    CHECK(lo >= d.m.to_double() - err - 1e-30);
    // Sandwich around theta_n.
    const double th = t.row(n).theta.mid().to_double();
    CHECK(d.m.to_double() - err <= th);
    CHECK(th <= d.M.to_double() + err);
    CHECK(d.M > d.m);
  }
}

TEST_CASE("displacement budget") {
  PrecisionScope ps(256);
  const arith::Angle g = golden();
  const maps::CircleMap h = maps::CircleMap::trig({{1, Real(0.05), Real(0)}});
  const auto fam = maps::make_conjugated_rotations(h, {g}, maps::FamilyOptions{0, 1, 6});
  DisplacementOptions opt;
  opt.budget = 100;
  CHECK_THROWS_AS(displacement_extrema(fam.maps[0], BigInt(89), BigInt(55), 64, opt), BudgetExceeded);
}

TEST_CASE("transfer check on rotations") {
  PrecisionScope ps(256);
  const arith::Angle g = golden(), s = silver();
  const auto tg = arith::convergents(g, 10, 256);
  const auto ts = arith::convergents(s, 8, 256);
  const DynamicsTrace fg = build_trace(rotation_of(g), tg, 10, 8);
  const DynamicsTrace fs = build_trace(rotation_of(s), ts, 8, 8);
  const auto cfg = manual_config({{0, 2, 4}, {1, 3, 6}, {0, 6, 10}});
  const auto sw = transfer_check(fg, fs, cfg);
  REQUIRE(sw.size() == 2);
  // L = floor(theta~_{l'-1} / theta_{n-1}) from direct distances.
  const oracle::F phi = oracle::constant_tail(1), sil = oracle::constant_tail(2);
  const std::vector<std::pair<std::pair<const arith::ConvergentTable*, int>,
                              std::pair<const arith::ConvergentTable*, int>>>
      rows{{{&tg, 3}, {&ts, 2}}, {{&ts, 5}, {&tg, 5}}};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& [from, to] = rows[i];
    const oracle::F& xf = from.first == &tg ? phi : sil;
    const oracle::F& xt = to.first == &tg ? phi : sil;
    const double a = oracle::dist_k(xt, mpz_class(to.first->q(to.second))).d();
    const double b = oracle::dist_k(xf, mpz_class(from.first->q(from.second))).d();
    CHECK(sw[i].from_row == from.second);
    CHECK(sw[i].to_row == to.second);
    CHECK(sw[i].L == static_cast<long>(std::floor(a / b)));
    CHECK(sw[i].upper_ok);
    CHECK(sw[i].lower_ok);
    CHECK(sw[i].ratio_ok);
  }
}

TEST_CASE("exponent dynamics and local criterion on a rotation") {
  PrecisionScope ps(256);
  const arith::Angle g = golden();
  const auto t = arith::convergents(g, 12, 256);
  const DynamicsTrace tr = build_trace(rotation_of(g), t, 12, 8);
  const auto sched = arith::exponent_schedule(1, 2, 2, 2);
  const auto cfg = manual_config({{0, 3, 7}, {0, 8, 12}});
  const std::vector<arith::Angle> angles{g};
  const auto ex = exponent_dynamics(tr, cfg, sched, 2);
  REQUIRE(ex.size() == 2);
  for (const auto& r : ex) {
    CHECK(r.u_in == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.u_out == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.rho == doctest::Approx(1 - sched.sigma));
    CHECK(r.satisfied);
    // A = ln q_n / ln q_l.
    const double A = std::log(t.q(r.n).get_d()) / std::log(t.q(r.l).get_d());
    CHECK(r.A == doctest::Approx(A).epsilon(1e-12));
  }
  const LocalScan ls = local_criterion(tr, cfg, sched);
  REQUIRE(ls.first);
  CHECK(*ls.first == 7);
  for (const auto& r : ls.rows) {
    CHECK(r.log_rhs == doctest::Approx(-(1 - sched.sigma) * std::log(t.q(r.n).get_d())));
  }
}

TEST_CASE("dichotomy partial sums") {
  const arith::Angle g = golden(), s = silver();
  const std::vector<arith::Angle> angles{g, s};
  const auto cfg = manual_config({{0, 2, 4}, {1, 3, 6}, {0, 6, 10}, {1, 7, 12}});
  const Dichotomy d = dichotomy(cfg, angles);
  REQUIRE(d.log_first.size() == 2);
  const auto qg = oracle::denominators(std::vector<mpz_class>(20, 1));
  const auto qs = oracle::denominators(std::vector<mpz_class>(20, 2));
  auto ex = [](const std::vector<mpz_class>& q, int l, int n) {
    return std::log(q[static_cast<std::size_t>(n - 1)].get_d()) / std::log(q[static_cast<std::size_t>(l - 1)].get_d());
  };
  const double A1 = ex(qg, 2, 4), B1 = ex(qs, 3, 6), A2 = ex(qg, 6, 10), B2 = ex(qs, 7, 12);
  CHECK(d.log_first[0] == doctest::Approx(2 * std::log(A1) - std::log(B1)));
  CHECK(d.log_first[1] == doctest::Approx(2 * std::log(A1) - std::log(B1) + 2 * std::log(A2) - std::log(B2)));
  CHECK(d.log_second[1] == doctest::Approx(2 * std::log(B1) - std::log(A1) + 2 * std::log(B2) - std::log(A2)));
}
