#include "doctest.h"

#include <cmath>

#include "circlin/error.hpp"
#include "circlin/jets.hpp"

using namespace circlin;
using namespace circlin::jets;

namespace {

double c(const Series& s, std::size_t j) { return s[j].to_double(); }

// Taylor coefficients of a closed-form function at x0, from its known
// derivatives.
Series from_derivs(const std::vector<double>& d) {
  Series s;
  double f = 1;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (j > 0) f *= static_cast<double>(j);
    s.push_back(Real(d[j] / f));
  }
  return s;
}

}  // namespace

TEST_CASE("series arithmetic matches closed forms") {
  PrecisionScope ps(200);
  const std::size_t L = 8;
  const Series t = series_variable(Real(0), L);
  // (1 + t)^2 = 1 + 2t + t^2
  const Series one_t = series_constant(Real(1), L) + t;
  const Series sq = series_mul(one_t, one_t);
  CHECK(c(sq, 0) == 1);
  CHECK(c(sq, 1) == 2);
  CHECK(c(sq, 2) == 1);
  CHECK(c(sq, 3) == 0);
  // 1/(1 + t) = sum (-1)^j t^j
  const Series rec = series_reciprocal(one_t);
  for (std::size_t j = 0; j < L; ++j) CHECK(c(rec, j) == doctest::Approx(j % 2 ? -1.0 : 1.0));
  // exp(t) = sum t^j / j!
  const Series e = series_exp(t);
  for (std::size_t j = 0; j < L; ++j) {
    CHECK(c(e, j) == doctest::Approx(1.0 / std::tgamma(static_cast<double>(j) + 1)));
  }
  // log(1 + t) = sum (-1)^(j+1) t^j / j
  const Series lg = series_log(one_t);
  CHECK(c(lg, 0) == doctest::Approx(0.0));
  for (std::size_t j = 1; j < L; ++j) {
    CHECK(c(lg, j) == doctest::Approx((j % 2 ? 1.0 : -1.0) / static_cast<double>(j)));
  }
  // sin/cos at x0 = 0.3
  Series s, co;
  series_sin_cos(series_variable(Real(0.3), L), s, co);
  const std::vector<double> ds{std::sin(0.3), std::cos(0.3), -std::sin(0.3), -std::cos(0.3),
                               std::sin(0.3), std::cos(0.3), -std::sin(0.3), -std::cos(0.3)};
  const Series ref = from_derivs(ds);
  for (std::size_t j = 0; j < L; ++j) CHECK(c(s, j) == doctest::Approx(c(ref, j)).epsilon(1e-12));
  // Derivative drops one coefficient.
  const Series de = series_derivative(e);
  CHECK(de.size() == L - 1);
  CHECK(c(de, 2) == doctest::Approx(0.5));
}

TEST_CASE("series errors") {
  PrecisionScope ps(128);
  CHECK_THROWS_AS(series_reciprocal(series_constant(Real(0), 4)), ValidationError);
  CHECK_THROWS_AS(series_log(series_constant(Real(-1), 4)), ValidationError);
}

TEST_CASE("exp and log are inverse") {
  PrecisionScope ps(256);
  Series a = series_variable(Real(0.7), 12);
  a = series_mul(a, a) + series_constant(Real(0.1), 12);
  const Series back = series_log(series_exp(a));
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(std::fabs((back[j] - a[j]).to_double()) < 1e-60);
  }
}

TEST_CASE("jet composition follows the chain rule") {
  PrecisionScope ps(256);
  // inner(x) = x^2 at x0 = 0.5, outer(y) = sin y at y0 = 0.25.
  const int K = 6;
  const Real x0(0.5);
  const Series X = series_variable(x0, K + 1);
  const Jet inner(x0, series_mul(X, X));
  Series s, co;
  series_sin_cos(series_variable(Real(0.25), K + 1), s, co);
  const Jet outer(Real(0.25), s);
  const Jet h = jet_compose(outer, inner);
  // Direct: sin(x^2) expanded at 0.5.
  Series sd, cd;
  series_sin_cos(series_mul(X, X), sd, cd);
  REQUIRE(h.order() == K);
  for (int j = 0; j <= K; ++j) {
    CHECK(std::fabs((h.coeffs()[static_cast<std::size_t>(j)] - sd[static_cast<std::size_t>(j)]).to_double()) < 1e-60);
  }
  // d/dx sin(x^2) = 2x cos(x^2)
  CHECK(h.derivative(1).to_double() == doctest::Approx(2 * 0.5 * std::cos(0.25)).epsilon(1e-14));
  // Mismatched base is rejected.
  const Jet off(Real(0.3), s);
  CHECK_THROWS_AS(jet_compose(off, inner), ValidationError);
}

TEST_CASE("log derivative of a jet") {
  PrecisionScope ps(256);
  // phi(x) = exp(2x): ln phi'(x) = ln 2 + 2x.
  const Real x0(0.1);
  const Series X = series_variable(x0, 8);
  const Jet j(x0, series_exp(series_scale(X, Real(2))));
  const Series ld = jet_log_derivative(j);
  REQUIRE(ld.size() == 7);
  CHECK(ld[0].to_double() == doctest::Approx(std::log(2.0) + 0.2).epsilon(1e-14));
  CHECK(ld[1].to_double() == doctest::Approx(2.0).epsilon(1e-14));
  for (std::size_t k = 2; k < ld.size(); ++k) CHECK(std::fabs(ld[k].to_double()) < 1e-60);
  // Decreasing map is rejected.
  const Jet dec(x0, series_scale(X, Real(-1)));
  CHECK_THROWS_AS(jet_log_derivative(dec), ValidationError);
}

TEST_CASE("factorial and identity jet") {
  CHECK(factorial(0).to_double() == 1);
  CHECK(factorial(10).to_double() == 3628800);
  const Jet id = Jet::identity(Real(0.4), 5);
  CHECK(id.order() == 5);
  CHECK(id.derivative(1).to_double() == 1);
  CHECK(id.derivative(2).to_double() == 0);
}
