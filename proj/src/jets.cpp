#include "circlin/jets.hpp"

#include <algorithm>

#include "circlin/error.hpp"

namespace circlin::jets {

namespace {

long series_bits(const Series& a) {
  long b = working_precision();
  for (const auto& x : a) b = std::max(b, x.bits());
  return b;
}

}  // namespace

Series series_constant(const Real& c, std::size_t len) {
  Series s(len, Real::zero(std::max(c.bits(), working_precision())));
  if (len > 0) s[0] = c;
  return s;
}

Series series_variable(const Real& x0, std::size_t len) {
  Series s = series_constant(x0, len);
  if (len > 1) s[1] = Real(1);
  return s;
}

Series operator+(const Series& a, const Series& b) {
  const std::size_t n = std::min(a.size(), b.size());
  Series r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = a[i] + b[i];
  return r;
}

Series operator-(const Series& a, const Series& b) {
  const std::size_t n = std::min(a.size(), b.size());
  Series r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = a[i] - b[i];
  return r;
}

Series series_scale(const Series& a, const Real& c) {
  Series r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * c;
  return r;
}

Series series_mul(const Series& a, const Series& b) {
  const std::size_t n = std::min(a.size(), b.size());
  const long bits = std::max(series_bits(a), series_bits(b));
  Series r(n, Real::zero(bits));
  Real t = Real::zero(bits);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i <= k; ++i) {
      mpfr_mul(t.get(), a[i].get(), b[k - i].get(), MPFR_RNDN);
      mpfr_add(r[k].get(), r[k].get(), t.get(), MPFR_RNDN);
    }
  }
  return r;
}

Series series_reciprocal(const Series& a) {
  if (a.empty()) return {};
  if (a[0].is_zero()) throw ValidationError("series reciprocal of a series with zero constant term");
  const std::size_t n = a.size();
  const long bits = series_bits(a);
  Series b(n, Real::zero(bits));
  Real inv0 = Real(1).rounded(bits) / a[0];
  b[0] = inv0;
  Real acc = Real::zero(bits), t = Real::zero(bits);
  for (std::size_t k = 1; k < n; ++k) {
    mpfr_set_zero(acc.get(), 1);
    for (std::size_t i = 1; i <= k; ++i) {
      mpfr_mul(t.get(), a[i].get(), b[k - i].get(), MPFR_RNDN);
      mpfr_add(acc.get(), acc.get(), t.get(), MPFR_RNDN);
    }
    b[k] = -(acc * inv0);
  }
  return b;
}

Series series_exp(const Series& a) {
  if (a.empty()) return {};
  const std::size_t n = a.size();
  const long bits = series_bits(a);
  Series b(n, Real::zero(bits));
  b[0] = exp(a[0].rounded(bits));
  Real acc = Real::zero(bits), t = Real::zero(bits);
  for (std::size_t k = 1; k < n; ++k) {
    mpfr_set_zero(acc.get(), 1);
    for (std::size_t i = 1; i <= k; ++i) {
      mpfr_mul(t.get(), a[i].get(), b[k - i].get(), MPFR_RNDN);
      mpfr_mul_ui(t.get(), t.get(), i, MPFR_RNDN);
      mpfr_add(acc.get(), acc.get(), t.get(), MPFR_RNDN);
    }
    mpfr_div_ui(b[k].get(), acc.get(), k, MPFR_RNDN);
  }
  return b;
}

Series series_log(const Series& a) {
  if (a.empty()) return {};
  if (!(a[0].sign() > 0)) throw ValidationError("series log of a non-positive constant term");
  const std::size_t n = a.size();
  const long bits = series_bits(a);
  Series b(n, Real::zero(bits));
  b[0] = log(a[0].rounded(bits));
  Real acc = Real::zero(bits), t = Real::zero(bits);
  for (std::size_t k = 1; k < n; ++k) {
    mpfr_set_zero(acc.get(), 1);
    for (std::size_t i = 1; i < k; ++i) {
      mpfr_mul(t.get(), b[i].get(), a[k - i].get(), MPFR_RNDN);
      mpfr_mul_ui(t.get(), t.get(), i, MPFR_RNDN);
      mpfr_add(acc.get(), acc.get(), t.get(), MPFR_RNDN);
    }
    mpfr_div_ui(acc.get(), acc.get(), k, MPFR_RNDN);
    mpfr_sub(acc.get(), a[k].get(), acc.get(), MPFR_RNDN);
    mpfr_div(b[k].get(), acc.get(), a[0].get(), MPFR_RNDN);
  }
  return b;
}

void series_sin_cos(const Series& a, Series& s, Series& c) {
  const std::size_t n = a.size();
  const long bits = series_bits(a);
  s.assign(n, Real::zero(bits));
  c.assign(n, Real::zero(bits));
  if (n == 0) return;
  sin_cos(a[0].rounded(bits), s[0], c[0]);
  Real as = Real::zero(bits), ac = Real::zero(bits), t = Real::zero(bits);
  for (std::size_t k = 1; k < n; ++k) {
    mpfr_set_zero(as.get(), 1);
    mpfr_set_zero(ac.get(), 1);
    for (std::size_t i = 1; i <= k; ++i) {
      mpfr_mul_ui(t.get(), a[i].get(), i, MPFR_RNDN);
      Real u = Real::zero(bits);
      mpfr_mul(u.get(), t.get(), c[k - i].get(), MPFR_RNDN);
      mpfr_add(as.get(), as.get(), u.get(), MPFR_RNDN);
      mpfr_mul(u.get(), t.get(), s[k - i].get(), MPFR_RNDN);
      mpfr_add(ac.get(), ac.get(), u.get(), MPFR_RNDN);
    }
    mpfr_div_ui(s[k].get(), as.get(), k, MPFR_RNDN);
    mpfr_div_ui(c[k].get(), ac.get(), k, MPFR_RNDN);
    mpfr_neg(c[k].get(), c[k].get(), MPFR_RNDN);
  }
}

Series series_derivative(const Series& a) {
  if (a.size() <= 1) return {};
  Series d(a.size() - 1);
  for (std::size_t k = 0; k + 1 < a.size(); ++k) {
    d[k] = a[k + 1];
    mpfr_mul_ui(d[k].get(), d[k].get(), k + 1, MPFR_RNDN);
  }
  return d;
}

Series series_compose(const Series& outer, const Series& inner) {
  const std::size_t n = inner.size();
  if (n == 0 || outer.empty()) return {};
  Series shift = inner;
  shift[0] = Real::zero(series_bits(inner));
  const std::size_t K = std::min(outer.size(), n) - 1;
  Series r = series_constant(outer[K], n);
  for (std::size_t j = K; j-- > 0;) {
    r = series_mul(r, shift);
    r[0] += outer[j];
  }
  return r;
}

Jet::Jet(Real base, Series coeffs) : base_(std::move(base)), coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw ValidationError("jet needs at least one coefficient");
  if (order() > kMaxOrder) {
    throw ValidationError("jet order " + std::to_string(order()) + " exceeds cap " +
                          std::to_string(kMaxOrder));
  }
  for (const auto& c : coeffs_) {
    if (!c.is_finite()) throw CertificationError("non-finite jet coefficient");
  }
}

Jet Jet::identity(const Real& x0, int order) {
  if (order < 0 || order > kMaxOrder) throw ValidationError("jet order out of range");
  return Jet(x0, series_variable(x0, static_cast<std::size_t>(order) + 1));
}

Real factorial(int j) {
  Real f(1);
  for (int i = 2; i <= j; ++i) mpfr_mul_ui(f.get(), f.get(), static_cast<unsigned long>(i), MPFR_RNDN);
  return f;
}

Real Jet::derivative(int j) const {
  if (j < 0 || j > order()) throw ValidationError("jet derivative order out of range");
  return coeffs_[static_cast<std::size_t>(j)] * factorial(j);
}

Jet jet_compose(const Jet& outer, const Jet& inner, const Real& tol) {
  if (outer.order() != inner.order()) {
    throw ValidationError("jet_compose: order mismatch (" + std::to_string(outer.order()) + " vs " +
                          std::to_string(inner.order()) + ")");
  }
  Real t = tol;
  if (t.sign() < 0) {
    const long bits = std::min(outer.base().bits(), inner.value().bits());
    t = max(Real(1), abs(inner.value()));
    mpfr_mul_2si(t.get(), t.get(), -(bits - 8), MPFR_RNDN);
  }
  if (abs(outer.base() - inner.value()) > t) {
    throw ValidationError("jet_compose: outer base point " + outer.base().str(20) +
                          " differs from inner value " + inner.value().str(20));
  }
  return Jet(inner.base(), series_compose(outer.coeffs(), inner.coeffs()));
}

Series jet_log_derivative(const Jet& j) {
  if (j.order() < 1) throw ValidationError("jet_log_derivative needs order >= 1");
  Series d = series_derivative(j.coeffs());
  if (!(d[0].sign() > 0)) {
    throw ValidationError("jet_log_derivative: derivative " + d[0].str(12) +
                          " is not positive (not a diffeomorphism jet)");
  }
  return series_log(d);
}

}  // namespace circlin::jets
