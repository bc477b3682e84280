#pragma once

#include <vector>

#include "circlin/real.hpp"

namespace circlin::jets {

inline constexpr int kMaxOrder = 64;

// Truncated power series in t: s[j] is the coefficient of t^j.
using Series = std::vector<Real>;

Series series_constant(const Real& c, std::size_t len);
// x0 + t
Series series_variable(const Real& x0, std::size_t len);
Series operator+(const Series& a, const Series& b);
Series operator-(const Series& a, const Series& b);
Series series_scale(const Series& a, const Real& c);
Series series_mul(const Series& a, const Series& b);
// Requires a[0] != 0.
Series series_reciprocal(const Series& a);
Series series_exp(const Series& a);
// Requires a[0] > 0.
Series series_log(const Series& a);
void series_sin_cos(const Series& a, Series& s, Series& c);
// d/dt, one coefficient shorter.
Series series_derivative(const Series& a);
// outer(inner(t)) where `outer` is expanded around inner[0]; O(K^3) Horner.
Series series_compose(const Series& outer, const Series& inner);

// Jet of a real function at `base`: Taylor coefficients c_j = f^(j)(base)/j!
// for j = 0..order.
class Jet {
 public:
  Jet() = default;
  Jet(Real base, Series coeffs);
  static Jet identity(const Real& x0, int order);

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  const Real& base() const { return base_; }
  const Real& value() const { return coeffs_[0]; }
  const Series& coeffs() const { return coeffs_; }
  // f^(j)(base)
  Real derivative(int j) const;

 private:
  Real base_;
  Series coeffs_;
};

// Jet of outer o inner at inner's base. outer.base() must equal
// inner.value() within `tol` (negative: 2^-(precision-8) relative).
Jet jet_compose(const Jet& outer, const Jet& inner, const Real& tol = Real(-1));

// Taylor coefficients (orders 0..K-1) of ln D phi for the jet of phi.
// Throws ValidationError if D phi <= 0 at the base point.
Series jet_log_derivative(const Jet& j);

// j! as a Real.
Real factorial(int j);

}  // namespace circlin::jets
