#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "circlin/arith.hpp"
#include "circlin/maps.hpp"
#include "circlin/real.hpp"

namespace circlin::conjugacy {

struct TimeTerm {
  int s = 0;
  BigInt a;
};

// Positive integers m <= bound of the form sum a_s q_s, one term per index
// s in [l_i, n_i - 1] of the strings of one angle, 0 <= a_s <= q_{s+1}/q_s.
struct DiophantineTimes {
  int angle = 0;
  BigInt bound;
  std::vector<BigInt> members;                     // sorted
  std::vector<std::vector<TimeTerm>> decompositions;  // one per member
  bool truncated = false;
};

DiophantineTimes diophantine_times(const arith::AlternatedConfig& config, const arith::ConvergentTable& table,
                                   const BigInt& bound, int angle = 0, std::int64_t max_members = 1 << 20);

struct DensityResult {
  double max_gap = 1;
  std::size_t points = 0;
};

// Largest circular gap of {u theta + v beta mod 1}, u in {0} + A,
// v in {0} + A~.
DensityResult orbit_density_check(const DiophantineTimes& A, const DiophantineTimes& A_tilde,
                                  const arith::Angle& theta, const arith::Angle& beta,
                                  std::int64_t max_points = 1 << 24);

struct ConjugacyOptions {
  int threads = 1;
  std::int64_t budget = 1L << 30;  // map evaluations
  // Orbits in MPFR at the working precision instead of double.
  bool high_precision = false;
};

struct ConjugacyEstimate {
  std::vector<Real> x;      // j / grid, j = 0..grid
  std::vector<Real> h;      // h_est(x), h_est(0) = 0
  std::int64_t n_terms = 0;
  Real sup_defect;          // sup_x |h_est(f(x)) - h_est(x) - theta|
  Real periodic_defect;     // |h_est(1) - h_est(0) - 1|
  bool monotone = true;
};

// h_n(x) = (1/n) sum_{i<n} (f^i(x) - i theta), normalized at 0. The defect
// telescopes to |f^n(x) - x - n theta| / n.
ConjugacyEstimate cesaro_conjugacy(const maps::CircleMap& f, const arith::Angle& theta, std::int64_t n_terms,
                                   int grid, const ConjugacyOptions& opt = {});

struct TimesConjugacy {
  ConjugacyEstimate estimate;
  Real plain_defect;  // plain Cesaro defect at the same number of terms
};

// Average of f^u(g^v(x)) - u theta - v beta over u in {0} + A,
// v in {0} + A~.
TimesConjugacy conjugacy_at_diophantine_times(const maps::CircleMap& f, const maps::CircleMap& g,
                                              const DiophantineTimes& A, const DiophantineTimes& A_tilde,
                                              const arith::Angle& theta, const arith::Angle& beta, int grid,
                                              const ConjugacyOptions& opt = {});

struct DeltaOptions {
  int threads = 1;
  std::int64_t budget = 1L << 26;  // map evaluations per row
  double refine_tol = 0.05;        // relative change allowed between grid G and 2G
};

struct DeltaRow {
  int s = 0;
  int k = 0;
  BigInt q;
  Real theta;
  Real sup_log;  // grid sup |D^{k-1} ln Df^{q_s}|
  Real delta;    // sup_log + theta_s
  Real bound;    // q_s^{(k-1)/2}
  bool bound_ok = false;
  bool certified = false;
  int grid = 0;
};

std::vector<DeltaRow> delta_norms(const maps::CircleMap& f, const arith::ConvergentTable& table, int s_lo,
                                  int s_hi, int k, int grid, const DeltaOptions& opt = {});

// sum_{i<q} (ln Df)'(f^i x) Df^i(x), one orbit step at a time.
Real cocycle_direct(const maps::CircleMap& f, const BigInt& q, const Real& x);

struct GateOptions {
  int grid = 32;
  int threads = 1;
  std::int64_t budget = 1L << 26;
  bool full_a = false;  // every a in [1, q_{s+1}/q_s] instead of three samples
};

struct GateRow {
  int s = 0;
  BigInt q, q_next;
  Real delta;
  bool scale_ok = false;  // (Delta_s q_{s+1})^{1/k} / q_s <= q_s^{-1/4}
  double scale_log_lhs = 0, scale_log_rhs = 0;
  std::vector<BigInt> a_values;
  std::vector<Real> norms;  // ||ln D f^{a q_s}||_{r+1} per a
  Real norm;                // max over a
  double norm_ratio = 0;    // norm / (q_s^-1 (Delta_s q_{s+1})^rho), rho = (r+2)/k
};

struct GateReport {
  std::vector<GateRow> rows;
  int r = 0;
  int k = 0;
  double norm_ratio_max = 0;
  std::optional<double> slope;  // least-squares slope of ln norm against ln q_s
  bool decay = false;           // slope < 0, or every norm vanishes
};

// ||phi||_{r+1} = max over j = 1..r+1 of grid sup |D^j phi|.
GateReport regularity_gate(const maps::CircleMap& f, const std::vector<DeltaRow>& delta,
                           const arith::ConvergentTable& table, const arith::ExponentSchedule& sched,
                           const GateOptions& opt = {});

}  // namespace circlin::conjugacy
