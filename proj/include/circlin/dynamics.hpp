#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "circlin/arith.hpp"
#include "circlin/maps.hpp"
#include "circlin/real.hpp"

namespace circlin::dynamics {

struct DisplacementOptions {
  double rel_tol = 1e-3;            // certify when the grid error <= rel_tol * m
  int max_grid = 1 << 16;
  std::int64_t budget = 1L << 22;   // map evaluations per call
  int threads = 1;
};

// The displacement d(x) = f^q(x) - x - p has constant sign, so its
// extrema are critical points and the grid error is at most
// spacing^2 / 8 * sup|D^2 f^q|.
struct Displacement {
  Real M;            // grid sup of |f^q(x) - x - p|
  Real m;            // grid inf
  Real slope;        // grid max |Df^q - 1|
  Real curvature;    // grid max |D^2 f^q|
  Real error_bound;  // curvature * spacing^2 / 8
  bool certified = false;
  int grid = 0;
  std::int64_t evaluations = 0;
};

Displacement displacement_extrema(const maps::CircleMap& f, const BigInt& q, const BigInt& p, int grid,
                                  const DisplacementOptions& opt = {});

struct TraceRow {
  int n = 0;
  BigInt q, p;
  Real theta;
  Real M, m, U, u;
  Real error_bound;
  int grid = 0;
  bool certified = false;
  bool sandwich = true;  // m - err <= theta <= M + err
};

struct DynamicsTrace {
  std::vector<TraceRow> rows;
  BigInt integer_part;  // lift offset of the rotation number

  int depth() const { return static_cast<int>(rows.size()); }
  const TraceRow& row(int n) const;  // 1-based
};

// Rows n = 1..depth. The rotation number of f (cached, else measured) must
// match the table.
DynamicsTrace build_trace(const maps::CircleMap& f, const arith::ConvergentTable& table, int depth,
                          int grid, const DisplacementOptions& opt = {});

struct YoccozRow {
  int n = 0;
  Real C_upper;  // smallest C making the M inequality hold
  Real C_lower;  // smallest C making the m inequality hold
  Real C;        // max of the two
  Real running_max;
  bool admissible = true;  // C * M_{n-1}^{1/2} < 1
};

std::vector<YoccozRow> yoccoz_residuals(const DynamicsTrace& trace, int K);

struct SwitchReport {
  int index = 0;        // string i -> i+1
  int from_angle = 0;   // j_i
  int to_angle = 0;     // j_{i+1}
  int from_row = 0;     // n_i - 1
  int to_row = 0;       // l_{i+1} - 1
  BigInt L;
  bool upper_ok = false;   // M~ <= (1 + L) M
  bool lower_ok = false;   // m~ >= L m
  bool ratio_ok = false;   // U~ <= (1 + 1/L) U
  // rhs / lhs on grid values; infinite when L = 0 makes a side vacuous
  double upper_margin = 0, lower_margin = 0, ratio_margin = 0;
};

// traces[j] is the trace of the map with rotation number angle j.
std::vector<SwitchReport> transfer_check(const std::vector<const DynamicsTrace*>& traces,
                                         const arith::AlternatedConfig& config);
// Two-map form: the config's angle 0 is f, angle 1 is g.
std::vector<SwitchReport> transfer_check(const DynamicsTrace& f_trace, const DynamicsTrace& g_trace,
                                         const arith::AlternatedConfig& config);

struct ExponentRow {
  int string_index = 0;
  int l = 0, n = 0;
  double A = 0;
  double u_in = 0;   // ln M_{l-1} / ln theta_{l-1}
  double u_out = 0;  // ln M_{n-1} / ln theta_{n-1}
  double rho = 0;    // min(1 - sigma, A^b u_in)
  bool satisfied = false;   // u_out >= rho, i.e. M_{n-1} <= theta_{n-1}^rho
  bool q_bound_ok = false;  // M_{n-1} <= q_n^-rho
};

std::vector<ExponentRow> exponent_dynamics(const DynamicsTrace& trace, const arith::AlternatedConfig& config,
                                           const arith::ExponentSchedule& sched, int b, int angle = 0);

struct Dichotomy {
  // Partial sums of 2 ln A_j - ln B_j and 2 ln B_j - ln A_j over switch pairs.
  std::vector<double> log_first, log_second;
  bool growth = false;  // one of the two is strictly increasing
};

Dichotomy dichotomy(const arith::AlternatedConfig& config, std::span<const arith::Angle> angles);

struct LocalRow {
  int n = 0;
  double log_lhs = 0;  // ln M_{n-1}
  double log_rhs = 0;  // -(1 - sigma) ln q_n
  bool ok = false;
};

struct LocalScan {
  std::optional<int> first;  // first qualifying n
  std::vector<LocalRow> rows;
};

// Scans string ends n_i of `angle` (all trace rows when the config has no
// string for it) for M_{n-1} <= q_n^-(1 - sigma).
LocalScan local_criterion(const DynamicsTrace& trace, const arith::AlternatedConfig& config,
                          const arith::ExponentSchedule& sched, int angle = 0);

}  // namespace circlin::dynamics
