#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "circlin/arith.hpp"
#include "circlin/jets.hpp"
#include "circlin/real.hpp"

namespace circlin::maps {

using jets::Series;

// alpha sin(2 pi m x) + beta cos(2 pi m x)
struct Harmonic {
  int m = 1;
  Real alpha;
  Real beta;
};

enum class NodeKind { rotation, trig, compose, inverse, power };

struct Node {
  NodeKind kind = NodeKind::rotation;
  Real shift;                       // rotation amount, or trig constant term
  std::vector<Harmonic> harmonics;  // trig
  std::shared_ptr<const Node> outer;  // compose
  std::shared_ptr<const Node> inner;  // compose, inverse, power
  long exponent = 0;                  // power
};

// Lift of an orientation-preserving circle diffeomorphism, built from a
// closed vocabulary: rotations x + c, trig perturbations
// x + c + sum(alpha_m sin 2 pi m x + beta_m cos 2 pi m x), composition,
// inverse and integer powers.
class CircleMap {
 public:
  CircleMap();  // identity
  static CircleMap rotation(const Real& c);
  static CircleMap trig(std::vector<Harmonic> harmonics, const Real& shift = Real(0));

  // outer o inner
  friend CircleMap compose(const CircleMap& outer, const CircleMap& inner);
  // Throws CertificationError unless Df > 0 is certified.
  CircleMap inverse() const;
  CircleMap power(long n) const;

  const Node& root() const { return *root_; }
  std::shared_ptr<const Node> root_ptr() const { return root_; }
  std::string describe() const;

  std::optional<arith::Angle> cached_rotation_number;

 private:
  explicit CircleMap(std::shared_ptr<const Node> n) : root_(std::move(n)) {}
  std::shared_ptr<const Node> root_;
};

CircleMap compose(const CircleMap& outer, const CircleMap& inner);

// True if Df > 0 is certified (closed-form bound, else a grid/Lipschitz
// check on trig nodes).
bool certify_diffeo(const CircleMap& f);

// Y = f(X) as series; LD (optional) = ln Df(X(t)).
void apply(const CircleMap& f, const Series& X, Series& Y, Series* LD);
// Scalar value f(x).
Real eval(const CircleMap& f, const Real& x);
// Double fast path: f(x) and optionally Df(x).
double eval_double(const CircleMap& f, double x, double* deriv = nullptr);

// Jet of the lift at x.
jets::Jet evaluate(const CircleMap& f, const Real& x, int jet_order);

struct OrbitOptions {
  std::int64_t max_evaluations = 100000000;
  bool want_log_derivative = true;
};

struct OrbitJet {
  jets::Jet jet;       // jet of f^q at x
  Series log_derivative;  // Taylor coefficients of ln Df^q at x (cocycle sum)
};

// Jet of f^q at x by orbit accumulation; q < 0 iterates the inverse.
OrbitJet iterate(const CircleMap& f, const BigInt& q, const Real& x, int jet_order,
                 const OrbitOptions& opt = {});
// f^q(x) only.
Real iterate_value(const CircleMap& f, const BigInt& q, const Real& x,
                   std::int64_t max_evaluations = 100000000);

struct RotationOptions {
  std::int64_t max_q = 10000000;  // largest iterate tried
};

struct RotationNumber {
  arith::Angle angle;  // fractional part; CF prefix certified by sign tests
  BigInt integer_part;
  // p_lo/q_lo < fractional part < p_hi/q_hi
  BigInt p_lo, q_lo, p_hi, q_hi;
  Interval enclosure;  // of the fractional part
};

RotationNumber rotation_number(const CircleMap& f, int table_depth,
                               const RotationOptions& opt = {});

// sup over x = i/grid of |f(g(x)) - g(f(x))|.
Real commutation_defect(const CircleMap& f, const CircleMap& g, int grid, int threads = 1);

enum class Provenance { conjugated_rotations, power_closure, successive_conjugation };

struct CommutingFamily {
  std::vector<CircleMap> maps;
  std::vector<arith::Angle> rotation_numbers;
  Provenance provenance = Provenance::conjugated_rotations;
  std::optional<CircleMap> h;  // conjugator when known
  Real defect;                 // measured pairwise commutation defect
  int defect_grid = 0;
};

// 10^-(bits/4)
Real family_tolerance(long bits);

struct FamilyOptions {
  int grid = 10000;        // commutation check grid (0 disables)
  int threads = 1;
  int check_depth = 6;     // rotation-number cross-check depth for tilde families
};

CommutingFamily make_conjugated_rotations(const CircleMap& h, const std::vector<arith::Angle>& angles,
                                          const FamilyOptions& opt = {});
CommutingFamily make_tilde_family(const CommutingFamily& base, int p, const FamilyOptions& opt = {});

// Staged conjugator H = h_stages o ... o h_1 with
// h_j(x) = x + amp_j/(2 pi N_j) sin(2 pi N_j x), N_j = mult_j * q_burst.
struct LiouvilleSchedule {
  int burst_index = 0;        // s with a large a_{s+1}; 0 picks the largest ratio
  std::vector<double> amplitudes;   // amp_j in [0, 1)
  std::vector<int> multipliers;     // mult_j >= 1 (default j + 1)
};

struct LiouvilleFamily {
  CommutingFamily family;
  int burst_index = 0;
  BigInt burst_q;
};

LiouvilleFamily make_liouville_family(const arith::Angle& target, const LiouvilleSchedule& schedule,
                                      int stages, const std::vector<arith::Angle>& companions = {},
                                      const FamilyOptions& opt = {});

}  // namespace circlin::maps
