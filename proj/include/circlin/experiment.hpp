#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "circlin/arith.hpp"
#include "circlin/maps.hpp"
#include "circlin/serialize.hpp"

namespace circlin::experiment {

struct NamedAngle {
  std::string name;
  io::Json entry;  // as written; built into an Angle at the run precision
};

struct ManualString {
  int angle = 0;
  int l = 0, n = 0;
};

enum class FamilyKind { rotation, conjugated, liouville };

struct FamilySettings {
  FamilyKind kind = FamilyKind::rotation;
  std::vector<maps::Harmonic> h;  // conjugated: h(x) = x + sum(...)
  std::string h_shift = "0";
  int stages = 3;                 // liouville
  maps::LiouvilleSchedule liouville;
  int check_grid = 10000;         // commutation check grid
};

struct ExperimentConfig {
  std::string name = "experiment";
  long precision_bits = 256;
  int threads = 1;
  std::string seed = "0";
  std::string out_dir = "out";
  std::vector<NamedAngle> angles;

  // schedule
  double nu = 1;
  int d = 2;
  int r = 2;
  int b = 2;
  double K = 2;
  double xi = 0.5;
  std::optional<double> tau;

  FamilySettings family;

  // angles job
  int table_depth = 12;
  std::int64_t dset_k_lo = 1, dset_k_hi = 1000;
  double dset_tau = 2;
  std::optional<std::string> dset_C;  // absent: fitted

  // strings job
  int strings_depth = 4;
  std::string strings_start = "2";
  int strings_max_rows = 2000;

  // run job
  int run_depth = 12;
  std::vector<std::pair<int, int>> run_depths;  // per-angle (index, depth) overrides
  int run_grid = 64;
  std::int64_t run_budget = 1L << 22;
  double run_rel_tol = 1e-3;
  int yoccoz_K = 4;
  std::vector<ManualString> strings;  // empty: searched
  bool search_strings = false;

  // conjugacy job
  std::int64_t cesaro_terms = 10000;
  int cesaro_grid = 512;
  bool high_precision = false;
  int delta_k = 4;
  int delta_s_lo = 1, delta_s_hi = 8;
  int delta_grid = 16;
  bool gate = true;
  int gate_grid = 16;
  std::string times_bound = "0";  // 0 disables the Diophantine-time average
  int times_grid = 64;
  std::int64_t conj_budget = 1L << 30;

  io::Json source;  // parsed file, for hashing
};

// Errors are ValidationError with "origin: field 'path': message".
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);

struct Overrides {
  std::optional<long> precision_bits;
  std::optional<int> depth;
  std::optional<std::int64_t> budget;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

// SHA-256 of the effective settings (thread count and output directory
// excluded, so reruns with other values hash the same).
std::string config_hash(const ExperimentConfig& cfg);

std::vector<arith::Angle> build_angles(const ExperimentConfig& cfg);
arith::ExponentSchedule build_schedule(const ExperimentConfig& cfg);
maps::CommutingFamily build_family(const ExperimentConfig& cfg, const std::vector<arith::Angle>& angles,
                                   int* burst_index = nullptr);

struct CommandResult {
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  io::Json summary;
};

CommandResult cmd_angles(const ExperimentConfig& cfg);
CommandResult cmd_strings(const ExperimentConfig& cfg);
CommandResult cmd_run(const ExperimentConfig& cfg);
CommandResult cmd_conjugacy(const ExperimentConfig& cfg);
CommandResult cmd_all(const ExperimentConfig& cfg);

}  // namespace circlin::experiment
