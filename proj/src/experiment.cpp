#include "circlin/experiment.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "circlin/conjugacy.hpp"
#include "circlin/dynamics.hpp"
#include "circlin/error.hpp"

namespace circlin::experiment {

using io::Json;

namespace {

// ------------------------------------------------------------ parsing

struct Ctx {
  std::string origin;

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ValidationError(origin + ": field '" + path + "': " + msg);
  }

  void keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail(join(path, it.key()), "unknown field");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  double as_double(const Json& v, const std::string& path) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(s.c_str(), &end);
      if (!s.empty() && end == s.c_str() + s.size() && errno == 0 && std::isfinite(x)) return x;
    }
    fail(path, "expected a number");
  }

  long long as_int(const Json& v, const std::string& path) const {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      char* end = nullptr;
      errno = 0;
      const long long x = std::strtoll(s.c_str(), &end, 10);
      if (!s.empty() && end == s.c_str() + s.size() && errno == 0) return x;
    }
    fail(path, "expected an integer");
  }

  BigInt as_bigint(const Json& v, const std::string& path) const {
    if (v.is_number_integer()) return BigInt(std::to_string(v.get<long long>()));
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      BigInt z;
      if (!s.empty() && z.set_str(s, 10) == 0) return z;
    }
    fail(path, "expected an integer (string for large values)");
  }

  bool as_bool(const Json& v, const std::string& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  std::string as_string(const Json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  // Decimal string that parses as a real.
  std::string as_real_text(const Json& v, const std::string& path) const {
    if (v.is_number()) return v.dump();
    const std::string s = as_string(v, path);
    as_double(v, path);
    return s;
  }

  template <typename T, typename F>
  void opt(const Json& obj, const std::string& path, const char* key, T& out, F conv) const {
    if (obj.contains(key)) out = static_cast<T>((this->*conv)(obj.at(key), join(path, key)));
  }

  long long positive(const Json& obj, const std::string& path, const char* key, long long def,
                     long long lo = 1) const {
    if (!obj.contains(key)) return def;
    const long long v = as_int(obj.at(key), join(path, key));
    if (v < lo) fail(join(path, key), "must be >= " + std::to_string(lo));
    return v;
  }
};

void check_angle_entry(const Ctx& c, const Json& entry, const std::string& path) {
  c.keys(entry, path, {"preset", "cf", "tail", "value"});
  if (entry.contains("value")) {
    c.fail(Ctx::join(path, "value"),
           "a finite decimal or fraction is a rational number; give an irrational angle by its continued "
           "fraction (cf + tail)");
  }
  if (entry.contains("preset")) {
    const std::string p = c.as_string(entry.at("preset"), Ctx::join(path, "preset"));
    if (p != "golden" && p != "silver") c.fail(Ctx::join(path, "preset"), "unknown preset '" + p + "'");
    if (entry.contains("cf") || entry.contains("tail")) c.fail(path, "preset excludes cf and tail");
    return;
  }
  if (!entry.contains("cf")) c.fail(path, "needs 'preset' or 'cf'");
  const Json& cf = entry.at("cf");
  if (!cf.is_array()) c.fail(Ctx::join(path, "cf"), "expected an array of partial quotients");
  for (std::size_t i = 0; i < cf.size(); ++i) {
    const std::string p = Ctx::join(path, "cf") + "[" + std::to_string(i) + "]";
    if (c.as_bigint(cf[i], p) < 1) c.fail(p, "partial quotients must be >= 1");
  }
  const std::string tp = Ctx::join(path, "tail");
  if (!entry.contains("tail")) c.fail(tp, "missing; use \"reject\", {\"constant\": a} or {\"periodic\": [...]}");
  const Json& t = entry.at("tail");
  if (t.is_string()) {
    const std::string s = t.get<std::string>();
    if (s == "finite") c.fail(tp, "a terminating continued fraction is a rational angle");
    if (s != "reject") c.fail(tp, "unknown tail '" + s + "'");
    if (cf.empty()) c.fail(Ctx::join(path, "cf"), "a rejecting tail needs at least one coefficient");
    return;
  }
  c.keys(t, tp, {"constant", "periodic"});
  if (t.contains("constant")) {
    if (c.as_bigint(t.at("constant"), tp + ".constant") < 1) c.fail(tp + ".constant", "must be >= 1");
  } else if (t.contains("periodic")) {
    const Json& blk = t.at("periodic");
    if (!blk.is_array() || blk.empty()) c.fail(tp + ".periodic", "expected a non-empty array");
    for (std::size_t i = 0; i < blk.size(); ++i) {
      const std::string p = tp + ".periodic[" + std::to_string(i) + "]";
      if (c.as_bigint(blk[i], p) < 1) c.fail(p, "partial quotients must be >= 1");
    }
  } else {
    c.fail(tp, "expected 'constant' or 'periodic'");
  }
}

arith::Angle make_angle(const Json& entry, long bits) {
  const Ctx c{"angle"};
  if (entry.contains("preset")) {
    const std::string p = entry.at("preset").get<std::string>();
    const BigInt a = p == "golden" ? 1 : 2;
    return arith::Angle::from_cf({a}, arith::TailPolicy::constant(a), bits);
  }
  std::vector<BigInt> cf;
  for (const auto& v : entry.at("cf")) cf.push_back(c.as_bigint(v, "cf"));
  const Json& t = entry.at("tail");
  arith::TailPolicy tail = arith::TailPolicy::reject();
  if (t.is_object() && t.contains("constant")) {
    tail = arith::TailPolicy::constant(c.as_bigint(t.at("constant"), "tail"));
  } else if (t.is_object()) {
    std::vector<BigInt> blk;
    for (const auto& v : t.at("periodic")) blk.push_back(c.as_bigint(v, "tail"));
    tail = arith::TailPolicy::periodic(blk);
  }
  return arith::Angle::from_cf(cf, tail, bits);
}

int angle_index(const Ctx& c, const std::vector<NamedAngle>& angles, const Json& v, const std::string& path) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (angles[i].name == s) return static_cast<int>(i);
    }
    c.fail(path, "unknown angle '" + s + "'");
  }
  const long long i = c.as_int(v, path);
  if (i < 0 || i >= static_cast<long long>(angles.size())) c.fail(path, "angle index out of range");
  return static_cast<int>(i);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  const Ctx c{origin};
  ExperimentConfig cfg;
  cfg.source = j;
  c.keys(j, "", {"schema_version", "name", "precision_bits", "threads", "seed", "out_dir", "angles", "schedule",
                 "family", "tables", "strings", "run", "conjugacy"});
  if (!j.contains("schema_version")) c.fail("schema_version", "missing");
  if (c.as_int(j.at("schema_version"), "schema_version") != io::kSchemaVersion) {
    c.fail("schema_version", "unsupported version (expected " + std::to_string(io::kSchemaVersion) + ")");
  }
  if (j.contains("name")) cfg.name = c.as_string(j.at("name"), "name");
  cfg.precision_bits = c.positive(j, "", "precision_bits", cfg.precision_bits, 64);
  if (cfg.precision_bits > kMaxPrecisionBits) c.fail("precision_bits", "too large");
  cfg.threads = static_cast<int>(c.positive(j, "", "threads", cfg.threads));
  if (j.contains("seed")) cfg.seed = c.as_string(j.at("seed"), "seed");
  if (j.contains("out_dir")) cfg.out_dir = c.as_string(j.at("out_dir"), "out_dir");

  if (!j.contains("angles")) c.fail("angles", "missing");
  const Json& an = j.at("angles");
  if (!an.is_object() || an.empty()) c.fail("angles", "expected a non-empty object of named angles");
  for (auto it = an.begin(); it != an.end(); ++it) {
    check_angle_entry(c, it.value(), "angles." + it.key());
    cfg.angles.push_back(NamedAngle{it.key(), it.value()});
  }

  if (j.contains("schedule")) {
    const Json& s = j.at("schedule");
    c.keys(s, "schedule", {"nu", "d", "r", "b", "K", "xi", "tau"});
    c.opt(s, "schedule", "nu", cfg.nu, &Ctx::as_double);
    c.opt(s, "schedule", "K", cfg.K, &Ctx::as_double);
    c.opt(s, "schedule", "xi", cfg.xi, &Ctx::as_double);
    cfg.d = static_cast<int>(c.positive(s, "schedule", "d", cfg.d, 2));
    cfg.r = static_cast<int>(c.positive(s, "schedule", "r", cfg.r));
    cfg.b = static_cast<int>(c.positive(s, "schedule", "b", cfg.b));
    if (s.contains("tau") && !s.at("tau").is_null()) cfg.tau = c.as_double(s.at("tau"), "schedule.tau");
    if (!(cfg.nu > 0)) c.fail("schedule.nu", "must be > 0");
    if (!(cfg.xi > 0)) c.fail("schedule.xi", "must be > 0");
    if (!(cfg.K >= 1)) c.fail("schedule.K", "must be >= 1");
    if (cfg.tau && !(*cfg.tau > 1)) c.fail("schedule.tau", "must be > 1");
  }

  if (j.contains("family")) {
    const Json& f = j.at("family");
    c.keys(f, "family", {"kind", "h", "shift", "stages", "burst_index", "amplitudes", "multipliers", "check_grid"});
    const std::string kind = f.contains("kind") ? c.as_string(f.at("kind"), "family.kind") : "rotation";
    if (kind == "rotation") cfg.family.kind = FamilyKind::rotation;
    else if (kind == "conjugated") cfg.family.kind = FamilyKind::conjugated;
    else if (kind == "liouville") cfg.family.kind = FamilyKind::liouville;
    else c.fail("family.kind", "expected rotation, conjugated or liouville");
    if (f.contains("h")) {
      const Json& h = f.at("h");
      if (!h.is_array()) c.fail("family.h", "expected an array of harmonics");
      for (std::size_t i = 0; i < h.size(); ++i) {
        const std::string p = "family.h[" + std::to_string(i) + "]";
        c.keys(h[i], p, {"m", "sin", "cos"});
        maps::Harmonic hm;
        hm.m = static_cast<int>(c.positive(h[i], p, "m", 1));
        const std::string s = h[i].contains("sin") ? c.as_real_text(h[i].at("sin"), p + ".sin") : "0";
        const std::string co = h[i].contains("cos") ? c.as_real_text(h[i].at("cos"), p + ".cos") : "0";
        hm.alpha = Real::parse(s, cfg.precision_bits);
        hm.beta = Real::parse(co, cfg.precision_bits);
        cfg.family.h.push_back(hm);
      }
    }
    if (f.contains("shift")) cfg.family.h_shift = c.as_real_text(f.at("shift"), "family.shift");
    cfg.family.stages = static_cast<int>(c.positive(f, "family", "stages", cfg.family.stages, 0));
    cfg.family.liouville.burst_index = static_cast<int>(c.positive(f, "family", "burst_index", 0, 0));
    if (f.contains("amplitudes")) {
      for (const auto& v : f.at("amplitudes")) {
        cfg.family.liouville.amplitudes.push_back(c.as_double(v, "family.amplitudes"));
      }
    }
    if (f.contains("multipliers")) {
      for (const auto& v : f.at("multipliers")) {
        cfg.family.liouville.multipliers.push_back(static_cast<int>(c.as_int(v, "family.multipliers")));
      }
    }
    cfg.family.check_grid = static_cast<int>(c.positive(f, "family", "check_grid", cfg.family.check_grid, 0));
    if (cfg.family.kind == FamilyKind::conjugated && cfg.family.h.empty()) {
      c.fail("family.h", "a conjugated family needs at least one harmonic");
    }
  }

  if (j.contains("tables")) {
    const Json& t = j.at("tables");
    c.keys(t, "tables", {"depth", "dset"});
    cfg.table_depth = static_cast<int>(c.positive(t, "tables", "depth", cfg.table_depth, 0));
    if (t.contains("dset")) {
      const Json& d = t.at("dset");
      c.keys(d, "tables.dset", {"k_lo", "k_hi", "tau", "C"});
      cfg.dset_k_lo = c.positive(d, "tables.dset", "k_lo", cfg.dset_k_lo);
      cfg.dset_k_hi = c.positive(d, "tables.dset", "k_hi", cfg.dset_k_hi);
      c.opt(d, "tables.dset", "tau", cfg.dset_tau, &Ctx::as_double);
      if (d.contains("C") && !d.at("C").is_null()) cfg.dset_C = c.as_real_text(d.at("C"), "tables.dset.C");
      if (cfg.dset_k_hi < cfg.dset_k_lo) c.fail("tables.dset.k_hi", "must be >= k_lo");
    }
  }

  if (j.contains("strings")) {
    const Json& s = j.at("strings");
    c.keys(s, "strings", {"depth", "start", "max_rows"});
    cfg.strings_depth = static_cast<int>(c.positive(s, "strings", "depth", cfg.strings_depth, 0));
    if (s.contains("start")) cfg.strings_start = to_string(c.as_bigint(s.at("start"), "strings.start"));
    cfg.strings_max_rows = static_cast<int>(c.positive(s, "strings", "max_rows", cfg.strings_max_rows));
  }

  if (j.contains("run")) {
    const Json& r = j.at("run");
    c.keys(r, "run", {"depth", "depths", "grid", "budget", "rel_tol", "yoccoz_K", "strings", "search_strings"});
    cfg.run_depth = static_cast<int>(c.positive(r, "run", "depth", cfg.run_depth, 0));
    if (r.contains("depths")) {
      const Json& ds = r.at("depths");
      if (!ds.is_object()) c.fail("run.depths", "expected an object of angle name to depth");
      for (auto it = ds.begin(); it != ds.end(); ++it) {
        const int idx = angle_index(c, cfg.angles, Json(it.key()), "run.depths." + it.key());
        const int dep = static_cast<int>(c.positive(ds, "run.depths", it.key().c_str(), 0, 0));
        cfg.run_depths.emplace_back(idx, dep);
      }
    }
    cfg.run_grid = static_cast<int>(c.positive(r, "run", "grid", cfg.run_grid, 2));
    cfg.run_budget = c.positive(r, "run", "budget", cfg.run_budget);
    c.opt(r, "run", "rel_tol", cfg.run_rel_tol, &Ctx::as_double);
    if (!(cfg.run_rel_tol > 0)) c.fail("run.rel_tol", "must be > 0");
    cfg.yoccoz_K = static_cast<int>(c.positive(r, "run", "yoccoz_K", cfg.yoccoz_K));
    if (r.contains("search_strings")) cfg.search_strings = c.as_bool(r.at("search_strings"), "run.search_strings");
    if (r.contains("strings")) {
      const Json& ss = r.at("strings");
      if (!ss.is_array()) c.fail("run.strings", "expected an array");
      for (std::size_t i = 0; i < ss.size(); ++i) {
        const std::string p = "run.strings[" + std::to_string(i) + "]";
        c.keys(ss[i], p, {"angle", "l", "n"});
        if (!ss[i].contains("angle") || !ss[i].contains("l") || !ss[i].contains("n")) {
          c.fail(p, "needs angle, l and n");
        }
        ManualString m;
        m.angle = angle_index(c, cfg.angles, ss[i].at("angle"), p + ".angle");
        m.l = static_cast<int>(c.positive(ss[i], p, "l", 1));
        m.n = static_cast<int>(c.positive(ss[i], p, "n", 1));
        if (m.n < m.l) c.fail(p + ".n", "must be >= l");
        cfg.strings.push_back(m);
      }
    }
  }

  if (j.contains("conjugacy")) {
    const Json& q = j.at("conjugacy");
    c.keys(q, "conjugacy", {"n_terms", "grid", "high_precision", "budget", "delta", "gate", "times"});
    cfg.cesaro_terms = c.positive(q, "conjugacy", "n_terms", cfg.cesaro_terms);
    cfg.cesaro_grid = static_cast<int>(c.positive(q, "conjugacy", "grid", cfg.cesaro_grid));
    cfg.conj_budget = c.positive(q, "conjugacy", "budget", cfg.conj_budget);
    if (q.contains("high_precision")) cfg.high_precision = c.as_bool(q.at("high_precision"), "conjugacy.high_precision");
    if (q.contains("delta")) {
      const Json& d = q.at("delta");
      c.keys(d, "conjugacy.delta", {"k", "s_lo", "s_hi", "grid"});
      cfg.delta_k = static_cast<int>(c.positive(d, "conjugacy.delta", "k", cfg.delta_k));
      cfg.delta_s_lo = static_cast<int>(c.positive(d, "conjugacy.delta", "s_lo", cfg.delta_s_lo));
      cfg.delta_s_hi = static_cast<int>(c.positive(d, "conjugacy.delta", "s_hi", cfg.delta_s_hi));
      cfg.delta_grid = static_cast<int>(c.positive(d, "conjugacy.delta", "grid", cfg.delta_grid));
      if (cfg.delta_s_hi < cfg.delta_s_lo) c.fail("conjugacy.delta.s_hi", "must be >= s_lo");
    }
    if (q.contains("gate")) {
      const Json& g = q.at("gate");
      c.keys(g, "conjugacy.gate", {"enabled", "grid"});
      if (g.contains("enabled")) cfg.gate = c.as_bool(g.at("enabled"), "conjugacy.gate.enabled");
      cfg.gate_grid = static_cast<int>(c.positive(g, "conjugacy.gate", "grid", cfg.gate_grid));
    }
    if (q.contains("times")) {
      const Json& t = q.at("times");
      c.keys(t, "conjugacy.times", {"bound", "grid"});
      if (t.contains("bound")) cfg.times_bound = to_string(c.as_bigint(t.at("bound"), "conjugacy.times.bound"));
      cfg.times_grid = static_cast<int>(c.positive(t, "conjugacy.times", "grid", cfg.times_grid));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.precision_bits) {
    if (*o.precision_bits < 64 || *o.precision_bits > kMaxPrecisionBits) {
      throw ValidationError("--precision must lie in [64, " + std::to_string(kMaxPrecisionBits) + "]");
    }
    cfg.precision_bits = *o.precision_bits;
    for (auto& h : cfg.family.h) {
      h.alpha = h.alpha.rounded(cfg.precision_bits);
      h.beta = h.beta.rounded(cfg.precision_bits);
    }
  }
  if (o.depth) {
    if (*o.depth < 0) throw ValidationError("--depth must be >= 0");
    cfg.table_depth = cfg.strings_depth = cfg.run_depth = *o.depth;
    cfg.run_depths.clear();
  }
  if (o.budget) {
    if (*o.budget < 1) throw ValidationError("--budget must be >= 1");
    cfg.run_budget = *o.budget;
    cfg.conj_budget = *o.budget;
  }
  if (o.threads) {
    if (*o.threads < 1) throw ValidationError("--threads must be >= 1");
    cfg.threads = *o.threads;
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
}

namespace {

Json effective_json(const ExperimentConfig& cfg) {
  Json j = cfg.source;
  j.erase("threads");
  j.erase("out_dir");
  j["precision_bits"] = cfg.precision_bits;
  Json depths = Json::array();
  for (const auto& [idx, dep] : cfg.run_depths) depths.push_back({idx, dep});
  j["effective"] = {{"table_depth", cfg.table_depth},   {"strings_depth", cfg.strings_depth},
                    {"run_depth", cfg.run_depth},       {"run_depths", depths},
                    {"run_budget", cfg.run_budget},     {"conjugacy_budget", cfg.conj_budget}};
  return j;
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) { return io::sha256_hex(effective_json(cfg).dump()); }

std::vector<arith::Angle> build_angles(const ExperimentConfig& cfg) {
  std::vector<arith::Angle> out;
  for (const auto& a : cfg.angles) out.push_back(make_angle(a.entry, cfg.precision_bits));
  return out;
}

arith::ExponentSchedule build_schedule(const ExperimentConfig& cfg) {
  arith::ExponentSchedule s = arith::exponent_schedule(cfg.nu, cfg.d, cfg.r, cfg.b, cfg.K);
  if (cfg.tau) {
    s.tau = *cfg.tau;
    s.sigma = 1.0 / (2 * s.tau * s.tau);
    s.k_reg = static_cast<long>(std::floor((s.r + 2) * (2 + s.tau))) + 2;
  }
  return s;
}

maps::CommutingFamily build_family(const ExperimentConfig& cfg, const std::vector<arith::Angle>& angles,
                                   int* burst_index) {
  maps::FamilyOptions fo;
  fo.grid = cfg.family.check_grid;
  fo.threads = cfg.threads;
  const long bits = cfg.precision_bits;
  switch (cfg.family.kind) {
    case FamilyKind::rotation: {
      maps::CommutingFamily fam;
      fam.provenance = maps::Provenance::conjugated_rotations;
      fam.h = maps::CircleMap();
      for (const auto& a : angles) {
        maps::CircleMap f = maps::CircleMap::rotation(a.value_at(bits).mid().rounded(bits));
        f.cached_rotation_number = a;
        fam.maps.push_back(f);
        fam.rotation_numbers.push_back(a);
      }
      fam.defect = Real::zero(bits);
      fam.defect_grid = 0;
      return fam;
    }
    case FamilyKind::conjugated: {
      const maps::CircleMap h = maps::CircleMap::trig(cfg.family.h, Real::parse(cfg.family.h_shift, bits));
      return maps::make_conjugated_rotations(h, angles, fo);
    }
    case FamilyKind::liouville: {
      std::vector<arith::Angle> comp(angles.begin() + 1, angles.end());
      maps::LiouvilleFamily lf = maps::make_liouville_family(angles[0], cfg.family.liouville, cfg.family.stages,
                                                             comp, fo);
      if (burst_index) *burst_index = lf.burst_index;
      return lf.family;
    }
  }
  throw ValidationError("unknown family kind");
}

namespace {

io::Metadata meta_of(const ExperimentConfig& cfg) { return io::Metadata{config_hash(cfg), cfg.precision_bits}; }

std::string out_path(const ExperimentConfig& cfg, const std::string& rel) { return cfg.out_dir + "/" + rel; }

void emit(CommandResult& res, const ExperimentConfig& cfg, const std::string& rel, const std::string& content) {
  io::write_file(out_path(cfg, rel), content);
  res.files.push_back(out_path(cfg, rel));
}

const char* provenance_name(maps::Provenance p) {
  switch (p) {
    case maps::Provenance::conjugated_rotations: return "conjugated_rotations";
    case maps::Provenance::power_closure: return "power_closure";
    case maps::Provenance::successive_conjugation: return "successive_conjugation";
  }
  return "unknown";
}

// Failures of a single report become an {"error": ...} entry instead of
// aborting the whole command.
template <typename F>
Json guarded(F&& f) {
  try {
    return f();
  } catch (const CertificationError& e) {
    return Json{{"error", e.what()}};
  }
}

arith::AlternatedConfig resolve_strings(const ExperimentConfig& cfg, const std::vector<arith::Angle>& angles,
                                        const arith::ExponentSchedule& sched) {
  if (!cfg.strings.empty()) {
    arith::AlternatedConfig c;
    c.xi = cfg.xi;
    c.tau = sched.tau;
    for (const auto& m : cfg.strings) c.strings.push_back(arith::DiophantineString{m.angle, m.l, m.n, sched.tau});
    return c;
  }
  if (cfg.search_strings) {
    arith::AlternatedOptions ao;
    ao.start = BigInt(cfg.strings_start);
    ao.max_rows = cfg.strings_max_rows;
    return arith::find_alternated_config(angles, sched, cfg.xi, cfg.strings_depth, ao);
  }
  return arith::AlternatedConfig{};
}

}  // namespace

CommandResult cmd_angles(const ExperimentConfig& cfg) {
  PrecisionScope ps(cfg.precision_bits);
  CommandResult res;
  const auto meta = meta_of(cfg);
  const auto angles = build_angles(cfg);
  if (cfg.table_depth == 0) res.warnings.push_back("depth 0: convergent tables are empty");
  Json tables = Json::object();
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const auto t = arith::convergents(angles[i], cfg.table_depth, cfg.precision_bits);
    const std::string& name = cfg.angles[i].name;
    emit(res, cfg, "tables/" + name + ".csv", io::table_csv(t, meta));
    emit(res, cfg, "tables/" + name + ".json", io::dump(io::envelope(meta, "convergent_table", io::to_json(t))));
    tables[name] = t.depth();
  }
  const Real fitted = arith::fit_d_constant(angles, cfg.dset_k_lo, cfg.dset_k_hi, cfg.dset_tau, cfg.threads);
  const Real C = cfg.dset_C ? Real::parse(*cfg.dset_C, cfg.precision_bits) : fitted;
  const arith::DSetResult d = arith::d_set_member(angles, cfg.dset_k_lo, cfg.dset_k_hi, cfg.dset_tau, C, cfg.threads);
  Json dj;
  dj["d"] = angles.size();
  dj["tau"] = io::number(cfg.dset_tau);
  dj["k_lo"] = cfg.dset_k_lo;
  dj["k_hi"] = cfg.dset_k_hi;
  dj["C"] = io::real_text(C);
  dj["C_source"] = cfg.dset_C ? "config" : "fitted";
  dj["C_fitted"] = io::real_text(fitted);
  dj["result"] = io::to_json(d);
  emit(res, cfg, "tables/dset.json", io::dump(io::envelope(meta, "dset_report", dj)));
  res.summary = {{"tables", tables}, {"dset_member", d.member}, {"C", C.str(8)}};
  return res;
}

CommandResult cmd_strings(const ExperimentConfig& cfg) {
  PrecisionScope ps(cfg.precision_bits);
  CommandResult res;
  const auto meta = meta_of(cfg);
  const auto angles = build_angles(cfg);
  const auto sched = build_schedule(cfg);
  arith::AlternatedOptions ao;
  ao.start = BigInt(cfg.strings_start);
  ao.max_rows = cfg.strings_max_rows;
  const auto ac = arith::find_alternated_config(angles, sched, cfg.xi, cfg.strings_depth, ao);
  Json body;
  body["schedule"] = io::to_json(sched);
  body["config"] = io::to_json(ac, angles);
  emit(res, cfg, "strings/config.json", io::dump(io::envelope(meta, "alternated_config", body)));
  std::ostringstream txt;
  txt << "# schema_version=" << io::kSchemaVersion << "\n# config_hash=" << meta.config_hash
      << "\n# precision_bits=" << meta.precision_bits << "\n";
  txt << "tau = " << sched.tau << ", xi = " << cfg.xi << "\n";
  txt << "i  angle  l  n  exponent  margin\n";
  for (std::size_t i = 0; i < ac.strings.size(); ++i) {
    const auto& s = ac.strings[i];
    // Even strings carry the A_i exponents, odd strings the B_i.
    txt << i << "  " << cfg.angles[static_cast<std::size_t>(s.angle)].name << "  " << s.l << "  " << s.n << "  "
        << (i % 2 == 0 ? "A=" : "B=") << arith::string_exponent(s, angles) << "  l'="
        << (i < ac.margins.size() ? std::to_string(ac.margins[i]) : std::string("-"))
        << (s.open_ended ? "  (open-ended)" : "") << "\n";
  }
  if (!ac.complete) txt << "PARTIAL: " << ac.failure << "\n";
  emit(res, cfg, "strings/summary.txt", txt.str());
  if (!ac.complete) res.warnings.push_back("partial configuration: " + ac.failure);
  res.summary = {{"strings", ac.strings.size()}, {"complete", ac.complete}};
  return res;
}

CommandResult cmd_run(const ExperimentConfig& cfg) {
  PrecisionScope ps(cfg.precision_bits);
  CommandResult res;
  const auto meta = meta_of(cfg);
  const auto angles = build_angles(cfg);
  const auto sched = build_schedule(cfg);
  int burst = 0;
  const maps::CommutingFamily fam = build_family(cfg, angles, &burst);
  const arith::AlternatedConfig strings = resolve_strings(cfg, angles, sched);

  dynamics::DisplacementOptions dopt;
  dopt.budget = cfg.run_budget;
  dopt.rel_tol = cfg.run_rel_tol;
  dopt.threads = cfg.threads;
  std::vector<dynamics::DynamicsTrace> traces;
  Json maps_json = Json::array();
  for (std::size_t i = 0; i < fam.maps.size(); ++i) {
    int depth = cfg.run_depth;
    for (const auto& [idx, dep] : cfg.run_depths) {
      if (idx == static_cast<int>(i)) depth = dep;
    }
    const auto table = arith::convergents(angles[i], depth, cfg.precision_bits);
    traces.push_back(dynamics::build_trace(fam.maps[i], table, depth, cfg.run_grid, dopt));
    const auto& tr = traces.back();
    const std::string& name = cfg.angles[i].name;
    emit(res, cfg, "run/trace_" + name + ".csv", io::trace_csv(tr, meta));
    emit(res, cfg, "run/trace_" + name + ".json", io::dump(io::envelope(meta, "dynamics_trace", io::to_json(tr))));

    Json mj;
    mj["angle"] = name;
    Real supU = Real::zero(cfg.precision_bits);
    bool certified = true, sandwich = true;
    for (const auto& r : tr.rows) {
      supU = max(supU, r.U);
      certified = certified && r.certified;
      sandwich = sandwich && r.sandwich;
    }
    mj["sup_U"] = io::real_text(supU);
    mj["all_certified"] = certified;
    mj["sandwich"] = sandwich;
    mj["yoccoz"] = guarded([&] { return io::to_json(dynamics::yoccoz_residuals(tr, cfg.yoccoz_K)); });
    mj["local_criterion"] = io::to_json(dynamics::local_criterion(tr, strings, sched, static_cast<int>(i)));
    mj["exponent_dynamics"] = guarded([&] {
      return io::to_json(dynamics::exponent_dynamics(tr, strings, sched, cfg.b, static_cast<int>(i)));
    });
    maps_json.push_back(std::move(mj));
  }

  Json rep;
  rep["family"] = {{"kind", provenance_name(fam.provenance)},
                   {"maps", fam.maps.size()},
                   {"commutation_defect", io::real_text(fam.defect)},
                   {"defect_grid", fam.defect_grid}};
  rep["schedule"] = io::to_json(sched);
  rep["strings"] = io::to_json(strings, angles);
  rep["maps"] = std::move(maps_json);
  if (strings.strings.size() >= 2) {
    std::vector<const dynamics::DynamicsTrace*> ptrs;
    for (const auto& t : traces) ptrs.push_back(&t);
    rep["transfer"] = guarded([&] { return io::to_json(dynamics::transfer_check(ptrs, strings)); });
    rep["dichotomy"] = io::to_json(dynamics::dichotomy(strings, angles));
  }
  if (burst > 0) {
    // Rows s+1 and s+2 follow the large quotient a_{s+1}.
    const auto& tr = traces[0];
    Json bj;
    bj["burst_index"] = burst;
    bj["window"] = Json::array({burst + 1, burst + 2});
    Json rows = Json::array();
    arith::AlternatedConfig none;
    const auto scan = dynamics::local_criterion(tr, none, sched, 0);
    bool hit = false;
    for (const auto& r : scan.rows) {
      if (r.n >= burst + 1 && r.n <= burst + 2) {
        hit = hit || r.ok;
        rows.push_back({{"n", r.n}, {"ok", r.ok}});
      }
    }
    bj["local_rows"] = std::move(rows);
    bj["local_hit_in_window"] = hit;
    Json us = Json::array();
    for (const auto& r : tr.rows) us.push_back({{"n", r.n}, {"U", r.U.str(8)}});
    bj["U"] = std::move(us);
    rep["liouville"] = std::move(bj);
  }
  emit(res, cfg, "run/reports.json", io::dump(io::envelope(meta, "run_reports", rep)));
  res.summary = {{"maps", fam.maps.size()}, {"depth", cfg.run_depth}};
  return res;
}

CommandResult cmd_conjugacy(const ExperimentConfig& cfg) {
  PrecisionScope ps(cfg.precision_bits);
  CommandResult res;
  const long bits = cfg.precision_bits;
  const auto meta = meta_of(cfg);
  const auto angles = build_angles(cfg);
  const auto sched = build_schedule(cfg);
  const maps::CommutingFamily fam = build_family(cfg, angles);
  const maps::CircleMap& f = fam.maps[0];
  const std::string& name = cfg.angles[0].name;

  conjugacy::ConjugacyOptions co;
  co.threads = cfg.threads;
  co.budget = cfg.conj_budget;
  co.high_precision = cfg.high_precision;
  const auto est = conjugacy::cesaro_conjugacy(f, angles[0], cfg.cesaro_terms, cfg.cesaro_grid, co);
  emit(res, cfg, "conjugacy/estimate_" + name + ".csv", io::estimate_csv(est, meta));
  Json rep;
  Json ej = io::summary_json(est);
  if (fam.h) {
    // Distance to h - h(0) after removing the best constant (mean).
    const Real h0 = maps::eval(*fam.h, Real::zero(bits));
    std::vector<Real> diff;
    Real mean = Real::zero(bits);
    for (std::size_t i = 0; i < est.x.size(); ++i) {
      diff.push_back(est.h[i] - (maps::eval(*fam.h, est.x[i]) - h0));
      mean += diff.back();
    }
    mean /= Real(static_cast<long>(diff.size()));
    Real err = Real::zero(bits);
    for (const auto& d : diff) err = max(err, abs(d - mean));
    ej["recovery_error"] = io::real_text(err);
    ej["recovery_constant"] = io::real_text(mean);
  }
  rep["cesaro"] = std::move(ej);

  const int table_depth = cfg.delta_s_hi + 1;
  const auto table = arith::convergents(angles[0], table_depth, bits);
  conjugacy::DeltaOptions dopt;
  dopt.threads = cfg.threads;
  dopt.budget = cfg.conj_budget;
  const auto delta = conjugacy::delta_norms(f, table, cfg.delta_s_lo, cfg.delta_s_hi, cfg.delta_k, cfg.delta_grid, dopt);
  rep["delta"] = io::to_json(delta);
  if (cfg.gate) {
    conjugacy::GateOptions go;
    go.grid = cfg.gate_grid;
    go.threads = cfg.threads;
    go.budget = cfg.conj_budget;
    rep["gate"] = io::to_json(conjugacy::regularity_gate(f, delta, table, sched, go));
  }

  const BigInt bound(cfg.times_bound);
  const arith::AlternatedConfig strings = resolve_strings(cfg, angles, sched);
  if (bound > 0 && fam.maps.size() >= 2 && !strings.strings.empty()) {
    int need = 1;
    for (const auto& s : strings.strings) need = std::max(need, s.n + 1);
    const auto tf = arith::convergents(angles[0], need, bits);
    const auto tg = arith::convergents(angles[1], need, bits);
    const auto A = conjugacy::diophantine_times(strings, tf, bound, 0);
    const auto At = conjugacy::diophantine_times(strings, tg, bound, 1);
    Json tj;
    tj["A"] = io::to_json(A);
    tj["A_tilde"] = io::to_json(At);
    tj["density"] = io::to_json(conjugacy::orbit_density_check(A, At, angles[0], angles[1]));
    const auto tc =
        conjugacy::conjugacy_at_diophantine_times(f, fam.maps[1], A, At, angles[0], angles[1], cfg.times_grid, co);
    Json cj = io::summary_json(tc.estimate);
    cj["plain_defect"] = io::real_text(tc.plain_defect);
    tj["estimate"] = std::move(cj);
    rep["times"] = std::move(tj);
  }
  emit(res, cfg, "conjugacy/report.json", io::dump(io::envelope(meta, "conjugacy_report", rep)));
  res.summary = {{"sup_defect", est.sup_defect.str(6)}, {"delta_rows", delta.size()}};
  return res;
}

CommandResult cmd_all(const ExperimentConfig& cfg) {
  CommandResult all;
  for (auto* cmd : {&cmd_angles, &cmd_strings, &cmd_run, &cmd_conjugacy}) {
    CommandResult r = cmd(cfg);
    all.files.insert(all.files.end(), r.files.begin(), r.files.end());
    all.warnings.insert(all.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  all.summary = {{"files", all.files.size()}};
  return all;
}

}  // namespace circlin::experiment
