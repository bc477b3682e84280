#include "circlin/serialize.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "circlin/error.hpp"

namespace circlin::io {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw ValidationError("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string real_text(const Real& x) { return x.str(); }

Json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

Csv::Csv(const Metadata& meta, std::vector<std::string> header) : width_(header.size()) {
  text_ += "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  text_ += "# config_hash=" + meta.config_hash + "\n";
  text_ += "# precision_bits=" + std::to_string(meta.precision_bits) + "\n";
  row(header);
}

std::string Csv::quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void Csv::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw ValidationError("csv row width does not match the header");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    text_ += quote(fields[i]);
  }
  text_ += "\r\n";
}

Json envelope(const Metadata& meta, const std::string& kind, Json data) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = meta.config_hash;
  j["precision_bits"] = meta.precision_bits;
  j["kind"] = kind;
  j["data"] = std::move(data);
  return j;
}

namespace {

std::string bstr(bool b) { return b ? "true" : "false"; }

}  // namespace

Json to_json(const arith::ExponentSchedule& s) {
  Json j;
  j["nu"] = number(s.nu);
  j["d"] = s.d;
  j["r"] = s.r;
  j["b"] = s.b;
  j["K"] = number(s.K);
  j["tau"] = number(s.tau);
  j["sigma"] = number(s.sigma);
  j["epsilon"] = number(s.epsilon);
  j["eta"] = number(s.eta);
  j["N"] = s.N;
  j["k_reg"] = s.k_reg;
  j["K_tilde"] = to_string(s.K_tilde);
  j["K_yoccoz"] = to_string(s.K_yoccoz);
  return j;
}

Json to_json(const arith::ConvergentTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json j;
    j["n"] = r.n;
    j["a"] = to_string(r.a);
    j["p"] = to_string(r.p);
    j["q"] = to_string(r.q);
    j["theta_lo"] = real_text(r.theta.lo);
    j["theta_hi"] = real_text(r.theta.hi);
    rows.push_back(std::move(j));
  }
  Json j;
  j["p0"] = to_string(t.p0);
  j["q0"] = to_string(t.q0);
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const arith::DSetResult& r) {
  Json j;
  j["member"] = r.member;
  j["witness"] = r.witness ? Json(*r.witness) : Json(nullptr);
  return j;
}

Json to_json(const arith::ExceptionScan& s) {
  Json w = Json::array();
  for (const auto& x : s.windows) {
    Json j;
    j["k"] = to_string(x.k);
    j["angle"] = x.angle;
    j["end"] = real_text(x.end);
    w.push_back(std::move(j));
  }
  Json j;
  j["windows"] = std::move(w);
  j["allowed"] = s.allowed;
  j["tuples_verified"] = s.tuples_verified;
  j["verify_note"] = s.verify_note;
  return j;
}

Json to_json(const arith::AlternatedConfig& c, std::span<const arith::Angle> angles) {
  Json strings = Json::array();
  for (std::size_t i = 0; i < c.strings.size(); ++i) {
    const auto& s = c.strings[i];
    Json j;
    j["i"] = i;
    j["angle"] = s.angle;
    j["l"] = s.l;
    j["n"] = s.n;
    j["tau"] = number(s.tau);
    j["open_ended"] = s.open_ended;
    j["margin"] = i < c.margins.size() ? Json(c.margins[i]) : Json(nullptr);
    j["exponent"] = angles.empty() ? Json(nullptr) : number(arith::string_exponent(s, angles));
    strings.push_back(std::move(j));
  }
  Json j;
  j["xi"] = number(c.xi);
  j["tau"] = number(c.tau);
  j["complete"] = c.complete;
  j["failure"] = c.failure;
  j["strings"] = std::move(strings);
  return j;
}

Json to_json(const dynamics::DynamicsTrace& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json j;
    j["n"] = r.n;
    j["q"] = to_string(r.q);
    j["p"] = to_string(r.p);
    j["theta"] = real_text(r.theta);
    j["M"] = real_text(r.M);
    j["m"] = real_text(r.m);
    j["U"] = real_text(r.U);
    j["u"] = real_text(r.u);
    j["error_bound"] = real_text(r.error_bound);
    j["grid"] = r.grid;
    j["certified"] = r.certified;
    j["sandwich"] = r.sandwich;
    rows.push_back(std::move(j));
  }
  Json j;
  j["integer_part"] = to_string(t.integer_part);
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const std::vector<dynamics::YoccozRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["n"] = r.n;
    j["C_upper"] = real_text(r.C_upper);
    j["C_lower"] = real_text(r.C_lower);
    j["C"] = real_text(r.C);
    j["running_max"] = real_text(r.running_max);
    j["admissible"] = r.admissible;
    a.push_back(std::move(j));
  }
  return a;
}

Json to_json(const std::vector<dynamics::SwitchReport>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["i"] = r.index;
    j["from_angle"] = r.from_angle;
    j["to_angle"] = r.to_angle;
    j["from_row"] = r.from_row;
    j["to_row"] = r.to_row;
    j["L"] = to_string(r.L);
    j["upper_ok"] = r.upper_ok;
    j["lower_ok"] = r.lower_ok;
    j["ratio_ok"] = r.ratio_ok;
    j["upper_margin"] = number(r.upper_margin);
    j["lower_margin"] = number(r.lower_margin);
    j["ratio_margin"] = number(r.ratio_margin);
    a.push_back(std::move(j));
  }
  return a;
}

Json to_json(const std::vector<dynamics::ExponentRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["i"] = r.string_index;
    j["l"] = r.l;
    j["n"] = r.n;
    j["A"] = number(r.A);
    j["u_in"] = number(r.u_in);
    j["u_out"] = number(r.u_out);
    j["rho"] = number(r.rho);
    j["satisfied"] = r.satisfied;
    j["q_bound_ok"] = r.q_bound_ok;
    a.push_back(std::move(j));
  }
  return a;
}

Json to_json(const dynamics::Dichotomy& d) {
  Json a = Json::array(), b = Json::array();
  for (double x : d.log_first) a.push_back(number(x));
  for (double x : d.log_second) b.push_back(number(x));
  Json j;
  j["log_first"] = std::move(a);
  j["log_second"] = std::move(b);
  j["growth"] = d.growth;
  return j;
}

Json to_json(const dynamics::LocalScan& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    Json j;
    j["n"] = r.n;
    j["log_lhs"] = number(r.log_lhs);
    j["log_rhs"] = number(r.log_rhs);
    j["ok"] = r.ok;
    rows.push_back(std::move(j));
  }
  Json j;
  j["first"] = s.first ? Json(*s.first) : Json(nullptr);
  j["rows"] = std::move(rows);
  return j;
}

Json to_json(const conjugacy::DiophantineTimes& t) {
  Json m = Json::array();
  for (std::size_t i = 0; i < t.members.size(); ++i) {
    Json terms = Json::array();
    for (const auto& x : t.decompositions[i]) terms.push_back(Json::array({x.s, to_string(x.a)}));
    Json j;
    j["m"] = to_string(t.members[i]);
    j["terms"] = std::move(terms);
    m.push_back(std::move(j));
  }
  Json j;
  j["angle"] = t.angle;
  j["bound"] = to_string(t.bound);
  j["count"] = t.members.size();
  j["truncated"] = t.truncated;
  j["members"] = std::move(m);
  return j;
}

Json to_json(const conjugacy::DensityResult& r) {
  Json j;
  j["max_gap"] = number(r.max_gap);
  j["points"] = r.points;
  return j;
}

Json to_json(const std::vector<conjugacy::DeltaRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["s"] = r.s;
    j["q_s"] = to_string(r.q);
    j["k"] = r.k;
    j["delta_k"] = real_text(r.delta);
    j["bound"] = real_text(r.bound);
    j["bound_ok"] = r.bound_ok;
    j["certified"] = r.certified;
    j["grid"] = r.grid;
    a.push_back(std::move(j));
  }
  return a;
}

Json to_json(const conjugacy::GateReport& g) {
  Json rows = Json::array();
  for (const auto& r : g.rows) {
    Json as = Json::array(), ns = Json::array();
    for (const auto& a : r.a_values) as.push_back(to_string(a));
    for (const auto& n : r.norms) ns.push_back(real_text(n));
    Json j;
    j["s"] = r.s;
    j["q_s"] = to_string(r.q);
    j["q_next"] = to_string(r.q_next);
    j["delta_k"] = real_text(r.delta);
    j["scale_ok"] = r.scale_ok;
    j["scale_log_lhs"] = number(r.scale_log_lhs);
    j["scale_log_rhs"] = number(r.scale_log_rhs);
    j["a"] = std::move(as);
    j["norms"] = std::move(ns);
    j["norm_ratio"] = number(r.norm_ratio);
    rows.push_back(std::move(j));
  }
  Json j;
  j["r"] = g.r;
  j["k"] = g.k;
  j["norm"] = "max over j = 1..r+1 of grid sup |D^j ln Df^(a q_s)|";
  j["norm_ratio"] = number(g.norm_ratio_max);
  j["slope"] = g.slope ? number(*g.slope) : Json(nullptr);
  j["decay"] = g.decay;
  j["rows"] = std::move(rows);
  return j;
}

Json summary_json(const conjugacy::ConjugacyEstimate& e) {
  Json j;
  j["n_terms"] = e.n_terms;
  j["grid"] = e.x.empty() ? 0 : e.x.size() - 1;
  j["normalization"] = "h_est(0) = 0";
  j["sup_defect"] = real_text(e.sup_defect);
  j["periodic_defect"] = real_text(e.periodic_defect);
  j["monotone"] = e.monotone;
  return j;
}

std::string table_csv(const arith::ConvergentTable& t, const Metadata& meta) {
  Csv c(meta, {"n", "a", "p", "q", "theta_lo", "theta_hi"});
  for (const auto& r : t.rows) {
    c.row({std::to_string(r.n), to_string(r.a), to_string(r.p), to_string(r.q), real_text(r.theta.lo),
           real_text(r.theta.hi)});
  }
  return c.str();
}

std::string trace_csv(const dynamics::DynamicsTrace& t, const Metadata& meta) {
  Csv c(meta, {"n", "q", "p", "theta", "M", "m", "U", "u", "error_bound", "grid", "certified", "sandwich"});
  for (const auto& r : t.rows) {
    c.row({std::to_string(r.n), to_string(r.q), to_string(r.p), real_text(r.theta), real_text(r.M),
           real_text(r.m), real_text(r.U), real_text(r.u), real_text(r.error_bound), std::to_string(r.grid),
           bstr(r.certified), bstr(r.sandwich)});
  }
  return c.str();
}

std::string estimate_csv(const conjugacy::ConjugacyEstimate& e, const Metadata& meta) {
  Csv c(meta, {"x", "h_est"});
  for (std::size_t i = 0; i < e.x.size(); ++i) c.row({real_text(e.x[i]), real_text(e.h[i])});
  return c.str();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace circlin::io
