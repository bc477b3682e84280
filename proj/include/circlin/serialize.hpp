#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "circlin/arith.hpp"
#include "circlin/conjugacy.hpp"
#include "circlin/dynamics.hpp"
#include "circlin/real.hpp"

namespace circlin::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Carried by every output file.
struct Metadata {
  std::string config_hash;
  long precision_bits = 0;
};

std::string sha256_hex(const std::string& data);

// Decimal text at the value's own precision; "inf", "-inf", "nan" otherwise.
std::string real_text(const Real& x);
// Finite doubles as numbers, others as strings.
Json number(double x);

// RFC 4180 style: fields with a comma, quote or line break are quoted and
// quotes doubled. Metadata lines "# key=value" precede the header row.
class Csv {
 public:
  Csv(const Metadata& meta, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  std::string str() const { return text_; }
  static std::string quote(const std::string& field);

 private:
  std::size_t width_;
  std::string text_;
};

// {"schema_version", "config_hash", "precision_bits", "kind", "data"}
Json envelope(const Metadata& meta, const std::string& kind, Json data);

Json to_json(const arith::ExponentSchedule& s);
Json to_json(const arith::ConvergentTable& t);
Json to_json(const arith::DSetResult& r);
Json to_json(const arith::ExceptionScan& s);
Json to_json(const arith::AlternatedConfig& c, std::span<const arith::Angle> angles);
Json to_json(const dynamics::DynamicsTrace& t);
Json to_json(const std::vector<dynamics::YoccozRow>& rows);
Json to_json(const std::vector<dynamics::SwitchReport>& rows);
Json to_json(const std::vector<dynamics::ExponentRow>& rows);
Json to_json(const dynamics::Dichotomy& d);
Json to_json(const dynamics::LocalScan& s);
Json to_json(const conjugacy::DiophantineTimes& t);
Json to_json(const conjugacy::DensityResult& r);
Json to_json(const std::vector<conjugacy::DeltaRow>& rows);
Json to_json(const conjugacy::GateReport& g);
// Summary without the samples (those go to CSV).
Json summary_json(const conjugacy::ConjugacyEstimate& e);

std::string table_csv(const arith::ConvergentTable& t, const Metadata& meta);
std::string trace_csv(const dynamics::DynamicsTrace& t, const Metadata& meta);
std::string estimate_csv(const conjugacy::ConjugacyEstimate& e, const Metadata& meta);

// Pretty JSON with a trailing newline.
std::string dump(const Json& j);
void write_file(const std::string& path, const std::string& content);

}  // namespace circlin::io
