#pragma once

#include <stdexcept>
#include <string>

namespace circlin {

// Failure classes map onto the CLI exit codes (2, 3, 4).
enum class ErrorKind { validation, budget, certification };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(const std::string& what)
      : Error(ErrorKind::budget, what) {}
};

class CertificationError : public Error {
 public:
  explicit CertificationError(const std::string& what)
      : Error(ErrorKind::certification, what) {}
};

// A finite CF prefix with the reject-extension tail ran out.
class CoefficientsExhausted : public CertificationError {
 public:
  explicit CoefficientsExhausted(const std::string& what)
      : CertificationError("coefficients exhausted: " + what) {}
};

// Interval enclosure too wide to decide; caller should raise precision.
class PrecisionExhausted : public CertificationError {
 public:
  explicit PrecisionExhausted(const std::string& what)
      : CertificationError("precision exhausted: " + what) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 2;
    case ErrorKind::budget: return 3;
    case ErrorKind::certification: return 4;
  }
  return 1;
}

}  // namespace circlin
