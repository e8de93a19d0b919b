#pragma once

#include <stdexcept>
#include <string>

namespace aaa {

enum class ErrorKind {
  invalid_parameter,
  invalid_input,
  out_of_domain,
  divergent_series,
  size_mismatch,
  lp_failure,
  degenerate_split,
  degenerate_dimension,
  parse_error,
  io_error,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::divergent_series: return "divergent-series";
    case ErrorKind::size_mismatch: return "size-mismatch";
    case ErrorKind::lp_failure: return "lp-failure";
    case ErrorKind::degenerate_split: return "degenerate-split";
    case ErrorKind::degenerate_dimension: return "degenerate-dimension";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const char* what) {
  if (!ok) throw Error(kind, what);
}

/// Callers on hot paths should branch first instead, so the message is only
/// built on failure.
inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace aaa
