#pragma once

#include <stdexcept>
#include <string>

namespace rws {

/// Failure categories. The CLI maps them onto exit codes (input errors -> 2,
/// mathematical-validity errors -> 3).
enum class ErrorKind {
  unsupported_order,
  invalid_length,
  invalid_pyramid,
  kernel_validity,
  unsupported_variant,
  flat_spectrum,
  empty_spectrum,
  admissibility,
  domain,
  insufficient_scales,
  degenerate_level,
  no_critical_q,
  range,
  parse,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unsupported_order: return "unsupported-order";
    case ErrorKind::invalid_length: return "invalid-length";
    case ErrorKind::invalid_pyramid: return "invalid-pyramid";
    case ErrorKind::kernel_validity: return "kernel-validity";
    case ErrorKind::unsupported_variant: return "unsupported-variant";
    case ErrorKind::flat_spectrum: return "flat-spectrum";
    case ErrorKind::empty_spectrum: return "empty-spectrum";
    case ErrorKind::admissibility: return "admissibility";
    case ErrorKind::domain: return "domain";
    case ErrorKind::insufficient_scales: return "insufficient-scales";
    case ErrorKind::degenerate_level: return "degenerate-level";
    case ErrorKind::no_critical_q: return "no-critical-q";
    case ErrorKind::range: return "range";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by malformed input rather than by numerical validity.
  bool is_input_error() const noexcept {
    return kind_ == ErrorKind::parse || kind_ == ErrorKind::io ||
           kind_ == ErrorKind::invalid_length || kind_ == ErrorKind::invalid_pyramid ||
           kind_ == ErrorKind::unsupported_order;
  }

 private:
  ErrorKind kind_;
};

}  // namespace rws
