#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canqa {

enum class ErrorKind {
  Io,
  EmptyStream,
  FormatDetection,
  Config,
  Argument,
  Contamination,
  InsufficientBaseline,
  Compatibility,
  EmptyDataset,
  Integrity,
  Split,
  Leakage,
  Endpoint,
  Auth,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::EmptyStream: return "empty-stream";
    case ErrorKind::FormatDetection: return "format-detection";
    case ErrorKind::Config: return "config";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Contamination: return "contamination";
    case ErrorKind::InsufficientBaseline: return "insufficient-baseline";
    case ErrorKind::Compatibility: return "compatibility";
    case ErrorKind::EmptyDataset: return "empty-dataset";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Split: return "split";
    case ErrorKind::Leakage: return "leakage";
    case ErrorKind::Endpoint: return "endpoint";
    case ErrorKind::Auth: return "auth";
  }
  return "unknown";
}

// Every failure the toolchain reports carries a kind so callers (and the CLI
// exit path) can tell configuration mistakes from data problems.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace canqa
