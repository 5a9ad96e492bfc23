#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace siclop {

enum class Errc {
  kCapacityExceeded,
  kInvalidDimensions,
  kInvalidArgument,
  kTerminalState,
  kLengthMismatch,
  kShapeMismatch,
  kCorruptCheckpoint,
  kVersionMismatch,
  kNoConvergence,
  kEmptyStore,
  kTerminalRoot,
  kConfig,
  kIo,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kCapacityExceeded: return "CapacityExceeded";
    case Errc::kInvalidDimensions: return "InvalidDimensions";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kTerminalState: return "TerminalState";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kCorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::kVersionMismatch: return "VersionMismatch";
    case Errc::kNoConvergence: return "NoConvergence";
    case Errc::kEmptyStore: return "EmptyStore";
    case Errc::kTerminalRoot: return "TerminalRoot";
    case Errc::kConfig: return "ConfigError";
    case Errc::kIo: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can dispatch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace siclop
