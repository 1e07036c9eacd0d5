#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarsim {

enum class ErrorCode {
  EmptyMesh,
  TopologyChanged,
  InvalidMesh,
  AlreadyRegistered,
  InvalidEnv,
  UnknownEntity,
  StaleDynamicBvh,
  PhaseViolation,
  TopologyFrozen,
  InvalidSpec,
  InvalidConfig,
  ShapeMismatch,
  EmptyRays,
  LengthMismatch,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception; `code()` lets
// callers dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lidarsim
