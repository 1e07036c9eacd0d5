#include "lidarsim/error.hpp"

namespace lidarsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::TopologyChanged: return "TopologyChanged";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::InvalidEnv: return "InvalidEnv";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::StaleDynamicBvh: return "StaleDynamicBvh";
    case ErrorCode::PhaseViolation: return "PhaseViolation";
    case ErrorCode::TopologyFrozen: return "TopologyFrozen";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyRays: return "EmptyRays";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace lidarsim
