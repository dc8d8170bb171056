#include "graspcheck/error.hpp"

namespace graspcheck {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingManifest: return "MissingManifest";
    case ErrorKind::kMalformedAnnotation: return "MalformedAnnotation";
    case ErrorKind::kDanglingImageRef: return "DanglingImageRef";
    case ErrorKind::kPlacementFailure: return "PlacementFailure";
    case ErrorKind::kDegenerateHull: return "DegenerateHull";
    case ErrorKind::kPreconditionViolation: return "PreconditionViolation";
    case ErrorKind::kObjectTooLarge: return "ObjectTooLarge";
    case ErrorKind::kGripperOutOfView: return "GripperOutOfView";
    case ErrorKind::kGripperNotFound: return "GripperNotFound";
    case ErrorKind::kEmptyCrop: return "EmptyCrop";
    case ErrorKind::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorKind::kUnsupportedOption: return "UnsupportedOption";
    case ErrorKind::kUnparseableAnswer: return "UnparseableAnswer";
    case ErrorKind::kClientFailure: return "ClientFailure";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace graspcheck
