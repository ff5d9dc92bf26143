#include "tlm/error.hpp"

namespace tlm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotIdempotent: return "NotIdempotent";
    case ErrorCode::NotComplementary: return "NotComplementary";
    case ErrorCode::SingularGauge: return "SingularGauge";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::ResolventSingular: return "ResolventSingular";
    case ErrorCode::NonInvertibleLeadCoefficient: return "NonInvertibleLeadCoefficient";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::SingularGeometry: return "SingularGeometry";
    case ErrorCode::InvalidAdmittance: return "InvalidAdmittance";
    case ErrorCode::SingularTPlus: return "SingularTPlus";
    case ErrorCode::StubSqrtDomain: return "StubSqrtDomain";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::SuperluminalVelocity: return "SuperluminalVelocity";
    case ErrorCode::SuperluminalStep: return "SuperluminalStep";
    case ErrorCode::TimeStepTooLarge: return "TimeStepTooLarge";
    case ErrorCode::UnstableCell: return "UnstableCell";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::ZeroIncident: return "ZeroIncident";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaViolation:
    case ErrorCode::UnitError:
    case ErrorCode::InvalidArgument:
      return 2;
    case ErrorCode::IoError:
      return 3;
    case ErrorCode::UnstableCell:
    case ErrorCode::StubSqrtDomain:
    case ErrorCode::SingularTPlus:
    case ErrorCode::SingularGeometry:
    case ErrorCode::InvalidAdmittance:
      return 4;
    case ErrorCode::DivergenceDetected:
    case ErrorCode::MaxIterExceeded:
    case ErrorCode::SuperluminalStep:
    case ErrorCode::SuperluminalVelocity:
    case ErrorCode::TimeStepTooLarge:
      return 5;
    default:
      return 6;
  }
}

}  // namespace tlm
