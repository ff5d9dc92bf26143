#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tlm {

enum class ErrorCode {
  DimensionMismatch,
  NotIdempotent,
  NotComplementary,
  SingularGauge,
  NonSquare,
  ResolventSingular,
  NonInvertibleLeadCoefficient,
  LayoutMismatch,
  SingularGeometry,
  InvalidAdmittance,
  SingularTPlus,
  StubSqrtDomain,
  NotPSD,
  SuperluminalVelocity,
  SuperluminalStep,
  TimeStepTooLarge,
  UnstableCell,
  DivergenceDetected,
  ZeroIncident,
  MaxIterExceeded,
  SchemaViolation,
  UnitError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Process exit status the CLI reports for an error of this kind.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tlm
