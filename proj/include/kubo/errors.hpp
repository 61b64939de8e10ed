#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kubo {

enum class ErrorCode {
  NoFermiPoint,
  BandEdge,
  DegenerateCrossing,
  ElasticScatteringViolated,
  EigenSolverFailure,
  SingularPropagator,
  CutoffTooLow,
  DimensionTooLarge,
  EtaNotMatsubara,
  CoincidentTimes,
  StepControlFailure,
  NearSingularT,
  NearSingular,
  QuadratureFailure,
  GridTooCoarse,
  InvalidArgument,
  ConfigInvalid,
  ModelFileMissing,
  CheckFailed,
};

std::string_view to_string(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kubo
