#pragma once

#include <stdexcept>
#include <string>

namespace multitreat {

// Error taxonomy shared by every module. Validation errors mean the inputs or
// configuration were unusable; numerical errors mean a computation could not
// be carried out on otherwise well-formed inputs.
enum class ErrorCode {
  RankDeficient,
  NonFinite,
  NonPositiveWeight,
  MissingColumn,
  EmptyAfterFiltering,
  SingletonArm,
  EmptyCell,
  DegenerateVariance,
  NonIntegralCells,
  SingularAverageVariance,
  ZeroVariance,
  ZeroPropensity,
  ZeroMeanWeights,
  NonPositivePropensity,
  BootstrapCellFailure,
  InvalidSpec,
};

enum class ErrorCategory { Validation, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept;

  static const char* code_name(ErrorCode code) noexcept;

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace multitreat
