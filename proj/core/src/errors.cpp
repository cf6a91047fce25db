#include "multitreat/errors.hpp"

namespace multitreat {

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(code_name(code)) + ": " + message), code_(code) {}

ErrorCategory Error::category() const noexcept {
  switch (code_) {
    case ErrorCode::RankDeficient:
    case ErrorCode::SingularAverageVariance:
    case ErrorCode::NonPositivePropensity:
    case ErrorCode::BootstrapCellFailure:
    case ErrorCode::DegenerateVariance:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Validation;
  }
}

const char* Error::code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::SingletonArm: return "SingletonArm";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::NonIntegralCells: return "NonIntegralCells";
    case ErrorCode::SingularAverageVariance: return "SingularAverageVariance";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::ZeroPropensity: return "ZeroPropensity";
    case ErrorCode::ZeroMeanWeights: return "ZeroMeanWeights";
    case ErrorCode::NonPositivePropensity: return "NonPositivePropensity";
    case ErrorCode::BootstrapCellFailure: return "BootstrapCellFailure";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Error";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace multitreat
