#pragma once

#include <stdexcept>
#include <string>

namespace regdiff {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotStronglyConnected : Error {
  using Error::Error;
};
struct ColumnSumViolation : Error {
  using Error::Error;
};
struct NoSelfLoop : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct NonPositiveDelta : Error {
  using Error::Error;
};
struct NonSeparableSum : Error {
  using Error::Error;
};
struct DimensionTooLargeForGenericProximity : Error {
  using Error::Error;
};
struct ConjugateUnavailable : Error {
  using Error::Error;
};
struct DivergenceDetected : Error {
  using Error::Error;
};
struct SubgradientInfeasible : Error {
  using Error::Error;
};
struct TransientNotSettled : Error {
  using Error::Error;
};
struct NonPositiveValue : Error {
  using Error::Error;
};
struct ValidationFailure : Error {
  using Error::Error;
};
struct ConfigParse : Error {
  using Error::Error;
};

}  // namespace regdiff
