#ifndef LATOSC_ERRORS_HPP
#define LATOSC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace latosc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySupport : Error {
  using Error::Error;
};
struct InvalidPerturbation : Error {
  using Error::Error;
};
struct ResonantTerm : Error {
  using Error::Error;
};
struct SmallDivisorViolation : Error {
  using Error::Error;
};
struct BoundViolation : Error {
  using Error::Error;
};
struct NotDiagonal : Error {
  using Error::Error;
};
struct StepUnstable : Error {
  using Error::Error;
};
struct FlowIntegrationFailure : Error {
  using Error::Error;
};
struct EpsTooLarge : Error {
  using Error::Error;
};
struct PreconditionViolated : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace latosc

#endif
