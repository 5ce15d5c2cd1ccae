#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Base of every error raised by the library. `kind()` is a stable tag used by
/// the CLI to pick an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define KOOPMAN_DEFINE_ERROR(Name)                                \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

KOOPMAN_DEFINE_ERROR(InvalidMatrix);
KOOPMAN_DEFINE_ERROR(NumericalFailure);
KOOPMAN_DEFINE_ERROR(DegenerateSpectrum);
KOOPMAN_DEFINE_ERROR(NoStabilizingSolution);
KOOPMAN_DEFINE_ERROR(SimulationDiverged);
KOOPMAN_DEFINE_ERROR(InvalidSpec);
KOOPMAN_DEFINE_ERROR(InsufficientData);
KOOPMAN_DEFINE_ERROR(LiftOverflow);
KOOPMAN_DEFINE_ERROR(IllConditionedBasis);
KOOPMAN_DEFINE_ERROR(InvalidReference);
KOOPMAN_DEFINE_ERROR(StaleArtifact);
KOOPMAN_DEFINE_ERROR(ConfigError);
KOOPMAN_DEFINE_ERROR(ParseError);
KOOPMAN_DEFINE_ERROR(IoError);

#undef KOOPMAN_DEFINE_ERROR

}  // namespace koopman
