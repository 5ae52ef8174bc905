#pragma once

#include <stdexcept>
#include <string>

namespace taxisim {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TAXISIM_DEFINE_ERROR(Name)                   \
  class Name : public Error {                        \
   public:                                           \
    explicit Name(const std::string& what)           \
        : Error(std::string(#Name ": ") + what) {}   \
  }

TAXISIM_DEFINE_ERROR(NoPath);
TAXISIM_DEFINE_ERROR(UnknownNode);
TAXISIM_DEFINE_ERROR(InvalidConfig);
TAXISIM_DEFINE_ERROR(ProtocolViolation);
TAXISIM_DEFINE_ERROR(OutOfBounds);
TAXISIM_DEFINE_ERROR(Infeasible);
TAXISIM_DEFINE_ERROR(TooLarge);
TAXISIM_DEFINE_ERROR(IOFailure);
TAXISIM_DEFINE_ERROR(InvalidSeries);
TAXISIM_DEFINE_ERROR(MissingFactor);
TAXISIM_DEFINE_ERROR(UnknownAgent);
TAXISIM_DEFINE_ERROR(StaleDecision);
TAXISIM_DEFINE_ERROR(MalformedAction);
TAXISIM_DEFINE_ERROR(LogMismatch);
TAXISIM_DEFINE_ERROR(SessionAborted);
TAXISIM_DEFINE_ERROR(UnknownSession);

#undef TAXISIM_DEFINE_ERROR

}  // namespace taxisim
