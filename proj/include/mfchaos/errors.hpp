#pragma once

#include <stdexcept>
#include <string>

namespace mfchaos {

// Every failure the library reports derives from Error so callers can catch
// one type; the subclass names are part of the public contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MFCHAOS_DEFINE_ERROR(Name)              \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what)      \
        : Error(std::string(#Name ": ") + what) {} \
  }

MFCHAOS_DEFINE_ERROR(SingularPoint);
MFCHAOS_DEFINE_ERROR(DimensionMismatch);
MFCHAOS_DEFINE_ERROR(Unsupported);
MFCHAOS_DEFINE_ERROR(NotTorus);
MFCHAOS_DEFINE_ERROR(CollisionError);
MFCHAOS_DEFINE_ERROR(UnnormalizedDensity);
MFCHAOS_DEFINE_ERROR(CFLViolation);
MFCHAOS_DEFINE_ERROR(DegenerateDensity);
MFCHAOS_DEFINE_ERROR(MemoryCap);
MFCHAOS_DEFINE_ERROR(IndexRange);
MFCHAOS_DEFINE_ERROR(StateCap);
MFCHAOS_DEFINE_ERROR(StabilityViolation);
MFCHAOS_DEFINE_ERROR(EmptyWindow);
MFCHAOS_DEFINE_ERROR(ConfigError);
MFCHAOS_DEFINE_ERROR(FormatError);

#undef MFCHAOS_DEFINE_ERROR

}  // namespace mfchaos
