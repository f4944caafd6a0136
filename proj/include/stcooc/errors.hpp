#pragma once

#include <stdexcept>
#include <string>

namespace stcooc {

/// Base of every error thrown by the library. `kind()` is a stable tag used in
/// CLI diagnostics and tests.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define STCOOC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  };

STCOOC_DEFINE_ERROR(InvalidValue)
STCOOC_DEFINE_ERROR(ShapeError)
STCOOC_DEFINE_ERROR(FormatError)
STCOOC_DEFINE_ERROR(InputTooSmall)
STCOOC_DEFINE_ERROR(DivergenceError)
STCOOC_DEFINE_ERROR(ProvenanceError)
STCOOC_DEFINE_ERROR(DegenerateLabels)
STCOOC_DEFINE_ERROR(RateError)
STCOOC_DEFINE_ERROR(EmptyDecisions)
STCOOC_DEFINE_ERROR(BoxError)
STCOOC_DEFINE_ERROR(ConfigError)
STCOOC_DEFINE_ERROR(InstanceError)
STCOOC_DEFINE_ERROR(EmptyEval)
STCOOC_DEFINE_ERROR(SpecError)
STCOOC_DEFINE_ERROR(IoError)

#undef STCOOC_DEFINE_ERROR

}  // namespace stcooc
