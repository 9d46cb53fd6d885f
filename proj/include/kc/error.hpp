#pragma once

#include <stdexcept>
#include <string>

namespace kc {

// Base class for every error raised by the library. `code()` is a stable
// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define KC_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

KC_DEFINE_ERROR(DimensionError, "dimension")
KC_DEFINE_ERROR(DegenerateInputError, "degenerate_input")
KC_DEFINE_ERROR(ContractError, "contract")
KC_DEFINE_ERROR(ValidationError, "validation")
KC_DEFINE_ERROR(LookupError, "lookup")
KC_DEFINE_ERROR(NoVerticalError, "no_vertical")
KC_DEFINE_ERROR(NoDataError, "no_data")
KC_DEFINE_ERROR(RoutingError, "routing")
KC_DEFINE_ERROR(MissingTargetsError, "missing_targets")
KC_DEFINE_ERROR(UndefinedApError, "undefined_ap")
KC_DEFINE_ERROR(FormatError, "format")
KC_DEFINE_ERROR(IoError, "io")

#undef KC_DEFINE_ERROR

}  // namespace kc
