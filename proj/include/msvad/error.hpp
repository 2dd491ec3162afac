#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msvad {

enum class ErrorKind {
  kUnsupportedFormat,
  kCorruptFile,
  kInvalidGrid,
  kWrongFeatureKind,
  kFormatError,
  kGridMismatch,
  kDomainError,
  kWindowCountMismatch,
  kEmptyBank,
  kOutOfOrderSegment,
  kNotTriggered,
  kSpanOutOfRange,
  kDimensionMismatch,
  kEmptyInput,
  kNumericalFailure,
  kNotSingleSpeakerSet,
  kIoError,
  kEmptyWavPool,
  kInvalidArgument,
  kConfigError,
};

std::string_view ErrorKindName(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and tests)
// can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace msvad
