#include "msvad/error.hpp"

namespace msvad {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::kCorruptFile: return "CorruptFile";
    case ErrorKind::kInvalidGrid: return "InvalidGrid";
    case ErrorKind::kWrongFeatureKind: return "WrongFeatureKind";
    case ErrorKind::kFormatError: return "FormatError";
    case ErrorKind::kGridMismatch: return "GridMismatch";
    case ErrorKind::kDomainError: return "DomainError";
    case ErrorKind::kWindowCountMismatch: return "WindowCountMismatch";
    case ErrorKind::kEmptyBank: return "EmptyBank";
    case ErrorKind::kOutOfOrderSegment: return "OutOfOrderSegment";
    case ErrorKind::kNotTriggered: return "NotTriggered";
    case ErrorKind::kSpanOutOfRange: return "SpanOutOfRange";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kNumericalFailure: return "NumericalFailure";
    case ErrorKind::kNotSingleSpeakerSet: return "NotSingleSpeakerSet";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kEmptyWavPool: return "EmptyWavPool";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace msvad
