#include "nsca/error.hpp"

namespace nsca {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptySignal: return "EmptySignal";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptyEpochSet: return "EmptyEpochSet";
    case ErrorKind::WindowTooLarge: return "WindowTooLarge";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularB: return "SingularB";
    case ErrorKind::NonpositivePredictedVariance: return "NonpositivePredictedVariance";
    case ErrorKind::NoPeaksFound: return "NoPeaksFound";
    case ErrorKind::TooFewPeaks: return "TooFewPeaks";
    case ErrorKind::HorizonMismatch: return "HorizonMismatch";
    case ErrorKind::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorKind::InsufficientEpochs: return "InsufficientEpochs";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingSamplingRate: return "MissingSamplingRate";
    case ErrorKind::UnknownConfigKey: return "UnknownConfigKey";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace nsca
