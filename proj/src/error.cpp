#include "logband/error.hpp"

namespace logband {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteLikelihood: return "NonFiniteLikelihood";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoSpanningSupport: return "NoSpanningSupport";
    case ErrorCode::PackingFailed: return "PackingFailed";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::EmptyBucket: return "EmptyBucket";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace logband
