#pragma once

#include <stdexcept>
#include <string>

namespace logband {

enum class ErrorCode {
  InvalidInstance,
  NonFiniteInput,
  NonFiniteLikelihood,
  TooFewSamples,
  InvalidConfig,
  NoSpanningSupport,
  PackingFailed,
  NotConverged,
  EmptyBucket,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace logband
