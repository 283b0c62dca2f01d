#pragma once

#include <stdexcept>
#include <string>

namespace pinfer {

// Every failure surfaced by the library carries one of these codes. The CLI
// maps them onto distinct process exit codes.
enum class ErrorCode {
  kInvalidArgument,
  kOverflow,
  kConfigMismatch,
  kShapeMismatch,
  kEntropyFailure,
  kDecode,
  kInvalidParams,
  kNoiseExhausted,
  kDepthExceeded,
  kParamMismatch,
  kPackingGeometry,
  kTranscriptInvalid,
  kOtReuse,
  kTripleExhausted,
  kTripleReuse,
  kDivideByZero,
  kModelFormat,
  kChecksum,
  kVersion,
  kValidation,
  kNetwork,
  kTimeout,
  kAuthFailure,
  kProtocolDesync,
  kPeerAbort,
  kChannelClosed,
  kNoRoute,
  kEmptyQuery,
  kDecapsulation,
  kConfirmation,
  kReplay,
  kAead,
  kLabelMismatch,
  kIo,
  kUsage,
  kBindFailure,
  kInternal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace pinfer
