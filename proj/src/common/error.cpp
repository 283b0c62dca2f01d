#include "pinfer/common/error.hpp"

namespace pinfer {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kOverflow: return "overflow";
    case ErrorCode::kConfigMismatch: return "config-mismatch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kEntropyFailure: return "entropy-failure";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kInvalidParams: return "invalid-params";
    case ErrorCode::kNoiseExhausted: return "noise-exhausted";
    case ErrorCode::kDepthExceeded: return "depth-exceeded";
    case ErrorCode::kParamMismatch: return "param-mismatch";
    case ErrorCode::kPackingGeometry: return "packing-geometry";
    case ErrorCode::kTranscriptInvalid: return "transcript-invalid";
    case ErrorCode::kOtReuse: return "ot-reuse";
    case ErrorCode::kTripleExhausted: return "triple-exhausted";
    case ErrorCode::kTripleReuse: return "triple-reuse";
    case ErrorCode::kDivideByZero: return "divide-by-zero";
    case ErrorCode::kModelFormat: return "model-format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kNetwork: return "network";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kAuthFailure: return "auth-failure";
    case ErrorCode::kProtocolDesync: return "protocol-desync";
    case ErrorCode::kPeerAbort: return "peer-abort";
    case ErrorCode::kChannelClosed: return "channel-closed";
    case ErrorCode::kNoRoute: return "no-route";
    case ErrorCode::kEmptyQuery: return "empty-query";
    case ErrorCode::kDecapsulation: return "decapsulation";
    case ErrorCode::kConfirmation: return "confirmation";
    case ErrorCode::kReplay: return "replay";
    case ErrorCode::kAead: return "aead";
    case ErrorCode::kLabelMismatch: return "label-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kBindFailure: return "bind-failure";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace pinfer
