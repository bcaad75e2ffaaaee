#include "regionalign/error.hpp"

namespace regionalign {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfiguration: return "invalid-configuration";
    case ErrorCode::kInvalidRegion: return "invalid-region";
    case ErrorCode::kEmptyMask: return "empty-mask";
    case ErrorCode::kZeroNorm: return "zero-norm";
    case ErrorCode::kInvalidSupport: return "invalid-support";
    case ErrorCode::kBankIncompatible: return "bank-incompatible";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kTrainingDiverged: return "training-diverged";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kDuplicateName: return "duplicate-name";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::uint64_t> offset)
    : std::runtime_error(message), code_(code), offset_(offset) {}

std::string Error::diagnostic() const {
  std::string out = "error[";
  out += error_code_name(code_);
  out += "] ";
  if (offset_) {
    out += "@" + std::to_string(*offset_) + " ";
  }
  for (char ch : std::string_view(what())) {
    out += (ch == '\n' || ch == '\r') ? ' ' : ch;
  }
  return out;
}

}  // namespace regionalign
