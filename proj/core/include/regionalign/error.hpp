#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regionalign {

enum class ErrorCode {
  kInvalidConfiguration,
  kInvalidRegion,
  kEmptyMask,
  kZeroNorm,
  kInvalidSupport,
  kBankIncompatible,
  kShape,
  kTrainingDiverged,
  kBadMagic,
  kTruncated,
  kNonFinite,
  kDuplicateName,
  kMalformed,
  kIo,
};

/// Stable kebab-case identifier used in diagnostics.
std::string_view error_code_name(ErrorCode code);

/// The single exception type thrown by the library. Carries a category and,
/// for file parsing errors, the byte offset at which the problem was found.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> offset = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<std::uint64_t>& offset() const noexcept { return offset_; }

  /// True for failures of the file system itself rather than of content.
  bool is_io() const noexcept { return code_ == ErrorCode::kIo; }

  /// One-line diagnostic: `error[<code>] [@<offset>] <message>`.
  std::string diagnostic() const;

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace regionalign
