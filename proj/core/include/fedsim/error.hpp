#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedsim {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidScheme,
  kEmptyUpdates,
  kDimensionMismatch,
  kInvalidConstants,
  kNanDetected,
  kEmptyDataset,
  kMissingAuditLog,
  kMissingPrev,
  kWeightOverflow,
  kUnknownConstants,
  kInconsistent,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every recoverable failure in the library. Callers that
/// need to branch on the failure kind inspect code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A non-finite value appeared in a client or server iterate. Carries the
/// round so a run can report where it diverged.
class NanError : public Error {
 public:
  NanError(std::size_t round, const std::string& where)
      : Error(ErrorCode::kNanDetected,
              "non-finite value in " + where + " at round " + std::to_string(round)),
        round_(round) {}

  std::size_t round() const noexcept { return round_; }

 private:
  std::size_t round_;
};

}  // namespace fedsim
