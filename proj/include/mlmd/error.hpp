#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlmd {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyInput,
  kLengthMismatch,
  kEmptySelection,
  kShortBeam,
  kMismatchedReconstruction,
  kDimensionMismatch,
  kGradientUnavailable,
  kRequiresFullPlan,
  kEmptyDataset,
  kEmptyGradientSet,
  kSingleClassCorpus,
  kUncalibratedDetector,
  kBackendFailure,
  kTimeout,
  kSchemaViolation,
  kHttpStatus,
};

std::string_view error_code_name(ErrorCode code);

// True for failures that originate in a model backend or transport rather
// than in caller-supplied data.
bool is_backend_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mlmd
