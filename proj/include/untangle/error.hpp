#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace untangle {

enum class ErrorCode {
    RepoNotFound,
    CorruptObject,
    UnparsableFile,
    NoChange,
    EmptyInput,
    LengthMismatch,
    UnknownChange,
    InvalidLabel,
    IoFailure,
    MissingExamples,
    MissingMessage,
    PromptTooLarge,
    ProviderUnavailable,
    AuthFailure,
    DimensionMismatch,
    DegenerateClass,
    NonFiniteLoss,
    ParseFailure,
    OutOfRange,
    MissingMetrics,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

// Validation-class errors map to CLI exit status 1, everything else to 2.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace untangle
