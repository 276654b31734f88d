#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nbmvc {

enum class ErrorCode {
    InvalidArgument,
    NotFound,
    CycleError,
    SequenceGap,
    UnsupportedVersion,
    ParseError,
    AnchorError,
    GuardFailed,
    TransactionRolledBack,
    NoProcessor,
    ReplaceRejected,
    NothingToUndo,
    NothingToRedo,
    MalformedRawEvent,
    InvalidAnswer,
    ProfileError,
    ProfileMismatch,
    SelectionError,
    CannotGenerate,
    InputError,
    SessionGone,
    IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code), cause_(code) {}
    Error(ErrorCode code, ErrorCode cause, const std::string& message)
        : std::runtime_error(message), code_(code), cause_(cause) {}

    ErrorCode code() const noexcept { return code_; }
    /// The underlying failure for wrapping errors such as
    /// TransactionRolledBack; equal to code() otherwise.
    ErrorCode cause() const noexcept { return cause_; }

private:
    ErrorCode code_;
    ErrorCode cause_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace nbmvc
