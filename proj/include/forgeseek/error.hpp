#pragma once

#include <stdexcept>
#include <string>

namespace forgeseek {

enum class ErrorCode {
    FileNotFound,
    UnsupportedFormat,
    CorruptStream,
    IoFailure,
    DegenerateInput,
    InvalidArgument,
    SingleClass,
    InconsistentDims,
    Selection,
    ClassTooSmall,
    ParseFailure,
};

const char* to_string(ErrorCode code);

/// Library-wide exception; `code()` distinguishes failure classes so callers
/// can map them to exit statuses or retry policies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace forgeseek
