#pragma once

#include <stdexcept>
#include <string>

namespace ctsr {

enum class ErrorCode {
    dimension_mismatch,
    invalid_argument,
    bad_magic,
    version_mismatch,
    truncated,
    invariant_violation,
    unsupported_format,
    io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised when two tensor dimensions that must agree do not. Both values are
// kept so callers can report them without parsing the message.
class DimensionError : public Error {
public:
    DimensionError(const std::string& context, const std::string& lhs_name, std::size_t lhs,
                   const std::string& rhs_name, std::size_t rhs);

    std::size_t lhs() const noexcept { return lhs_; }
    std::size_t rhs() const noexcept { return rhs_; }

private:
    std::size_t lhs_;
    std::size_t rhs_;
};

}  // namespace ctsr
