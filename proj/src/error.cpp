#include "ctsr/error.hpp"

namespace ctsr {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::dimension_mismatch: return "dimension mismatch";
        case ErrorCode::invalid_argument: return "invalid argument";
        case ErrorCode::bad_magic: return "bad magic";
        case ErrorCode::version_mismatch: return "version mismatch";
        case ErrorCode::truncated: return "truncated";
        case ErrorCode::invariant_violation: return "invariant violation";
        case ErrorCode::unsupported_format: return "unsupported format";
        case ErrorCode::io: return "io error";
    }
    return "unknown";
}

DimensionError::DimensionError(const std::string& context, const std::string& lhs_name,
                               std::size_t lhs, const std::string& rhs_name, std::size_t rhs)
    : Error(ErrorCode::dimension_mismatch,
            context + ": " + lhs_name + " (" + std::to_string(lhs) + ") does not match " +
                rhs_name + " (" + std::to_string(rhs) + ")"),
      lhs_(lhs),
      rhs_(rhs) {}

}  // namespace ctsr
