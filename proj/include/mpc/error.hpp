#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpc {

enum class ErrorCode {
    DimensionMismatch,
    NonFinite,
    NonPositiveVariance,
    ShapeMismatch,
    EmptyQuery,
    UnsupportedArity,
    ZeroVector,
    EmptyGroundTruth,
    SingleClass,
    BadMagic,
    VersionMismatch,
    TruncatedFile,
    TooFewImages,
    ExhaustedSearch,
    ConfigInfeasible,
    InvalidArgument,
    Io,
    Parse,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported as mpc::Error; code() is the stable
// machine-readable part, what() carries context for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mpc
