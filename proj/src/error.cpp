#include "mpc/error.hpp"

namespace mpc {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::UnsupportedArity: return "UnsupportedArity";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::TooFewImages: return "TooFewImages";
        case ErrorCode::ExhaustedSearch: return "ExhaustedSearch";
        case ErrorCode::ConfigInfeasible: return "ConfigInfeasible";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::Parse: return "ParseError";
    }
    return "Unknown";
}

}  // namespace mpc
