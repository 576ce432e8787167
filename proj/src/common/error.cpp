#include "nadir/error.hpp"

namespace nadir {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidNetwork: return "InvalidNetwork";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::InfeasibleDispatch: return "InfeasibleDispatch";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::DegenerateCoefficients: return "DegenerateCoefficients";
        case ErrorCode::PerplexityOutOfRange: return "PerplexityOutOfRange";
        case ErrorCode::GridTooSmall: return "GridTooSmall";
        case ErrorCode::NumericalDivergence: return "NumericalDivergence";
        case ErrorCode::MissingNodeCoordinate: return "MissingNodeCoordinate";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::GridTooSmallForKernel: return "GridTooSmallForKernel";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Storage: return "Storage";
    }
    return "Unknown";
}

}  // namespace nadir
