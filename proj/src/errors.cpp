#include "volterra_net/errors.hpp"

namespace vnet {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonPositiveInput: return "NonPositiveInput";
        case ErrorKind::IncommensurateGrid: return "IncommensurateGrid";
        case ErrorKind::IndivisibleFactor: return "IndivisibleFactor";
        case ErrorKind::ZeroTargetNorm: return "ZeroTargetNorm";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::SingularAtZero: return "SingularAtZero";
        case ErrorKind::NonFinitePath: return "NonFinitePath";
        case ErrorKind::NonScalarLoss: return "NonScalarLoss";
        case ErrorKind::BadDims: return "BadDims";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::DivergedLoss: return "DivergedLoss";
        case ErrorKind::DegenerateFit: return "DegenerateFit";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ConfigParseError: return "ConfigParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace vnet
