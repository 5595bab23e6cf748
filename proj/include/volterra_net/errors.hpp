#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vnet {

enum class ErrorKind {
    NonPositiveInput,
    IncommensurateGrid,
    IndivisibleFactor,
    ZeroTargetNorm,
    ShapeMismatch,
    SingularAtZero,
    NonFinitePath,
    NonScalarLoss,
    BadDims,
    GridMismatch,
    DimMismatch,
    DivergedLoss,
    DegenerateFit,
    InvalidArgument,
    ConfigParseError,
    ValidationError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this one exception type; the kind
// lets callers (and the CLI exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Raised by path solvers; carries the first node whose value is not finite.
class NonFinitePathError : public Error {
public:
    NonFinitePathError(std::size_t node, const std::string& context)
        : Error(ErrorKind::NonFinitePath, context + " (first non-finite node " + std::to_string(node) + ")"),
          node_(node) {}

    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

}  // namespace vnet
