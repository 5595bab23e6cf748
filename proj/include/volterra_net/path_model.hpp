#pragma once

#include <span>
#include <string_view>

#include "volterra_net/core_paths.hpp"

namespace vnet {

enum class ModelKind { Nsve, Nsde, DeepOnet };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Anything that maps (initial condition, driving noise) to a predicted path.
class PathModel {
public:
    virtual ~PathModel() = default;
    virtual ModelKind kind() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::size_t noise_dim() const = 0;
    virtual SamplePath predict(std::span<const double> xi, const BrownianPath& noise) const = 0;
};

}  // namespace vnet
