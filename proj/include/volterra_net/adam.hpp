#pragma once

#include <cstddef>
#include <vector>

#include "volterra_net/autodiff.hpp"

namespace vnet {

struct AdamState {
    std::size_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-3;

    AdamState() = default;
    AdamState(std::size_t n_params, double lr)
        : first_moment(n_params, 0.0), second_moment(n_params, 0.0), learning_rate(lr) {}
};

/// One bias-corrected Adam update of `params` from its gradient array.
void adam_step(AdamState& state, ParamVector& params);

}  // namespace vnet
