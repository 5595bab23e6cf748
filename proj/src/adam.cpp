#include "volterra_net/adam.hpp"

#include <cmath>

#include "volterra_net/errors.hpp"

namespace vnet {

void adam_step(AdamState& state, ParamVector& params) {
    const std::size_t n = params.size();
    if (state.first_moment.size() != n || state.second_moment.size() != n)
        throw Error(ErrorKind::ShapeMismatch, "Adam state does not match parameter count");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto theta = params.values();
    const auto grad = params.grads();
    for (std::size_t k = 0; k < n; ++k) {
        double& m = state.first_moment[k];
        double& v = state.second_moment[k];
        m = state.beta1 * m + (1.0 - state.beta1) * grad[k];
        v = state.beta2 * v + (1.0 - state.beta2) * grad[k] * grad[k];
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        theta[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace vnet
