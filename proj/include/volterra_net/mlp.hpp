#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "volterra_net/autodiff.hpp"

namespace vnet {

inline constexpr double kLipSwishScale = 0.909;

/// Logistic function in the two-branch form that never exponentiates a positive argument.
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double lipswish(double z) { return kLipSwishScale * z * sigmoid(z); }

inline double lipswish_derivative(double z) {
    const double s = sigmoid(z);
    return kLipSwishScale * (s + z * s * (1.0 - s));
}

enum class Activation { LipSwish, None };

/// Layer widths [w_0, ..., w_L]; every hidden layer uses `hidden`, the output layer is linear.
struct MlpSpec {
    std::vector<std::size_t> widths;
    Activation hidden = Activation::LipSwish;

    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    std::size_t n_layers() const { return widths.size() - 1; }
    std::size_t param_count() const;
};

/// A network placed inside a ParamVector.
struct Mlp {
    MlpSpec spec;
    std::vector<AffineParams> layers;

    /// Allocates one weight and one bias block per layer, named `<name>.<layer>.w|b`.
    static Mlp allocate(std::string name, MlpSpec spec, ParamVector& params);
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every weight and bias of `net`.
void init_uniform_fan_in(const Mlp& net, ParamVector& params, std::uint64_t seed, std::uint64_t stream);

Var mlp_forward(const Mlp& net, Var x, Tape& tape);

/// Tape-free evaluation for inference.
std::vector<double> mlp_eval(const Mlp& net, std::span<const double> params, std::span<const double> x);

}  // namespace vnet
