#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "volterra_net/core_paths.hpp"

namespace vnet {

namespace kernels {
struct Constant { double value; };
struct LinearLag {};                    // lag -> lag
struct Exponential { double theta; };   // lag -> exp(-theta lag)
struct PowerGamma { double alpha; };    // lag -> lag^-alpha / Gamma(alpha)
struct PiecewiseSign { double tau; };   // lag -> 1 if lag <= tau else -1
}  // namespace kernels

/// Convolution kernel K(lag), optionally shifted by a constant (used by perturbation scans).
struct Kernel {
    using Shape = std::variant<kernels::Constant, kernels::LinearLag, kernels::Exponential, kernels::PowerGamma,
                               kernels::PiecewiseSign>;
    Shape shape;
    double offset = 0.0;

    static Kernel constant(double value) { return {kernels::Constant{value}}; }
    static Kernel linear_lag() { return {kernels::LinearLag{}}; }
    static Kernel exponential(double theta) { return {kernels::Exponential{theta}}; }
    static Kernel power_gamma(double alpha);
    static Kernel piecewise_sign(double tau);

    Kernel shifted(double eps) const { return {shape, offset + eps}; }
    std::string describe() const;
};

double kernel_eval(const Kernel& kernel, double lag);

/// Deterministic coefficient (t, x) -> R^{rows x cols}, row-major. Drift has cols = 1.
class CoefficientFn {
public:
    using Eval = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

    CoefficientFn(std::string name, std::size_t rows, std::size_t cols, Eval eval)
        : name_(std::move(name)), rows_(rows), cols_(cols), eval_(std::move(eval)) {}

    static CoefficientFn identity_drift(std::size_t d);
    /// level - x componentwise.
    static CoefficientFn affine_reversion(double level, std::size_t d);
    /// diag(x); requires d == m.
    static CoefficientFn identity_diffusion(std::size_t d);
    /// diag(sqrt|x|); requires d == m.
    static CoefficientFn sqrt_abs_diffusion(std::size_t d);
    /// diag((x^2 + delta^2)^(1/4)), a Lipschitz stand-in for sqrt|x|.
    static CoefficientFn smooth_sqrt_diffusion(std::size_t d, double delta);
    static CoefficientFn constant(std::size_t rows, std::size_t cols, double value);

    /// f + eps in every output entry.
    CoefficientFn shifted(double eps) const;

    const std::string& name() const noexcept { return name_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    void operator()(double t, std::span<const double> x, std::span<double> out) const { eval_(t, x, out); }

private:
    std::string name_;
    std::size_t rows_;
    std::size_t cols_;
    Eval eval_;
};

struct TimeFn {
    std::string name;
    std::function<double(double)> eval;

    static TimeFn one();
    static TimeFn exp_decay(double rate);
    static TimeFn constant(double value);
    TimeFn shifted(double eps) const;
    double operator()(double t) const { return eval(t); }
};

/// X_t = xi g(t) + int K_mu(t-s) mu(s, X_s) ds + int K_sigma(t-s) sigma(s, X_s) dB_s
struct SveProblem {
    std::size_t d;
    std::size_t m;
    TimeFn g;
    Kernel k_mu;
    Kernel k_sigma;
    CoefficientFn mu;
    CoefficientFn sigma;

    void validate() const;
};

/// Left-point Volterra Euler-Maruyama. Cost is quadratic in the number of steps.
SamplePath euler_maruyama(const SveProblem& problem, std::span<const double> xi, const BrownianPath& noise);

}  // namespace vnet
