#include "volterra_net/sve_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "volterra_net/errors.hpp"

namespace vnet {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void require_square(std::size_t d, const char* what) {
    if (d == 0) throw Error(ErrorKind::InvalidArgument, std::string(what) + " requires d >= 1");
}

}  // namespace

Kernel Kernel::power_gamma(double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw Error(ErrorKind::InvalidArgument, "PowerGamma requires alpha in (0, 1/2)");
    return {kernels::PowerGamma{alpha}};
}

Kernel Kernel::piecewise_sign(double tau) {
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "PiecewiseSign requires tau > 0");
    return {kernels::PiecewiseSign{tau}};
}

std::string Kernel::describe() const {
    std::ostringstream out;
    std::visit(Overloaded{
                   [&](const kernels::Constant& k) { out << "constant(" << k.value << ")"; },
                   [&](const kernels::LinearLag&) { out << "linear_lag"; },
                   [&](const kernels::Exponential& k) { out << "exponential(" << k.theta << ")"; },
                   [&](const kernels::PowerGamma& k) { out << "power_gamma(" << k.alpha << ")"; },
                   [&](const kernels::PiecewiseSign& k) { out << "piecewise_sign(" << k.tau << ")"; },
               },
               shape);
    if (offset != 0.0) out << "+" << offset;
    return out.str();
}

double kernel_eval(const Kernel& kernel, double lag) {
    if (!(lag >= 0.0)) throw Error(ErrorKind::InvalidArgument, "kernel lag must be non-negative");
    const double base = std::visit(
        Overloaded{
            [](const kernels::Constant& k) { return k.value; },
            [&](const kernels::LinearLag&) { return lag; },
            [&](const kernels::Exponential& k) { return std::exp(-k.theta * lag); },
            [&](const kernels::PowerGamma& k) {
                if (lag == 0.0) throw Error(ErrorKind::SingularAtZero, "power kernel evaluated at lag 0");
                return std::pow(lag, -k.alpha) / std::tgamma(k.alpha);
            },
            [&](const kernels::PiecewiseSign& k) { return lag <= k.tau ? 1.0 : -1.0; },
        },
        kernel.shape);
    return base + kernel.offset;
}

CoefficientFn CoefficientFn::identity_drift(std::size_t d) {
    require_square(d, "identity drift");
    return {"identity", d, 1, [](double, std::span<const double> x, std::span<double> out) {
                for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
            }};
}

CoefficientFn CoefficientFn::affine_reversion(double level, std::size_t d) {
    require_square(d, "affine reversion");
    return {"reversion(" + std::to_string(level) + ")", d, 1,
            [level](double, std::span<const double> x, std::span<double> out) {
                for (std::size_t i = 0; i < x.size(); ++i) out[i] = level - x[i];
            }};
}

CoefficientFn CoefficientFn::identity_diffusion(std::size_t d) {
    require_square(d, "identity diffusion");
    return {"diag(x)", d, d, [d](double, std::span<const double> x, std::span<double> out) {
                std::fill(out.begin(), out.end(), 0.0);
                for (std::size_t i = 0; i < d; ++i) out[i * d + i] = x[i];
            }};
}

CoefficientFn CoefficientFn::sqrt_abs_diffusion(std::size_t d) {
    require_square(d, "sqrt-abs diffusion");
    return {"diag(sqrt|x|)", d, d, [d](double, std::span<const double> x, std::span<double> out) {
                std::fill(out.begin(), out.end(), 0.0);
                for (std::size_t i = 0; i < d; ++i) out[i * d + i] = std::sqrt(std::abs(x[i]));
            }};
}

CoefficientFn CoefficientFn::smooth_sqrt_diffusion(std::size_t d, double delta) {
    require_square(d, "smooth sqrt diffusion");
    const double delta2 = delta * delta;
    return {"diag((x^2+" + std::to_string(delta2) + ")^(1/4))", d, d,
            [d, delta2](double, std::span<const double> x, std::span<double> out) {
                std::fill(out.begin(), out.end(), 0.0);
                for (std::size_t i = 0; i < d; ++i) out[i * d + i] = std::sqrt(std::sqrt(x[i] * x[i] + delta2));
            }};
}

CoefficientFn CoefficientFn::constant(std::size_t rows, std::size_t cols, double value) {
    return {"constant(" + std::to_string(value) + ")", rows, cols,
            [value](double, std::span<const double>, std::span<double> out) {
                std::fill(out.begin(), out.end(), value);
            }};
}

CoefficientFn CoefficientFn::shifted(double eps) const {
    auto base = eval_;
    return {name_ + "+" + std::to_string(eps), rows_, cols_,
            [base, eps](double t, std::span<const double> x, std::span<double> out) {
                base(t, x, out);
                for (double& v : out) v += eps;
            }};
}

TimeFn TimeFn::one() { return {"1", [](double) { return 1.0; }}; }

TimeFn TimeFn::exp_decay(double rate) {
    return {"exp(-" + std::to_string(rate) + "t)", [rate](double t) { return std::exp(-rate * t); }};
}

TimeFn TimeFn::constant(double value) {
    return {std::to_string(value), [value](double) { return value; }};
}

TimeFn TimeFn::shifted(double eps) const {
    auto base = eval;
    return {name + "+" + std::to_string(eps), [base, eps](double t) { return base(t) + eps; }};
}

void SveProblem::validate() const {
    if (d == 0 || m == 0) throw Error(ErrorKind::InvalidArgument, "SVE dimensions must be positive");
    if (mu.rows() != d || mu.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "drift must map to R^d");
    if (sigma.rows() != d || sigma.cols() != m)
        throw Error(ErrorKind::ShapeMismatch, "diffusion must map to R^{d x m}");
}

SamplePath euler_maruyama(const SveProblem& problem, std::span<const double> xi, const BrownianPath& noise) {
    problem.validate();
    const std::size_t d = problem.d;
    const std::size_t m = problem.m;
    if (noise.dim() != m) throw Error(ErrorKind::DimMismatch, "Brownian dimension differs from problem m");
    if (xi.size() != d) throw Error(ErrorKind::DimMismatch, "initial condition has wrong dimension");

    const TimeGrid& grid = noise.grid();
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();

    // Lags t_i - t_j take only the values k dt, k = 1..n.
    std::vector<double> k_mu(n + 1, 0.0);
    std::vector<double> k_sigma(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
        k_mu[k] = kernel_eval(problem.k_mu, grid.node(k));
        k_sigma[k] = kernel_eval(problem.k_sigma, grid.node(k));
    }

    SamplePath out(grid, d);
    std::vector<double> drift(n * d);       // mu(t_j, X_j)
    std::vector<double> shock(n * d, 0.0);  // sigma(t_j, X_j) dB_j
    std::vector<double> sigma_buf(d * m);
    std::vector<double> drift_sum(d);
    std::vector<double> shock_sum(d);

    auto check_finite = [&](std::size_t node) {
        for (double v : out.at(node))
            if (!std::isfinite(v)) throw NonFinitePathError(node, "Volterra Euler-Maruyama");
    };

    for (std::size_t i = 0; i <= n; ++i) {
        const double t = grid.node(i);
        const double g = problem.g(t);
        std::fill(drift_sum.begin(), drift_sum.end(), 0.0);
        std::fill(shock_sum.begin(), shock_sum.end(), 0.0);
        for (std::size_t j = 0; j < i; ++j) {
            const double wm = k_mu[i - j] * dt;
            const double ws = k_sigma[i - j];
            for (std::size_t r = 0; r < d; ++r) {
                drift_sum[r] += wm * drift[j * d + r];
                shock_sum[r] += ws * shock[j * d + r];
            }
        }
        auto x = out.at(i);
        for (std::size_t r = 0; r < d; ++r) x[r] = xi[r] * g + drift_sum[r] + shock_sum[r];
        check_finite(i);
        if (i == n) break;

        problem.mu(t, x, std::span<double>(drift).subspan(i * d, d));
        problem.sigma(t, x, sigma_buf);
        const auto db = noise.increment(i);
        for (std::size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < m; ++c) acc += sigma_buf[r * m + c] * db[c];
            shock[i * d + r] = acc;
        }
    }
    return out;
}

}  // namespace vnet
