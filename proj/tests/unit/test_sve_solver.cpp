#include <doctest.h>

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "volterra_net/errors.hpp"
#include "volterra_net/experiments.hpp"
#include "volterra_net/sve_solver.hpp"

using namespace vnet;

namespace {

// Lanczos approximation (g = 7, nine coefficients), independent of std::tgamma.
double lanczos_gamma(double x) {
    static constexpr std::array<double, 9> c = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
    x -= 1.0;
    double a = c[0];
    const double t = x + 7.5;
    for (std::size_t k = 1; k < c.size(); ++k) a += c[k] / (x + static_cast<double>(k));
    return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

SveProblem scalar_problem(TimeFn g, Kernel k, CoefficientFn mu, CoefficientFn sigma) {
    return {1, 1, std::move(g), k, k, std::move(mu), std::move(sigma)};
}

std::vector<double> mc_mean(const SveProblem& prob, const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                            std::vector<double>* sd = nullptr) {
    std::vector<double> sum(grid.n_nodes(), 0.0), sum2(grid.n_nodes(), 0.0);
    const std::vector<double> xi = {2.0};
    for (std::size_t s = 0; s < n; ++s) {
        auto engine = make_engine(seed, s, 2);
        const SamplePath p = euler_maruyama(prob, xi, sample_brownian(grid, 1, engine));
        for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
            sum[i] += p.at(i)[0];
            sum2[i] += p.at(i)[0] * p.at(i)[0];
        }
    }
    const double nn = static_cast<double>(n);
    if (sd) {
        sd->resize(grid.n_nodes());
        for (std::size_t i = 0; i < grid.n_nodes(); ++i)
            (*sd)[i] = std::sqrt(std::max(0.0, sum2[i] / nn - (sum[i] / nn) * (sum[i] / nn)));
    }
    for (double& v : sum) v /= nn;
    return sum;
}

}  // namespace

TEST_CASE("kernel examples") {
    CHECK(kernel_eval(Kernel::exponential(1.0), 0.0) == 1.0);
    CHECK(kernel_eval(Kernel::exponential(2.0), 0.5) == doctest::Approx(std::exp(-1.0)));
    CHECK(kernel_eval(Kernel::piecewise_sign(1.25), 2.0) == -1.0);
    CHECK(kernel_eval(Kernel::piecewise_sign(1.25), 1.25) == 1.0);
    CHECK(kernel_eval(Kernel::linear_lag(), 0.7) == 0.7);
    CHECK(kernel_eval(Kernel::constant(3.0), 4.0) == 3.0);
    CHECK(kernel_eval(Kernel::constant(3.0).shifted(0.25), 4.0) == 3.25);

    CHECK(lanczos_gamma(5.0) == doctest::Approx(24.0).epsilon(1e-13));
    CHECK(lanczos_gamma(0.5) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    const double expect = std::pow(0.1, -0.4) / lanczos_gamma(0.4);
    CHECK(kernel_eval(Kernel::power_gamma(0.4), 0.1) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(1.13242).epsilon(1e-5));
}

TEST_CASE("kernel errors") {
    CHECK_THROWS_WITH_AS(kernel_eval(Kernel::power_gamma(0.4), 0.0), doctest::Contains("SingularAtZero"), Error);
    CHECK_THROWS_AS(kernel_eval(Kernel::exponential(1.0), -0.1), Error);
    CHECK_THROWS_AS(Kernel::power_gamma(0.5), Error);
    CHECK_THROWS_AS(Kernel::power_gamma(0.0), Error);
    CHECK_THROWS_AS(Kernel::piecewise_sign(0.0), Error);
}

TEST_CASE("zero coefficients leave xi g(t)") {
    const auto prob = scalar_problem(TimeFn::exp_decay(1.0), Kernel::exponential(1.0),
                                     CoefficientFn::constant(1, 1, 0.0), CoefficientFn::constant(1, 1, 0.0));
    const TimeGrid grid = make_uniform_grid(5.0, 0.1);
    const std::vector<double> xi = {2.0};
    const SamplePath p = euler_maruyama(prob, xi, sample_brownian(grid, 1, 1));
    for (std::size_t i = 0; i <= grid.n_steps(); ++i) CHECK(p.at(i)[0] == 2.0 * std::exp(-grid.node(i)));
}

TEST_CASE("constant unit kernels reproduce the classical Euler-Maruyama recursion") {
    for (const auto& spec : {make_experiment(Benchmark::Pendulum), make_experiment(Benchmark::RoughHeston)}) {
        SveProblem prob = spec.problem;
        prob.k_mu = Kernel::constant(1.0);
        prob.k_sigma = Kernel::constant(1.0);
        const TimeGrid grid = make_uniform_grid(2.0, 0.05);
        const BrownianPath noise = sample_brownian(grid, 1, 17);
        const std::vector<double> xi = {1.9};
        const SamplePath p = euler_maruyama(prob, xi, noise);

        // dX = mu dt + sigma dB, coded directly.
        double x = 1.9;
        double worst = 0.0;
        for (std::size_t i = 0;; ++i) {
            worst = std::max(worst, std::abs(p.at(i)[0] - x) / (1.0 + std::abs(x)));
            if (i == grid.n_steps()) break;
            const double mu = spec.id == Benchmark::Pendulum ? x : 2.0 - x;
            const double sigma = spec.id == Benchmark::Pendulum ? x : std::sqrt(std::abs(x));
            x += mu * grid.dt() + sigma * noise.increment(i)[0];
        }
        CHECK(worst < 1e-12);
    }
}

namespace {

// Mean of the left-point scheme for the OU benchmark: m_i = 2 e^{-t_i} + sum_j e^{-(t_i - t_j)} m_j dt.
std::vector<double> ou_scheme_mean(const TimeGrid& grid) {
    std::vector<double> m(grid.n_nodes());
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
        m[i] = 2.0 * std::exp(-grid.node(i));
        for (std::size_t j = 0; j < i; ++j) m[i] += std::exp(-(grid.node(i) - grid.node(j))) * m[j] * grid.dt();
    }
    return m;
}

}  // namespace

TEST_CASE("OU Monte-Carlo mean matches the mean recursion of the scheme") {
    const auto spec = make_experiment(Benchmark::Ou1d);
    const TimeGrid grid = spec.grid();
    const std::size_t n = 10000;
    std::vector<double> sd;
    const auto mean = mc_mean(spec.problem, grid, n, 123, &sd);
    const auto m = ou_scheme_mean(grid);
    for (std::size_t i = 0; i < grid.n_nodes(); ++i)
        CHECK(std::abs(mean[i] - m[i]) <= 4.0 * sd[i] / std::sqrt(static_cast<double>(n)) + 1e-12);
}

TEST_CASE("OU scheme mean converges to 2 at first order") {
    // The continuous mean is identically 2; the left-point kernel sum loses mass at rate O(dt).
    double previous = 0.0;
    for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
        const auto m = ou_scheme_mean(make_uniform_grid(5.0, dt));
        double bias = 0.0;
        for (double v : m) bias = std::max(bias, std::abs(v - 2.0));
        if (previous > 0.0) CHECK(previous / bias == doctest::Approx(2.0).epsilon(0.1));
        previous = bias;
    }
    CHECK(previous < 5.0 * 0.0125);
}

TEST_CASE("pendulum mean follows 2 cosh(t)") {
    const auto spec = make_experiment(Benchmark::Pendulum);
    const TimeGrid grid = make_uniform_grid(2.0, 0.01);
    const auto mean = mc_mean(spec.problem, grid, 2000, 5);
    for (std::size_t i = 0; i < grid.n_nodes(); ++i) {
        const double expect = 2.0 * std::cosh(grid.node(i));
        CHECK(std::abs(mean[i] - expect) / expect < 0.05);
    }
}

TEST_CASE("benchmarks stay finite") {
    for (Benchmark b : {Benchmark::Pendulum, Benchmark::Ou1d, Benchmark::Ou2d, Benchmark::RoughHeston,
                        Benchmark::PathDependent}) {
        const auto spec = make_experiment(b);
        const TimeGrid grid = spec.grid();
        std::size_t failures = 0;
        for (std::size_t s = 0; s < 10000; ++s) {
            auto engine = make_engine(77, s, 1);
            const auto xi = spec.law.sample(engine);
            try {
                euler_maruyama(spec.problem, xi, sample_brownian(grid, spec.problem.m, engine));
            } catch (const NonFinitePathError&) {
                ++failures;
            }
        }
        CHECK_MESSAGE(failures == 0, spec.name);
    }
}

TEST_CASE("non-finite values report the first bad node") {
    const CoefficientFn blowup("blowup", 1, 1, [](double t, std::span<const double>, std::span<double> out) {
        out[0] = t > 0.25 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    });
    const auto prob = scalar_problem(TimeFn::one(), Kernel::constant(1.0), blowup, CoefficientFn::constant(1, 1, 0.0));
    const TimeGrid grid = make_uniform_grid(1.0, 0.1);
    const std::vector<double> xi = {1.0};
    try {
        euler_maruyama(prob, xi, sample_brownian(grid, 1, 1));
        FAIL("expected NonFinitePath");
    } catch (const NonFinitePathError& e) {
        // Drift first turns NaN at t_3 = 0.3 and enters X at node 4.
        CHECK(e.node() == 4);
        CHECK(e.kind() == ErrorKind::NonFinitePath);
    }
}

TEST_CASE("dimension checks") {
    const auto spec = make_experiment(Benchmark::Ou2d);
    const TimeGrid grid = spec.grid();
    const std::vector<double> xi2 = {2.0, 2.0};
    const std::vector<double> xi1 = {2.0};
    CHECK_THROWS_WITH_AS(euler_maruyama(spec.problem, xi2, sample_brownian(grid, 1, 1)),
                         doctest::Contains("DimMismatch"), Error);
    CHECK_THROWS_AS(euler_maruyama(spec.problem, xi1, sample_brownian(grid, 2, 1)), Error);
    CHECK(euler_maruyama(spec.problem, xi2, sample_brownian(grid, 2, 1)).dim() == 2);
}

TEST_CASE("solve cost grows quadratically in the step count") {
    const auto spec = make_experiment(Benchmark::RoughHeston);
    const std::vector<double> xi = {2.0};
    auto best_time = [&](double dt) {
        const TimeGrid grid = make_uniform_grid(5.0, dt);
        const BrownianPath noise = sample_brownian(grid, 1, 1);
        double best = 1e9;
        for (int rep = 0; rep < 5; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            for (int k = 0; k < 4; ++k) euler_maruyama(spec.problem, xi, noise);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        return best;
    };
    const double ratio = best_time(5.0 / 4000) / best_time(5.0 / 2000);
    MESSAGE("doubling ratio " << ratio);
    // Loose bounds; this is a regression guard against accidental cubic work, not a benchmark.
    CHECK(ratio > 2.5);
    CHECK(ratio < 8.0);
}
