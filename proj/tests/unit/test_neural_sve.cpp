#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "volterra_net/baselines.hpp"
#include "volterra_net/errors.hpp"
#include "volterra_net/experiments.hpp"
#include "volterra_net/model_io.hpp"
#include "volterra_net/neural_sve.hpp"

using namespace vnet;

namespace {

void pin_to_constant(const Mlp& net, ParamVector& params, double value) {
    const auto& last = net.layers.back();
    auto v = params.values();
    for (std::size_t k = 0; k < last.rows * last.cols; ++k) v[last.weight_offset + k] = 0.0;
    for (std::size_t k = 0; k < last.rows; ++k) v[last.bias_offset + k] = value;
}

std::vector<double> eval(const Mlp& net, const ParamVector& params, std::vector<double> x) {
    return mlp_eval(net, params.values(), x);
}

// Direct double loop over (i, j) with no kernel caching and no tape.
SamplePath reference_unroll(const NeuralSveModel& model, std::span<const double> xi, const BrownianPath& noise) {
    const auto& nets = model.nets();
    const auto& P = model.params();
    const std::size_t dh = model.dims().d_h, m = model.dims().m, d = model.dims().d;
    const TimeGrid& grid = noise.grid();
    const std::size_t n = grid.n_steps();
    const auto z0 = eval(nets.lift, P, {xi.begin(), xi.end()});
    std::vector<std::vector<double>> drift(n), shock(n);
    SamplePath out(grid, d);
    for (std::size_t i = 0; i <= n; ++i) {
        const double ti = grid.node(i);
        std::vector<double> z(dh);
        const double g = eval(nets.g, P, {ti})[0];
        for (std::size_t r = 0; r < dh; ++r) z[r] = z0[r] * g;
        for (std::size_t j = 0; j < i; ++j) {
            const double lag = ti - grid.node(j);
            const double km = eval(model.k_mu_net(), P, {lag})[0];
            const double ks = eval(model.k_sigma_net(), P, {lag})[0];
            for (std::size_t r = 0; r < dh; ++r) z[r] += km * drift[j][r] * grid.dt() + ks * shock[j][r];
        }
        const auto x = eval(nets.readout, P, z);
        for (std::size_t r = 0; r < d; ++r) out.at(i)[r] = x[r];
        if (i == n) break;
        std::vector<double> input = {ti};
        input.insert(input.end(), z.begin(), z.end());
        drift[i] = eval(nets.drift, P, input);
        const auto sig = eval(nets.diffusion, P, input);
        const auto db = noise.increment(i);
        shock[i].assign(dh, 0.0);
        for (std::size_t r = 0; r < dh; ++r)
            for (std::size_t c = 0; c < m; ++c) shock[i][r] += sig[r * m + c] * db[c];
    }
    return out;
}

double max_abs_diff(const SamplePath& a, const SamplePath& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k)
        worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
    return worst;
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
    const std::size_t d = 1, m = 1, dh = 12, dk = 12;
    const std::size_t lift = d * dh + dh;
    const std::size_t readout = dh * d + d;
    const std::size_t one_d = (1 * dk + dk) + (dk * dk + dk) + (dk * 1 + 1);
    const std::size_t drift = ((1 + dh) * dh + dh) + (dh * dh + dh);
    const std::size_t diffusion = ((1 + dh) * dh * m + dh * m) + (dh * m * dh * m + dh * m);
    const auto model = NeuralSveModel::init({d, m, dh, dk}, 1);
    CHECK(model.params().size() == lift + readout + 3 * one_d + drift + diffusion);
    CHECK(model.params().size() == 1264);
}

TEST_CASE("init is deterministic and validates dimensions") {
    const auto a = NeuralSveModel::init({1, 1, 12, 12}, 42);
    const auto b = NeuralSveModel::init({1, 1, 12, 12}, 42);
    const auto c = NeuralSveModel::init({1, 1, 12, 12}, 43);
    CHECK(std::equal(a.params().values().begin(), a.params().values().end(), b.params().values().begin()));
    CHECK_FALSE(std::equal(a.params().values().begin(), a.params().values().end(), c.params().values().begin()));
    CHECK_THROWS_WITH_AS(NeuralSveModel::init({2, 1, 2, 12}, 0), doctest::Contains("BadDims"), Error);
    CHECK_THROWS_AS(NeuralSveModel::init({1, 0, 12, 12}, 0), Error);
}

TEST_CASE("kernel table caches the 1-d nets") {
    const auto model = NeuralSveModel::init({1, 1, 12, 12}, 3);
    const TimeGrid grid = make_uniform_grid(5.0, 0.1);
    Tape tape(model.params().values());
    const KernelTable table = model.kernel_table(grid, tape);
    CHECK(table.g.size() == 51);
    CHECK(table.k_mu.size() - 1 == 50);
    CHECK(table.k_sigma.size() - 1 == 50);
    CHECK(table.net_evaluations == 2 * grid.n_steps());
    for (std::size_t k = 1; k <= 50; ++k) {
        CHECK(tape.scalar(table.k_mu[k]) == eval(model.k_mu_net(), model.params(), {grid.node(k)})[0]);
        CHECK(tape.scalar(table.k_sigma[k]) == eval(model.k_sigma_net(), model.params(), {grid.node(k)})[0]);
    }
    for (std::size_t i = 0; i <= 50; ++i)
        CHECK(tape.scalar(table.g[i]) == eval(model.nets().g, model.params(), {grid.node(i)})[0]);
}

TEST_CASE("forward matches the uncached double loop") {
    for (std::size_t m : {1u, 2u}) {
        const std::size_t d = m;
        const auto model = NeuralSveModel::init({d, m, 6, 5}, 17 + m);
        const TimeGrid grid = make_uniform_grid(2.0, 0.1);
        const BrownianPath noise = sample_brownian(grid, m, 5);
        const std::vector<double> xi(d, 1.5);
        const SamplePath got = nsve_forward(model, xi, noise);
        const SamplePath expect = reference_unroll(model, xi, noise);
        CHECK(got.values().size() == (grid.n_steps() + 1) * d);
        CHECK(max_abs_diff(got, expect) <= 1e-12 * (1.0 + max_abs_diff(expect, SamplePath(grid, d))));
    }
}

TEST_CASE("zero noise with pinned diffusion reduces to a deterministic Volterra recursion") {
    auto model = NeuralSveModel::init({1, 1, 4, 4}, 8);
    pin_to_constant(model.nets().diffusion, model.params(), 0.0);
    const TimeGrid grid = make_uniform_grid(1.0, 0.1);
    const BrownianPath still(grid, 1, std::vector<double>(grid.n_steps(), 0.0));
    const BrownianPath rough = sample_brownian(grid, 1, 77);
    const std::vector<double> xi = {0.7};
    const SamplePath a = nsve_forward(model, xi, still);
    const SamplePath b = nsve_forward(model, xi, rough);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a, reference_unroll(model, xi, still)) <= 1e-12);
}

TEST_CASE("unit kernels reproduce the neural SDE node for node") {
    const LatentDims dims{1, 1, 12, 12};
    auto sve = NeuralSveModel::init(dims, 21);
    const auto sde = NeuralSdeModel::init(dims, 21);
    pin_to_constant(sve.k_mu_net(), sve.params(), 1.0);
    pin_to_constant(sve.k_sigma_net(), sve.params(), 1.0);
    const TimeGrid grid = make_uniform_grid(5.0, 0.1);
    const BrownianPath noise = sample_brownian(grid, 1, 4);
    const std::vector<double> xi = {2.1};
    const SamplePath a = nsve_forward(sve, xi, noise);
    const SamplePath b = nsde_forward(sde, xi, noise);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("gradient through the unroll matches central differences") {
    auto model = NeuralSveModel::init({1, 1, 2, 2}, 31);
    const TimeGrid grid = make_uniform_grid(0.5, 0.1);
    REQUIRE(grid.n_steps() == 5);
    const BrownianPath noise = sample_brownian(grid, 1, 12);
    const std::vector<double> xi = {1.3};
    SamplePath target(grid, 1);
    for (std::size_t i = 0; i <= 5; ++i) target.at(i)[0] = 1.0 + 0.3 * std::sin(static_cast<double>(i));
    const auto build = [&](Tape& t) {
        const auto nodes = model.forward(xi, noise, t);
        return relative_l2_node(t, nodes, target);
    };
    CHECK(test_support::max_gradient_error(model.params(), build, 1e-6) < 1e-3);
}

TEST_CASE("non-finite unroll reports the node") {
    auto model = NeuralSveModel::init({1, 1, 2, 2}, 1);
    pin_to_constant(model.nets().g, model.params(), 1e308);
    pin_to_constant(model.nets().readout, model.params(), 0.0);
    model.params().values()[model.nets().readout.layers[0].weight_offset] = 10.0;
    const TimeGrid grid = make_uniform_grid(0.5, 0.1);
    const BrownianPath noise = sample_brownian(grid, 1, 1);
    const std::vector<double> xi = {1e10};
    try {
        nsve_forward(model, xi, noise);
        FAIL("expected NonFinitePath");
    } catch (const NonFinitePathError& e) {
        CHECK(e.node() == 0);
    }
}

TEST_CASE("dimension mismatch") {
    const auto model = NeuralSveModel::init({1, 1, 4, 4}, 1);
    const TimeGrid grid = make_uniform_grid(1.0, 0.1);
    const BrownianPath noise = sample_brownian(grid, 2, 1);
    const std::vector<double> xi = {1.0};
    CHECK_THROWS_AS(nsve_forward(model, xi, noise), Error);
}

TEST_CASE("the same model runs on any uniform grid") {
    const auto model = NeuralSveModel::init({1, 1, 12, 12}, 2);
    const std::vector<double> xi = {2.0};
    for (double dt : {0.2, 0.1, 0.05}) {
        const TimeGrid grid = make_uniform_grid(5.0, dt);
        const SamplePath p = nsve_forward(model, xi, sample_brownian(grid, 1, 3));
        CHECK(p.grid().n_nodes() == grid.n_nodes());
    }
}

TEST_CASE("model files round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "vnet_model_io_test";
    std::filesystem::create_directories(dir);
    const TimeGrid grid = make_uniform_grid(1.0, 0.1);
    const BrownianPath noise = sample_brownian(grid, 1, 9);
    const std::vector<double> xi = {2.0};

    const auto sve = NeuralSveModel::init({1, 1, 12, 12}, 5);
    save_model(sve, dir / "sve");
    const auto loaded = load_model(dir / "sve");
    CHECK(loaded->kind() == ModelKind::Nsve);
    CHECK(max_abs_diff(loaded->predict(xi, noise), sve.predict(xi, noise)) == 0.0);

    const auto sde = NeuralSdeModel::init({1, 1, 12, 12}, 5);
    save_model(sde, dir / "sde");
    CHECK(max_abs_diff(load_model(dir / "sde")->predict(xi, noise), sde.predict(xi, noise)) == 0.0);

    DeepOnetConfig cfg;
    cfg.hidden_width = 16;
    auto onet = DeepOnetModel::init(grid, 1, cfg, 5);
    onet.set_output_normalization(3.0, 2.0);
    save_model(onet, dir / "onet");
    const auto onet2 = load_model(dir / "onet");
    CHECK(onet2->kind() == ModelKind::DeepOnet);
    CHECK(max_abs_diff(onet2->predict(xi, noise), onet.predict(xi, noise)) == 0.0);

    const auto values = read_param_binary(dir / "sve.bin");
    CHECK(values.size() == sve.params().size());
    CHECK(std::filesystem::file_size(dir / "sve.bin") == 16 + 8 * values.size());

    CHECK_THROWS_AS(load_model(dir / "missing"), Error);
    std::filesystem::remove_all(dir);
}
