#include "volterra_net/neural_sve.hpp"

#include <cmath>

#include "volterra_net/errors.hpp"

namespace vnet {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Nsve: return "nsve";
        case ModelKind::Nsde: return "nsde";
        case ModelKind::DeepOnet: return "deeponet";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "nsve") return ModelKind::Nsve;
    if (name == "nsde") return ModelKind::Nsde;
    if (name == "deeponet") return ModelKind::DeepOnet;
    throw Error(ErrorKind::ValidationError, "unknown model kind '" + std::string(name) + "'");
}

LatentNets LatentNets::allocate(const LatentDims& dims, ParamVector& params) {
    const std::size_t d = dims.d, m = dims.m, dh = dims.d_h, dk = dims.d_k;
    return LatentNets{
        dims,
        Mlp::allocate("lift", {{d, dh}}, params),
        Mlp::allocate("readout", {{dh, d}}, params),
        Mlp::allocate("g", {{1, dk, dk, 1}}, params),
        Mlp::allocate("drift", {{1 + dh, dh, dh}}, params),
        Mlp::allocate("diffusion", {{1 + dh, dh * m, dh * m}}, params),
    };
}

std::vector<Var> unroll_latent(const LatentNets& nets, const KernelTable& table, std::span<const double> xi,
                               const BrownianPath& noise, Tape& tape) {
    const LatentDims& dims = nets.dims;
    if (noise.dim() != dims.m) throw Error(ErrorKind::DimMismatch, "Brownian dimension differs from model m");
    if (xi.size() != dims.d) throw Error(ErrorKind::DimMismatch, "initial condition has wrong dimension");
    const TimeGrid& grid = noise.grid();
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    if (table.g.size() != n + 1 || table.k_mu.size() != n + 1 || table.k_sigma.size() != n + 1)
        throw Error(ErrorKind::GridMismatch, "kernel table built for a different grid");

    const Var z0 = mlp_forward(nets.lift, tape.constant(xi), tape);

    std::vector<Var> out(n + 1);
    std::vector<Var> drift(n);
    std::vector<Var> shock(n);
    std::vector<Var> vecs;
    std::vector<Var> weights;
    std::vector<double> coeffs;
    vecs.reserve(2 * n + 1);
    weights.reserve(2 * n + 1);
    coeffs.reserve(2 * n + 1);

    for (std::size_t i = 0; i <= n; ++i) {
        vecs.assign(1, z0);
        weights.assign(1, table.g[i]);
        coeffs.assign(1, 1.0);
        for (std::size_t j = 0; j < i; ++j) {
            vecs.push_back(drift[j]);
            weights.push_back(table.k_mu[i - j]);
            coeffs.push_back(dt);
        }
        for (std::size_t j = 0; j < i; ++j) {
            vecs.push_back(shock[j]);
            weights.push_back(table.k_sigma[i - j]);
            coeffs.push_back(1.0);
        }
        const Var z = tape.weighted_sum(vecs, weights, coeffs);
        out[i] = mlp_forward(nets.readout, z, tape);
        if (i == n) break;

        const Var parts[] = {tape.constant(grid.node(i)), z};
        const Var input = tape.concat(parts);
        drift[i] = mlp_forward(nets.drift, input, tape);
        const Var sigma = mlp_forward(nets.diffusion, input, tape);
        shock[i] = tape.contract(sigma, dims.d_h, noise.increment(i));
    }
    return out;
}

SamplePath collect_path(const Tape& tape, std::span<const Var> nodes, const TimeGrid& grid, std::size_t dim) {
    if (nodes.size() != grid.n_nodes()) throw Error(ErrorKind::GridMismatch, "node count differs from grid");
    SamplePath path(grid, dim);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto v = tape.value(nodes[i]);
        auto dst = path.at(i);
        for (std::size_t r = 0; r < dim; ++r) {
            if (!std::isfinite(v[r])) throw NonFinitePathError(i, "model unroll");
            dst[r] = v[r];
        }
    }
    return path;
}

NeuralSveModel::NeuralSveModel(const LatentDims& dims)
    : nets_(LatentNets::allocate(dims, params_)),
      k_mu_(Mlp::allocate("k_mu", {{1, dims.d_k, dims.d_k, 1}}, params_)),
      k_sigma_(Mlp::allocate("k_sigma", {{1, dims.d_k, dims.d_k, 1}}, params_)) {}

NeuralSveModel NeuralSveModel::init(const LatentDims& dims, std::uint64_t seed) {
    if (dims.d == 0 || dims.m == 0 || dims.d_h == 0 || dims.d_k == 0)
        throw Error(ErrorKind::BadDims, "all dimensions must be positive");
    if (dims.d_h <= dims.d) throw Error(ErrorKind::BadDims, "latent dimension d_h must exceed d");
    NeuralSveModel model(dims);
    const Mlp* nets[] = {&model.nets_.lift,  &model.nets_.readout, &model.nets_.g,    &model.nets_.drift,
                         &model.nets_.diffusion, &model.k_mu_,     &model.k_sigma_};
    std::uint64_t stream = 0;
    for (const Mlp* net : nets) init_uniform_fan_in(*net, model.params_, seed, stream++);
    return model;
}

KernelTable NeuralSveModel::kernel_table(const TimeGrid& grid, Tape& tape) const {
    const std::size_t n = grid.n_steps();
    KernelTable table;
    table.g.resize(n + 1);
    table.k_mu.resize(n + 1);
    table.k_sigma.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) table.g[i] = mlp_forward(nets_.g, tape.constant(grid.node(i)), tape);
    table.k_mu[0] = table.k_sigma[0] = table.g[0];  // never read: lags start at dt
    for (std::size_t k = 1; k <= n; ++k) {
        const Var lag = tape.constant(grid.node(k));
        table.k_mu[k] = mlp_forward(k_mu_, lag, tape);
        table.k_sigma[k] = mlp_forward(k_sigma_, lag, tape);
        table.net_evaluations += 2;
    }
    return table;
}

std::vector<Var> NeuralSveModel::forward(std::span<const double> xi, const BrownianPath& noise, Tape& tape) const {
    const KernelTable table = kernel_table(noise.grid(), tape);
    return unroll_latent(nets_, table, xi, noise, tape);
}

SamplePath NeuralSveModel::predict(std::span<const double> xi, const BrownianPath& noise) const {
    Tape tape(params_.values());
    const auto nodes = forward(xi, noise, tape);
    return collect_path(tape, nodes, noise.grid(), nets_.dims.d);
}

SamplePath nsve_forward(const NeuralSveModel& model, std::span<const double> xi, const BrownianPath& noise) {
    return model.predict(xi, noise);
}

}  // namespace vnet
