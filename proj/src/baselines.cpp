#include "volterra_net/baselines.hpp"

#include <cmath>

#include "volterra_net/errors.hpp"

namespace vnet {

NeuralSdeModel::NeuralSdeModel(const LatentDims& dims) : nets_(LatentNets::allocate(dims, params_)) {}

NeuralSdeModel NeuralSdeModel::init(const LatentDims& dims, std::uint64_t seed) {
    if (dims.d == 0 || dims.m == 0 || dims.d_h == 0 || dims.d_k == 0)
        throw Error(ErrorKind::BadDims, "all dimensions must be positive");
    if (dims.d_h <= dims.d) throw Error(ErrorKind::BadDims, "latent dimension d_h must exceed d");
    NeuralSdeModel model(dims);
    const Mlp* nets[] = {&model.nets_.lift, &model.nets_.readout, &model.nets_.g, &model.nets_.drift,
                         &model.nets_.diffusion};
    std::uint64_t stream = 0;
    for (const Mlp* net : nets) init_uniform_fan_in(*net, model.params_, seed, stream++);
    return model;
}

std::vector<Var> NeuralSdeModel::forward(std::span<const double> xi, const BrownianPath& noise, Tape& tape) const {
    const TimeGrid& grid = noise.grid();
    const std::size_t n = grid.n_steps();
    KernelTable table;
    table.g.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) table.g[i] = mlp_forward(nets_.g, tape.constant(grid.node(i)), tape);
    const Var one = tape.constant(1.0);
    table.k_mu.assign(n + 1, one);
    table.k_sigma.assign(n + 1, one);
    return unroll_latent(nets_, table, xi, noise, tape);
}

SamplePath NeuralSdeModel::predict(std::span<const double> xi, const BrownianPath& noise) const {
    Tape tape(params_.values());
    const auto nodes = forward(xi, noise, tape);
    return collect_path(tape, nodes, noise.grid(), nets_.dims.d);
}

SamplePath nsde_forward(const NeuralSdeModel& model, std::span<const double> xi, const BrownianPath& noise) {
    return model.predict(xi, noise);
}

namespace {

MlpSpec tower(std::size_t in, std::size_t width, std::size_t layers, std::size_t out) {
    MlpSpec spec;
    spec.widths.push_back(in);
    for (std::size_t l = 0; l < layers; ++l) spec.widths.push_back(width);
    spec.widths.push_back(out);
    return spec;
}

}  // namespace

DeepOnetModel::DeepOnetModel(const TimeGrid& grid, std::size_t m, const DeepOnetConfig& config)
    : grid_(grid),
      m_(m),
      config_(config),
      branch_(Mlp::allocate("branch",
                            tower(m * grid.n_nodes(), config.hidden_width, config.hidden_layers, config.basis + 1),
                            params_)),
      trunk_(Mlp::allocate("trunk", tower(1, config.hidden_width, config.hidden_layers, config.basis), params_)) {}

DeepOnetModel DeepOnetModel::init(const TimeGrid& grid, std::size_t m, const DeepOnetConfig& config,
                                  std::uint64_t seed) {
    if (m == 0 || config.hidden_width == 0 || config.basis == 0)
        throw Error(ErrorKind::BadDims, "DeepONet widths must be positive");
    DeepOnetModel model(grid, m, config);
    init_uniform_fan_in(model.branch_, model.params_, seed, 0);
    init_uniform_fan_in(model.trunk_, model.params_, seed, 1);
    return model;
}

void DeepOnetModel::set_output_normalization(double shift, double scale) {
    if (!(scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "output scale must be positive");
    shift_ = shift;
    scale_ = scale;
}

void DeepOnetModel::check_grid(const BrownianPath& noise) const {
    if (!(noise.grid() == grid_))
        throw Error(ErrorKind::GridMismatch, "DeepONet is bound to dt=" + std::to_string(grid_.dt()) + " with " +
                                                 std::to_string(grid_.n_steps()) + " steps");
    if (noise.dim() != m_) throw Error(ErrorKind::DimMismatch, "Brownian dimension differs from model m");
}

Var DeepOnetModel::branch(const BrownianPath& noise, Tape& tape) const {
    check_grid(noise);
    const auto path = noise.cumulative();
    return mlp_forward(branch_, tape.constant(path), tape);
}

Var DeepOnetModel::trunk(double t, Tape& tape) const { return mlp_forward(trunk_, tape.constant(t), tape); }

Var DeepOnetModel::combine(Var branch_out, Var trunk_out, Tape& tape) const {
    const std::size_t p = config_.basis;
    const Var coeffs = tape.slice(branch_out, 1, p);
    const Var bias = tape.slice(branch_out, 0, 1);
    return tape.add(tape.dot(coeffs, trunk_out), bias);
}

SamplePath DeepOnetModel::predict(std::span<const double>, const BrownianPath& noise) const {
    Tape tape(params_.values());
    const Var b = branch(noise, tape);
    SamplePath path(grid_, 1);
    for (std::size_t i = 0; i < grid_.n_nodes(); ++i) {
        const double y = denormalize(tape.scalar(combine(b, trunk(grid_.node(i), tape), tape)));
        if (!std::isfinite(y)) throw NonFinitePathError(i, "DeepONet evaluation");
        path.at(i)[0] = y;
    }
    return path;
}

double deeponet_forward(const DeepOnetModel& model, const BrownianPath& noise, double t) {
    if (!(t >= 0.0 && t <= model.grid().horizon() * (1.0 + 1e-12)))
        throw Error(ErrorKind::InvalidArgument, "evaluation time outside [0, T]");
    Tape tape(model.params().values());
    const Var b = model.branch(noise, tape);
    return model.denormalize(tape.scalar(model.combine(b, model.trunk(t, tape), tape)));
}

}  // namespace vnet
