#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "volterra_net/neural_sve.hpp"

namespace vnet {

/// Neural SDE: the neural SVE recursion with both kernels fixed to 1.
class NeuralSdeModel : public PathModel {
public:
    /// Same dimension rules as the neural SVE; d_k sizes the g network.
    static NeuralSdeModel init(const LatentDims& dims, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::Nsde; }
    std::size_t dim() const override { return nets_.dims.d; }
    std::size_t noise_dim() const override { return nets_.dims.m; }
    SamplePath predict(std::span<const double> xi, const BrownianPath& noise) const override;

    const LatentDims& dims() const noexcept { return nets_.dims; }
    const LatentNets& nets() const noexcept { return nets_; }
    ParamVector& params() noexcept { return params_; }
    const ParamVector& params() const noexcept { return params_; }

    std::vector<Var> forward(std::span<const double> xi, const BrownianPath& noise, Tape& tape) const;

private:
    explicit NeuralSdeModel(const LatentDims& dims);

    ParamVector params_;
    LatentNets nets_;
};

SamplePath nsde_forward(const NeuralSdeModel& model, std::span<const double> xi, const BrownianPath& noise);

struct DeepOnetConfig {
    std::size_t hidden_width = 128;
    std::size_t hidden_layers = 3;
    std::size_t basis = 64;  // p
    double learning_rate = 1e-3;
};

/// DeepONet(W)(t) = shift + scale * (sum_k b_k t_k + b_0), with (b_0..b_p) from the branch
/// net on the cumulative Brownian path and (t_1..t_p) from the trunk net on t.
/// shift/scale default to 0/1 and are fitted to the training targets by `train`.
class DeepOnetModel : public PathModel {
public:
    static DeepOnetModel init(const TimeGrid& grid, std::size_t m, const DeepOnetConfig& config, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::DeepOnet; }
    std::size_t dim() const override { return 1; }
    std::size_t noise_dim() const override { return m_; }
    /// `xi` is ignored: the operator sees only the driving path.
    SamplePath predict(std::span<const double> xi, const BrownianPath& noise) const override;

    const TimeGrid& grid() const noexcept { return grid_; }
    const DeepOnetConfig& config() const noexcept { return config_; }
    const Mlp& branch_net() const noexcept { return branch_; }
    const Mlp& trunk_net() const noexcept { return trunk_; }
    ParamVector& params() noexcept { return params_; }
    const ParamVector& params() const noexcept { return params_; }
    double output_shift() const noexcept { return shift_; }
    double output_scale() const noexcept { return scale_; }
    void set_output_normalization(double shift, double scale);

    /// Throws GridMismatch unless the path lives on the bound grid.
    void check_grid(const BrownianPath& noise) const;
    Var branch(const BrownianPath& noise, Tape& tape) const;
    Var trunk(double t, Tape& tape) const;
    /// Scalar node: sum_k b_k t_k + b_0, before output normalization.
    Var combine(Var branch_out, Var trunk_out, Tape& tape) const;
    double denormalize(double raw) const noexcept { return shift_ + scale_ * raw; }

private:
    DeepOnetModel(const TimeGrid& grid, std::size_t m, const DeepOnetConfig& config);

    TimeGrid grid_;
    std::size_t m_;
    DeepOnetConfig config_;
    ParamVector params_;
    Mlp branch_;
    Mlp trunk_;
    double shift_ = 0.0;
    double scale_ = 1.0;
};

/// Single-time evaluation; returns the d = 1 output value.
double deeponet_forward(const DeepOnetModel& model, const BrownianPath& noise, double t);

}  // namespace vnet
