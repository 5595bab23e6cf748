#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "volterra_net/autodiff.hpp"
#include "volterra_net/mlp.hpp"
#include "volterra_net/path_model.hpp"

namespace vnet {

struct LatentDims {
    std::size_t d;    // data dimension
    std::size_t m;    // noise dimension
    std::size_t d_h;  // latent dimension
    std::size_t d_k;  // hidden width of the 1-d networks g, K_mu, K_sigma
};

/// The networks shared by the neural SVE and the neural SDE.
struct LatentNets {
    LatentDims dims;
    Mlp lift;     // d -> d_h, linear
    Mlp readout;  // d_h -> d, linear
    Mlp g;        // 1 -> d_k -> d_k -> 1
    Mlp drift;    // 1 + d_h -> d_h -> d_h
    Mlp diffusion;  // 1 + d_h -> d_h m -> d_h m, reshaped row-major to d_h x m

    static LatentNets allocate(const LatentDims& dims, ParamVector& params);
};

/// Tape nodes for g at every grid node and the kernels at every lag k dt, k = 1..n.
/// Index 0 of the kernel arrays is unused; net_evaluations counts 1-d kernel-net calls.
struct KernelTable {
    std::vector<Var> g;
    std::vector<Var> k_mu;
    std::vector<Var> k_sigma;
    std::size_t net_evaluations = 0;
};

/// Z_i = Z_0 g_i + sum_{j<i} k_mu[i-j] mu(t_j, Z_j) dt + sum_{j<i} k_sigma[i-j] sigma(t_j, Z_j) dB_j,
/// X_i = readout(Z_i). Returns one tape node per grid node.
std::vector<Var> unroll_latent(const LatentNets& nets, const KernelTable& table, std::span<const double> xi,
                               const BrownianPath& noise, Tape& tape);

/// Copies unrolled node values into a path; throws NonFinitePathError on the first bad node.
SamplePath collect_path(const Tape& tape, std::span<const Var> nodes, const TimeGrid& grid, std::size_t dim);

class NeuralSveModel : public PathModel {
public:
    /// Requires d_h > d and all dimensions positive.
    static NeuralSveModel init(const LatentDims& dims, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::Nsve; }
    std::size_t dim() const override { return nets_.dims.d; }
    std::size_t noise_dim() const override { return nets_.dims.m; }
    SamplePath predict(std::span<const double> xi, const BrownianPath& noise) const override;

    const LatentDims& dims() const noexcept { return nets_.dims; }
    const LatentNets& nets() const noexcept { return nets_; }
    const Mlp& k_mu_net() const noexcept { return k_mu_; }
    const Mlp& k_sigma_net() const noexcept { return k_sigma_; }
    ParamVector& params() noexcept { return params_; }
    const ParamVector& params() const noexcept { return params_; }

    KernelTable kernel_table(const TimeGrid& grid, Tape& tape) const;
    std::vector<Var> forward(std::span<const double> xi, const BrownianPath& noise, Tape& tape) const;

private:
    explicit NeuralSveModel(const LatentDims& dims);

    ParamVector params_;
    LatentNets nets_;
    Mlp k_mu_;
    Mlp k_sigma_;
};

/// Full-path forward on a fresh tape; the returned path holds X at every node.
SamplePath nsve_forward(const NeuralSveModel& model, std::span<const double> xi, const BrownianPath& noise);

}  // namespace vnet
