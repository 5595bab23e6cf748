#include "volterra_net/mlp.hpp"

#include <random>

#include "volterra_net/core_paths.hpp"
#include "volterra_net/errors.hpp"

namespace vnet {

std::size_t MlpSpec::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) total += widths[l] * widths[l + 1] + widths[l + 1];
    return total;
}

Mlp Mlp::allocate(std::string name, MlpSpec spec, ParamVector& params) {
    if (spec.widths.size() < 2) throw Error(ErrorKind::InvalidArgument, "MLP needs at least one layer");
    for (std::size_t w : spec.widths)
        if (w == 0) throw Error(ErrorKind::InvalidArgument, "MLP layer widths must be positive");
    Mlp net{std::move(spec), {}};
    for (std::size_t l = 0; l < net.spec.n_layers(); ++l) {
        const std::size_t in = net.spec.widths[l];
        const std::size_t out = net.spec.widths[l + 1];
        const std::string prefix = name + "." + std::to_string(l);
        const std::size_t w = params.allocate(prefix + ".w", in * out);
        const std::size_t b = params.allocate(prefix + ".b", out);
        net.layers.push_back({w, b, out, in});
    }
    return net;
}

void init_uniform_fan_in(const Mlp& net, ParamVector& params, std::uint64_t seed, std::uint64_t stream) {
    auto engine = make_engine(seed, stream, 0x1417);
    auto values = params.values();
    for (const auto& layer : net.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.cols));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        for (std::size_t k = 0; k < layer.rows * layer.cols; ++k) values[layer.weight_offset + k] = uniform(engine);
        for (std::size_t k = 0; k < layer.rows; ++k) values[layer.bias_offset + k] = uniform(engine);
    }
}

Var mlp_forward(const Mlp& net, Var x, Tape& tape) {
    if (tape.length(x) != net.spec.input_width())
        throw Error(ErrorKind::ShapeMismatch, "MLP input has length " + std::to_string(tape.length(x)) +
                                                  ", expected " + std::to_string(net.spec.input_width()));
    Var h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        h = tape.affine(net.layers[l], h);
        if (l + 1 < net.layers.size() && net.spec.hidden == Activation::LipSwish) h = tape.lipswish(h);
    }
    return h;
}

std::vector<double> mlp_eval(const Mlp& net, std::span<const double> params, std::span<const double> x) {
    if (x.size() != net.spec.input_width()) throw Error(ErrorKind::ShapeMismatch, "MLP input has wrong length");
    std::vector<double> h(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        next.assign(layer.rows, 0.0);
        for (std::size_t r = 0; r < layer.rows; ++r) {
            double acc = params[layer.bias_offset + r];
            for (std::size_t c = 0; c < layer.cols; ++c) acc += params[layer.weight_offset + r * layer.cols + c] * h[c];
            next[r] = (l + 1 < net.layers.size() && net.spec.hidden == Activation::LipSwish) ? lipswish(acc) : acc;
        }
        h.swap(next);
    }
    return h;
}

}  // namespace vnet
