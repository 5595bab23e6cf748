#include "volterra_net/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "volterra_net/errors.hpp"
#include "volterra_net/mlp.hpp"

namespace vnet {

std::size_t ParamVector::allocate(std::string name, std::size_t length) {
    const std::size_t offset = values_.size();
    values_.resize(offset + length, 0.0);
    grads_.resize(offset + length, 0.0);
    blocks_.push_back({std::move(name), offset, length});
    return offset;
}

const ParamBlock& ParamVector::block(const std::string& name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw Error(ErrorKind::InvalidArgument, "no parameter block named " + name);
}

void ParamVector::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void ParamVector::assign(std::span<const double> values) {
    if (values.size() != values_.size())
        throw Error(ErrorKind::ShapeMismatch, "parameter count mismatch on assign");
    std::copy(values.begin(), values.end(), values_.begin());
}

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
    if (a != b) throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": operand lengths differ");
}

}  // namespace

Var Tape::push(Op op, std::size_t length, std::uint32_t a, std::uint32_t b, double c) {
    Node node{op, a, b, values_.size(), length, aux_idx_.size(), 0, aux_val_.size(), c};
    values_.resize(values_.size() + length);
    nodes_.push_back(node);
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(std::span<const double> value) {
    const Var v = push(Op::Leaf, value.size());
    std::copy(value.begin(), value.end(), out_ptr(v));
    return v;
}

Var Tape::constant(double value) { return constant(std::span<const double>(&value, 1)); }

Var Tape::affine(const AffineParams& layer, Var x) {
    require_same_length(length(x), layer.cols, "affine");
    const Var v = push(Op::Affine, layer.rows, x.id);
    nodes_.back().aux_len = 4;
    aux_idx_.insert(aux_idx_.end(), {layer.weight_offset, layer.bias_offset, layer.rows, layer.cols});
    const double* w = params_.data() + layer.weight_offset;
    const double* bias = params_.data() + layer.bias_offset;
    const double* in = ptr(x.id);
    double* out = out_ptr(v);
    for (std::size_t r = 0; r < layer.rows; ++r) {
        double acc = bias[r];
        const double* row = w + r * layer.cols;
        for (std::size_t c = 0; c < layer.cols; ++c) acc += row[c] * in[c];
        out[r] = acc;
    }
    return v;
}

Var Tape::lipswish(Var x) {
    const std::size_t n = length(x);
    const Var v = push(Op::LipSwish, n, x.id);
    const double* in = ptr(x.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < n; ++k) out[k] = vnet::lipswish(in[k]);
    return v;
}

Var Tape::add(Var a, Var b) {
    require_same_length(length(a), length(b), "add");
    const Var v = push(Op::Add, length(a), a.id, b.id);
    const double* x = ptr(a.id);
    const double* y = ptr(b.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = x[k] + y[k];
    return v;
}

Var Tape::sub(Var a, Var b) {
    require_same_length(length(a), length(b), "sub");
    const Var v = push(Op::Sub, length(a), a.id, b.id);
    const double* x = ptr(a.id);
    const double* y = ptr(b.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = x[k] - y[k];
    return v;
}

Var Tape::mul(Var a, Var b) {
    require_same_length(length(a), length(b), "mul");
    const Var v = push(Op::Mul, length(a), a.id, b.id);
    const double* x = ptr(a.id);
    const double* y = ptr(b.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = x[k] * y[k];
    return v;
}

Var Tape::scale(Var x, Var s) {
    require_same_length(length(s), 1, "scale");
    const Var v = push(Op::Scale, length(x), x.id, s.id);
    const double* in = ptr(x.id);
    const double f = *ptr(s.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = in[k] * f;
    return v;
}

Var Tape::scale(Var x, double c) {
    const Var v = push(Op::ScaleConst, length(x), x.id, 0, c);
    const double* in = ptr(x.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = in[k] * c;
    return v;
}

Var Tape::concat(std::span<const Var> parts) {
    std::size_t total = 0;
    for (Var p : parts) total += length(p);
    const Var v = push(Op::Concat, total);
    nodes_.back().aux_len = parts.size();
    for (Var p : parts) aux_idx_.push_back(p.id);
    double* out = out_ptr(v);
    for (Var p : parts) {
        const double* in = ptr(p.id);
        out = std::copy(in, in + length(p), out);
    }
    return v;
}

Var Tape::weighted_sum(std::span<const Var> vectors, std::span<const Var> weights, std::span<const double> coeffs) {
    if (vectors.empty() || weights.size() != vectors.size() || coeffs.size() != vectors.size())
        throw Error(ErrorKind::ShapeMismatch, "weighted_sum: operand lists must be non-empty and equal length");
    const std::size_t n = length(vectors[0]);
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        require_same_length(length(vectors[j]), n, "weighted_sum");
        require_same_length(length(weights[j]), 1, "weighted_sum weight");
    }
    const Var v = push(Op::WeightedSum, n);
    nodes_.back().aux_len = vectors.size();
    for (Var p : vectors) aux_idx_.push_back(p.id);
    for (Var w : weights) aux_idx_.push_back(w.id);
    aux_val_.insert(aux_val_.end(), coeffs.begin(), coeffs.end());
    double* out = out_ptr(v);
    std::fill(out, out + n, 0.0);
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        const double f = coeffs[j] * *ptr(weights[j].id);
        const double* in = ptr(vectors[j].id);
        for (std::size_t k = 0; k < n; ++k) out[k] += f * in[k];
    }
    return v;
}

Var Tape::contract(Var matrix, std::size_t rows, std::span<const double> vec) {
    require_same_length(length(matrix), rows * vec.size(), "contract");
    const Var v = push(Op::Contract, rows, matrix.id);
    nodes_.back().aux_len = vec.size();
    aux_val_.insert(aux_val_.end(), vec.begin(), vec.end());
    const double* mat = ptr(matrix.id);
    double* out = out_ptr(v);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < vec.size(); ++c) acc += mat[r * vec.size() + c] * vec[c];
        out[r] = acc;
    }
    return v;
}

Var Tape::slice(Var x, std::size_t offset, std::size_t len) {
    if (offset + len > length(x)) throw Error(ErrorKind::ShapeMismatch, "slice out of range");
    const Var v = push(Op::Slice, len, x.id);
    nodes_.back().aux = offset;
    const double* in = ptr(x.id) + offset;
    std::copy(in, in + len, out_ptr(v));
    return v;
}

Var Tape::dot(Var a, Var b) {
    require_same_length(length(a), length(b), "dot");
    const Var v = push(Op::Dot, 1, a.id, b.id);
    const double* x = ptr(a.id);
    const double* y = ptr(b.id);
    double acc = 0.0;
    for (std::size_t k = 0; k < length(a); ++k) acc += x[k] * y[k];
    *out_ptr(v) = acc;
    return v;
}

Var Tape::sum_squares(Var x) {
    const Var v = push(Op::SumSquares, 1, x.id);
    const double* in = ptr(x.id);
    double acc = 0.0;
    for (std::size_t k = 0; k < length(x); ++k) acc += in[k] * in[k];
    *out_ptr(v) = acc;
    return v;
}

Var Tape::sqrt(Var x) {
    const Var v = push(Op::Sqrt, length(x), x.id);
    const double* in = ptr(x.id);
    double* out = out_ptr(v);
    for (std::size_t k = 0; k < length(v); ++k) out[k] = std::sqrt(in[k]);
    return v;
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = nodes_[v.id];
    return std::span<const double>(values_).subspan(n.offset, n.length);
}

double Tape::scalar(Var v) const {
    if (length(v) != 1) throw Error(ErrorKind::NonScalarLoss, "node is not scalar");
    return *ptr(v.id);
}

void Tape::backward(Var loss, std::span<double> param_grads) const {
    if (loss.id >= nodes_.size()) throw Error(ErrorKind::InvalidArgument, "unknown loss node");
    if (length(loss) != 1) throw Error(ErrorKind::NonScalarLoss, "backward requires a scalar loss node");
    if (param_grads.size() != params_.size())
        throw Error(ErrorKind::ShapeMismatch, "gradient buffer length differs from parameter length");

    std::vector<double> adj(values_.size(), 0.0);
    adj[nodes_[loss.id].offset] = 1.0;

    for (std::size_t id = loss.id + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        const double* g = adj.data() + node.offset;
        const std::size_t n = node.length;
        auto grad_of = [&](std::uint32_t input) { return adj.data() + nodes_[input].offset; };

        switch (node.op) {
            case Op::Leaf:
                break;
            case Op::Affine: {
                const std::size_t w_off = aux_idx_[node.aux];
                const std::size_t b_off = aux_idx_[node.aux + 1];
                const std::size_t rows = aux_idx_[node.aux + 2];
                const std::size_t cols = aux_idx_[node.aux + 3];
                const double* w = params_.data() + w_off;
                const double* x = ptr(node.a);
                double* gx = grad_of(node.a);
                double* gw = param_grads.data() + w_off;
                double* gb = param_grads.data() + b_off;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double gr = g[r];
                    if (gr == 0.0) continue;
                    gb[r] += gr;
                    const double* wrow = w + r * cols;
                    double* gwrow = gw + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gwrow[c] += gr * x[c];
                        gx[c] += gr * wrow[c];
                    }
                }
                break;
            }
            case Op::LipSwish: {
                const double* x = ptr(node.a);
                double* gx = grad_of(node.a);
                for (std::size_t k = 0; k < n; ++k) gx[k] += g[k] * lipswish_derivative(x[k]);
                break;
            }
            case Op::Add: {
                double* ga = grad_of(node.a);
                double* gb = grad_of(node.b);
                for (std::size_t k = 0; k < n; ++k) {
                    ga[k] += g[k];
                    gb[k] += g[k];
                }
                break;
            }
            case Op::Sub: {
                double* ga = grad_of(node.a);
                double* gb = grad_of(node.b);
                for (std::size_t k = 0; k < n; ++k) {
                    ga[k] += g[k];
                    gb[k] -= g[k];
                }
                break;
            }
            case Op::Mul: {
                const double* x = ptr(node.a);
                const double* y = ptr(node.b);
                double* ga = grad_of(node.a);
                double* gb = grad_of(node.b);
                for (std::size_t k = 0; k < n; ++k) {
                    ga[k] += g[k] * y[k];
                    gb[k] += g[k] * x[k];
                }
                break;
            }
            case Op::Scale: {
                const double* x = ptr(node.a);
                const double f = *ptr(node.b);
                double* gx = grad_of(node.a);
                double gs = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    gx[k] += g[k] * f;
                    gs += g[k] * x[k];
                }
                *grad_of(node.b) += gs;
                break;
            }
            case Op::ScaleConst: {
                double* gx = grad_of(node.a);
                for (std::size_t k = 0; k < n; ++k) gx[k] += g[k] * node.c;
                break;
            }
            case Op::Concat: {
                const double* src = g;
                for (std::size_t p = 0; p < node.aux_len; ++p) {
                    const auto part = static_cast<std::uint32_t>(aux_idx_[node.aux + p]);
                    double* gp = grad_of(part);
                    const std::size_t len = nodes_[part].length;
                    for (std::size_t k = 0; k < len; ++k) gp[k] += src[k];
                    src += len;
                }
                break;
            }
            case Op::WeightedSum: {
                const std::size_t count = node.aux_len;
                for (std::size_t j = 0; j < count; ++j) {
                    const auto vec = static_cast<std::uint32_t>(aux_idx_[node.aux + j]);
                    const auto weight = static_cast<std::uint32_t>(aux_idx_[node.aux + count + j]);
                    const double coeff = aux_val_[node.aux_val + j];
                    const double w = *ptr(weight);
                    const double* x = ptr(vec);
                    double* gx = grad_of(vec);
                    const double f = coeff * w;
                    double gw = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        gx[k] += f * g[k];
                        gw += g[k] * x[k];
                    }
                    *grad_of(weight) += coeff * gw;
                }
                break;
            }
            case Op::Contract: {
                const std::size_t cols = node.aux_len;
                const double* vec = aux_val_.data() + node.aux_val;
                double* gm = grad_of(node.a);
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += g[r] * vec[c];
                break;
            }
            case Op::Slice: {
                double* gx = grad_of(node.a) + node.aux;
                for (std::size_t k = 0; k < n; ++k) gx[k] += g[k];
                break;
            }
            case Op::Dot: {
                const double* x = ptr(node.a);
                const double* y = ptr(node.b);
                double* ga = grad_of(node.a);
                double* gb = grad_of(node.b);
                const std::size_t len = nodes_[node.a].length;
                for (std::size_t k = 0; k < len; ++k) {
                    ga[k] += g[0] * y[k];
                    gb[k] += g[0] * x[k];
                }
                break;
            }
            case Op::SumSquares: {
                const double* x = ptr(node.a);
                double* gx = grad_of(node.a);
                const std::size_t len = nodes_[node.a].length;
                for (std::size_t k = 0; k < len; ++k) gx[k] += 2.0 * g[0] * x[k];
                break;
            }
            case Op::Sqrt: {
                const double* y = values_.data() + node.offset;
                double* gx = grad_of(node.a);
                for (std::size_t k = 0; k < n; ++k)
                    if (y[k] > 0.0) gx[k] += g[k] * 0.5 / y[k];
                break;
            }
        }
    }
}

}  // namespace vnet
