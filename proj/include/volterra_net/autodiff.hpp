#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vnet {

struct ParamBlock {
    std::string name;
    std::size_t offset;
    std::size_t length;
};

/// Flat trainable storage shared by all networks of a model, with a parallel gradient array.
class ParamVector {
public:
    /// Reserves `length` zero-initialized entries and returns their offset.
    std::size_t allocate(std::string name, std::size_t length);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> grads() noexcept { return grads_; }
    std::span<const double> grads() const noexcept { return grads_; }
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
    const ParamBlock& block(const std::string& name) const;

    void zero_grad();
    /// Replaces values wholesale; the length and block table must already match.
    void assign(std::span<const double> values);

private:
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<ParamBlock> blocks_;
};

/// Handle to a node on a Tape.
struct Var {
    std::uint32_t id;
};

/// Affine map y = W x + b with W (rows x cols, row-major) and b stored in a ParamVector.
struct AffineParams {
    std::size_t weight_offset;
    std::size_t bias_offset;
    std::size_t rows;
    std::size_t cols;
};

/// Append-only record of vector-valued primitives. Nodes are created in
/// topological order, so one reverse sweep computes all adjoints.
class Tape {
public:
    explicit Tape(std::span<const double> params) : params_(params) {}

    Var constant(std::span<const double> value);
    Var constant(double value);

    Var affine(const AffineParams& layer, Var x);
    Var lipswish(Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    /// x * s for scalar node s.
    Var scale(Var x, Var s);
    Var scale(Var x, double c);
    Var concat(std::span<const Var> parts);
    /// sum_j coeffs[j] * weights[j] * vectors[j], weights are scalar nodes.
    Var weighted_sum(std::span<const Var> vectors, std::span<const Var> weights, std::span<const double> coeffs);
    /// (rows x cols matrix node, row-major) times a constant vector of length cols.
    Var contract(Var matrix, std::size_t rows, std::span<const double> vec);
    Var slice(Var x, std::size_t offset, std::size_t length);
    Var dot(Var a, Var b);
    Var sum_squares(Var x);
    Var sqrt(Var x);

    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    std::size_t length(Var v) const { return nodes_[v.id].length; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse sweep from a scalar node; parameter adjoints are added into `param_grads`.
    void backward(Var loss, std::span<double> param_grads) const;

private:
    enum class Op : std::uint8_t {
        Leaf, Affine, LipSwish, Add, Sub, Mul, Scale, ScaleConst, Concat,
        WeightedSum, Contract, Slice, Dot, SumSquares, Sqrt,
    };
    struct Node {
        Op op;
        std::uint32_t a;
        std::uint32_t b;
        std::size_t offset;  // into values_
        std::size_t length;
        std::size_t aux;  // into aux_idx_
        std::size_t aux_len;
        std::size_t aux_val;  // into aux_val_
        double c;
    };

    Var push(Op op, std::size_t length, std::uint32_t a = 0, std::uint32_t b = 0, double c = 0.0);
    double* out_ptr(Var v) { return values_.data() + nodes_[v.id].offset; }
    const double* ptr(std::uint32_t id) const { return values_.data() + nodes_[id].offset; }

    std::span<const double> params_;
    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<std::size_t> aux_idx_;
    std::vector<double> aux_val_;
};

}  // namespace vnet
