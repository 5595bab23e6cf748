#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace vnet {

/// Uniform discretization t_i = i * dt of [0, T].
class TimeGrid {
public:
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return dt_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
    double node(std::size_t i) const noexcept { return static_cast<double>(i) * dt_; }
    std::vector<double> nodes() const;

    // Grids are equal when they have the same step count and step size.
    bool operator==(const TimeGrid& other) const noexcept {
        return n_steps_ == other.n_steps_ && dt_ == other.dt_;
    }

private:
    friend TimeGrid make_uniform_grid(double horizon, double dt);
    TimeGrid(double horizon, double dt, std::size_t n_steps)
        : horizon_(horizon), dt_(dt), n_steps_(n_steps) {}

    double horizon_;
    double dt_;
    std::size_t n_steps_;
};

TimeGrid make_uniform_grid(double horizon, double dt);

/// Brownian increments dB_i = B(t_{i+1}) - B(t_i), stored n_steps x dim row-major.
class BrownianPath {
public:
    BrownianPath(TimeGrid grid, std::size_t dim, std::vector<double> increments);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> increments() const noexcept { return increments_; }
    std::span<const double> increment(std::size_t step) const noexcept {
        return std::span<const double>(increments_).subspan(step * dim_, dim_);
    }
    /// B(t_i) for i = 0..n_steps, (n_steps+1) x dim row-major, B(0) = 0.
    std::vector<double> cumulative() const;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> increments_;
};

/// A discretized trajectory: (n_steps+1) x dim values, row-major by node.
class SamplePath {
public:
    SamplePath(TimeGrid grid, std::size_t dim);
    SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> at(std::size_t node) const noexcept {
        return std::span<const double>(values_).subspan(node * dim_, dim_);
    }
    std::span<double> at(std::size_t node) noexcept {
        return std::span<double>(values_).subspan(node * dim_, dim_);
    }

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> values_;
};

// Per-sample random streams. A stream is keyed by (seed, index, channel) so that
// results do not depend on generation order or thread count.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t channel = 0);
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, std::uint64_t channel = 0);

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim, std::uint64_t seed);
BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim, std::mt19937_64& engine);

/// Sums each block of `factor` consecutive increments onto a grid with dt' = factor * dt.
BrownianPath coarsen_brownian(const BrownianPath& path, std::size_t factor);

/// Discrete L2([0,T]) norm: sqrt(sum_k |y(t_k)|^2 dt), initial node included.
double path_l2_norm(const SamplePath& path);
double relative_l2(const SamplePath& pred, const SamplePath& target);
double mean_relative_l2(std::span<const SamplePath> pred, std::span<const SamplePath> target);

struct PathRecord {
    std::vector<double> xi;
    BrownianPath noise;
    SamplePath path;
};

struct PathDataset {
    TimeGrid grid;
    std::vector<PathRecord> records;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;

    std::vector<PathRecord> train_split() const;
    std::vector<PathRecord> test_split() const;
};

/// First round(0.8 n) indices train, the rest test.
void assign_split(PathDataset& dataset);

void write_csv(const SamplePath& path, const std::filesystem::path& file);
void write_csv(const BrownianPath& path, const std::filesystem::path& file);
SamplePath read_sample_path_csv(const std::filesystem::path& file);

}  // namespace vnet
