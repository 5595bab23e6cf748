#include "volterra_net/core_paths.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "volterra_net/errors.hpp"

namespace vnet {

namespace {

// Relative slack allowed between T/dt and the nearest integer.
constexpr double kGridRatioTolerance = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::ofstream open_for_write(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + file.string() + " for writing");
    out << std::setprecision(17);
    return out;
}

}  // namespace

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> out(n_nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
    return out;
}

TimeGrid make_uniform_grid(double horizon, double dt) {
    if (!(horizon > 0.0) || !(dt > 0.0))
        throw Error(ErrorKind::NonPositiveInput, "grid requires T > 0 and dt > 0");
    const double ratio = horizon / dt;
    const double steps = std::round(ratio);
    if (steps < 1.0 || std::abs(ratio - steps) > kGridRatioTolerance * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "T/dt = " << ratio << " is not an integer";
        throw Error(ErrorKind::IncommensurateGrid, msg.str());
    }
    return TimeGrid(horizon, dt, static_cast<std::size_t>(steps));
}

BrownianPath::BrownianPath(TimeGrid grid, std::size_t dim, std::vector<double> increments)
    : grid_(grid), dim_(dim), increments_(std::move(increments)) {
    if (dim_ == 0) throw Error(ErrorKind::InvalidArgument, "Brownian dimension must be positive");
    if (increments_.size() != grid_.n_steps() * dim_)
        throw Error(ErrorKind::ShapeMismatch, "increment array does not match grid and dimension");
}

std::vector<double> BrownianPath::cumulative() const {
    std::vector<double> out(grid_.n_nodes() * dim_, 0.0);
    for (std::size_t i = 0; i < grid_.n_steps(); ++i)
        for (std::size_t c = 0; c < dim_; ++c)
            out[(i + 1) * dim_ + c] = out[i * dim_ + c] + increments_[i * dim_ + c];
    return out;
}

SamplePath::SamplePath(TimeGrid grid, std::size_t dim)
    : grid_(grid), dim_(dim), values_(grid.n_nodes() * dim, 0.0) {}

SamplePath::SamplePath(TimeGrid grid, std::size_t dim, std::vector<double> values)
    : grid_(grid), dim_(dim), values_(std::move(values)) {
    if (values_.size() != grid_.n_nodes() * dim_)
        throw Error(ErrorKind::ShapeMismatch, "value array does not match grid and dimension");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t channel) {
    return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (channel * 0xd1b54a32d192ed03ULL));
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, std::uint64_t channel) {
    const std::uint64_t key = derive_seed(seed, index, channel);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(channel)};
    return std::mt19937_64(seq);
}

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim, std::mt19937_64& engine) {
    if (dim == 0) throw Error(ErrorKind::InvalidArgument, "Brownian dimension must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt()));
    std::vector<double> inc(grid.n_steps() * dim);
    for (double& v : inc) v = normal(engine);
    return BrownianPath(grid, dim, std::move(inc));
}

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t dim, std::uint64_t seed) {
    auto engine = make_engine(seed, 0);
    return sample_brownian(grid, dim, engine);
}

BrownianPath coarsen_brownian(const BrownianPath& path, std::size_t factor) {
    const auto& grid = path.grid();
    if (factor == 0 || grid.n_steps() % factor != 0)
        throw Error(ErrorKind::IndivisibleFactor,
                    "factor " + std::to_string(factor) + " does not divide " + std::to_string(grid.n_steps()));
    if (factor == 1) return path;
    const TimeGrid coarse = make_uniform_grid(grid.horizon(), grid.dt() * static_cast<double>(factor));
    const std::size_t m = path.dim();
    std::vector<double> inc(coarse.n_steps() * m, 0.0);
    for (std::size_t i = 0; i < coarse.n_steps(); ++i)
        for (std::size_t k = 0; k < factor; ++k) {
            const auto fine = path.increment(i * factor + k);
            for (std::size_t c = 0; c < m; ++c) inc[i * m + c] += fine[c];
        }
    return BrownianPath(coarse, m, std::move(inc));
}

double path_l2_norm(const SamplePath& path) {
    double sum = 0.0;
    for (double v : path.values()) sum += v * v;
    return std::sqrt(sum * path.grid().dt());
}

double relative_l2(const SamplePath& pred, const SamplePath& target) {
    if (!(pred.grid() == target.grid()) || pred.dim() != target.dim())
        throw Error(ErrorKind::ShapeMismatch, "prediction and target differ in grid or dimension");
    const double denom = path_l2_norm(target);
    if (!(denom >= 1e-12)) throw Error(ErrorKind::ZeroTargetNorm, "target path norm below 1e-12");
    double sum = 0.0;
    const auto p = pred.values();
    const auto t = target.values();
    for (std::size_t k = 0; k < p.size(); ++k) sum += (p[k] - t[k]) * (p[k] - t[k]);
    return std::sqrt(sum * pred.grid().dt()) / denom;
}

double mean_relative_l2(std::span<const SamplePath> pred, std::span<const SamplePath> target) {
    if (pred.empty() || pred.size() != target.size())
        throw Error(ErrorKind::ShapeMismatch, "prediction and target lists must be non-empty and equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) total += relative_l2(pred[i], target[i]);
    return total / static_cast<double>(pred.size());
}

std::vector<PathRecord> PathDataset::train_split() const {
    std::vector<PathRecord> out;
    out.reserve(train_indices.size());
    for (std::size_t i : train_indices) out.push_back(records[i]);
    return out;
}

std::vector<PathRecord> PathDataset::test_split() const {
    std::vector<PathRecord> out;
    out.reserve(test_indices.size());
    for (std::size_t i : test_indices) out.push_back(records[i]);
    return out;
}

void assign_split(PathDataset& dataset) {
    const std::size_t n = dataset.records.size();
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    dataset.train_indices.clear();
    dataset.test_indices.clear();
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? dataset.train_indices : dataset.test_indices).push_back(i);
}

void write_csv(const SamplePath& path, const std::filesystem::path& file) {
    auto out = open_for_write(file);
    out << 't';
    for (std::size_t c = 1; c <= path.dim(); ++c) out << ",x" << c;
    out << '\n';
    for (std::size_t i = 0; i < path.grid().n_nodes(); ++i) {
        out << path.grid().node(i);
        for (double v : path.at(i)) out << ',' << v;
        out << '\n';
    }
}

// Row i holds B(t_i) - B(t_{i-1}); row 0 is all zeros so every node has a row.
void write_csv(const BrownianPath& path, const std::filesystem::path& file) {
    auto out = open_for_write(file);
    out << 't';
    for (std::size_t c = 1; c <= path.dim(); ++c) out << ",db" << c;
    out << '\n';
    for (std::size_t i = 0; i < path.grid().n_nodes(); ++i) {
        out << path.grid().node(i);
        for (std::size_t c = 0; c < path.dim(); ++c) out << ',' << (i == 0 ? 0.0 : path.increment(i - 1)[c]);
        out << '\n';
    }
}

SamplePath read_sample_path_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + file.string());
    std::string line;
    std::getline(in, line);
    std::size_t dim = 0;
    for (char ch : line) dim += (ch == ',');
    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        times.push_back(std::stod(cell));
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    }
    if (times.size() < 2 || dim == 0 || values.size() != times.size() * dim)
        throw Error(ErrorKind::IoError, "malformed path CSV " + file.string());
    const double dt = times[1] - times[0];
    const TimeGrid grid = make_uniform_grid(static_cast<double>(times.size() - 1) * dt, dt);
    return SamplePath(grid, dim, std::move(values));
}

}  // namespace vnet
