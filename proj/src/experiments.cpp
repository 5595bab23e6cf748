#include "volterra_net/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "volterra_net/adam.hpp"
#include "volterra_net/errors.hpp"
#include "volterra_net/parallel.hpp"

namespace vnet {

namespace {

// Stream channels of make_engine, one per independent use of a (seed, index) key.
constexpr std::uint64_t kXiChannel = 1;
constexpr std::uint64_t kNoiseChannel = 2;
constexpr std::uint64_t kShuffleChannel = 3;

constexpr double kDivergenceThreshold = 1e6;

SveProblem make_problem(std::size_t d, TimeFn g, Kernel k, CoefficientFn mu, CoefficientFn sigma) {
    return SveProblem{d, sigma.cols(), std::move(g), k, k, std::move(mu), std::move(sigma)};
}

void check_dims(const PathModel& model, std::span<const PathRecord> records) {
    for (const auto& r : records) {
        if (r.xi.size() != model.dim() || r.path.dim() != model.dim() || r.noise.dim() != model.noise_dim())
            throw Error(ErrorKind::DimMismatch, "dataset dimensions do not match the model");
    }
}

void check_loss(double loss, std::size_t epoch) {
    if (!std::isfinite(loss) || loss > kDivergenceThreshold) {
        std::ostringstream msg;
        msg << "batch loss " << loss << " in epoch " << epoch;
        throw Error(ErrorKind::DivergedLoss, msg.str());
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto engine = make_engine(seed, epoch, kShuffleChannel);
    std::shuffle(order.begin(), order.end(), engine);
    return order;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Shared minibatch Adam loop for the neural SVE and neural SDE.
template <class Model>
LossReport train_recurrent(Model& model, std::span<const PathRecord> records, const TrainConfig& cfg) {
    validate(cfg, records.size());
    check_dims(model, records);
    const auto start = std::chrono::steady_clock::now();

    ParamVector& params = model.params();
    const std::size_t n_params = params.size();
    AdamState adam(n_params, cfg.learning_rate);
    std::vector<double> sample_grads(cfg.batch_size * n_params);
    std::vector<double> sample_losses(cfg.batch_size);

    LossReport report;
    report.objective = "mean_relative_l2";
    report.seed = cfg.seed;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        adam.learning_rate = scheduled_learning_rate(cfg, epoch);
        const auto order = epoch_order(records.size(), cfg.seed, epoch);
        double epoch_sum = 0.0;

        for (std::size_t first = 0; first < records.size(); first += cfg.batch_size) {
            const std::size_t batch = std::min(cfg.batch_size, records.size() - first);
            std::fill(sample_grads.begin(), sample_grads.begin() + batch * n_params, 0.0);

            parallel_for(batch, [&](std::size_t k) {
                const std::size_t idx = order[first + k];
                const PathRecord& rec = records[idx];
                Tape tape(params.values());
                const auto nodes = model.forward(rec.xi, rec.noise, tape);
                const Var loss = relative_l2_node(tape, nodes, rec.path);
                const double value = tape.scalar(loss);
                if (!std::isfinite(value)) {
                    std::ostringstream ctx;
                    ctx << "training epoch " << epoch << ", sample " << idx;
                    collect_path(tape, nodes, rec.noise.grid(), model.dim());  // throws with node index
                    throw Error(ErrorKind::NonFinitePath, ctx.str() + ": loss is not finite");
                }
                sample_losses[k] = value;
                tape.backward(loss, std::span<double>(sample_grads).subspan(k * n_params, n_params));
            });

            auto grad = params.grads();
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_sum = 0.0;
            for (std::size_t k = 0; k < batch; ++k) {
                const double* g = sample_grads.data() + k * n_params;
                for (std::size_t p = 0; p < n_params; ++p) grad[p] += g[p];
                batch_sum += sample_losses[k];
            }
            const double inv = 1.0 / static_cast<double>(batch);
            for (double& g : grad) g *= inv;
            check_loss(batch_sum * inv, epoch);
            adam_step(adam, params);
            epoch_sum += batch_sum;
        }
        const double epoch_loss = epoch_sum / static_cast<double>(records.size());
        report.epochs.push_back({epoch, adam.learning_rate, epoch_loss});
        if (cfg.on_epoch) cfg.on_epoch(epoch, adam.learning_rate, epoch_loss);
    }
    report.final_train_objective = report.epochs.empty() ? 0.0 : report.epochs.back().train_loss;
    report.wall_seconds = elapsed_seconds(start);
    return report;
}

}  // namespace

std::vector<double> InitialLaw::sample(std::mt19937_64& engine) const {
    if (kind == Kind::Deterministic) return mean;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(mean.size());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = mean[r] + spread * normal(engine);
    return out;
}

std::string InitialLaw::describe() const {
    std::ostringstream out;
    out << (kind == Kind::Normal ? "normal(mean=" : "deterministic(");
    for (std::size_t r = 0; r < mean.size(); ++r) out << (r ? "," : "") << mean[r];
    if (kind == Kind::Normal) out << "; sd=" << spread;
    out << ")";
    return out.str();
}

bool ExperimentSpec::supports(ModelKind kind) const {
    return std::find(model_kinds.begin(), model_kinds.end(), kind) != model_kinds.end();
}

ExperimentSpec make_experiment(Benchmark id) {
    const std::vector<ModelKind> all = {ModelKind::Nsve, ModelKind::Nsde, ModelKind::DeepOnet};
    switch (id) {
        case Benchmark::Pendulum:
            return {id, "pendulum",
                    make_problem(1, TimeFn::one(), Kernel::linear_lag(), CoefficientFn::identity_drift(1),
                                 CoefficientFn::identity_diffusion(1)),
                    InitialLaw::normal({2.0}, 0.2), 5.0, 0.1, all};
        case Benchmark::Ou1d:
            return {id, "ou1d",
                    make_problem(1, TimeFn::exp_decay(1.0), Kernel::exponential(1.0), CoefficientFn::identity_drift(1),
                                 CoefficientFn::sqrt_abs_diffusion(1)),
                    InitialLaw::normal({2.0}, 0.2), 5.0, 0.1, all};
        case Benchmark::Ou2d:
            return {id, "ou2d",
                    make_problem(2, TimeFn::exp_decay(1.0), Kernel::exponential(1.0), CoefficientFn::identity_drift(2),
                                 CoefficientFn::sqrt_abs_diffusion(2)),
                    InitialLaw::deterministic({2.0, 2.0}), 5.0, 0.1, {ModelKind::Nsve}};
        case Benchmark::RoughHeston:
            return {id, "rough_heston",
                    make_problem(1, TimeFn::one(), Kernel::power_gamma(0.4), CoefficientFn::affine_reversion(2.0, 1),
                                 CoefficientFn::sqrt_abs_diffusion(1)),
                    InitialLaw::normal({2.0}, 0.2), 5.0, 0.1, all};
        case Benchmark::PathDependent:
            return {id, "path_dependent",
                    make_problem(1, TimeFn::one(), Kernel::piecewise_sign(5.0 / 4.0),
                                 CoefficientFn::affine_reversion(2.0, 1), CoefficientFn::sqrt_abs_diffusion(1)),
                    InitialLaw::normal({5.0}, 0.5), 5.0, 0.1, {ModelKind::Nsve, ModelKind::Nsde}};
    }
    throw Error(ErrorKind::InvalidArgument, "unknown benchmark");
}

ExperimentSpec experiment_by_name(const std::string& name) {
    if (name == "pendulum") return make_experiment(Benchmark::Pendulum);
    if (name == "ou1d") return make_experiment(Benchmark::Ou1d);
    if (name == "ou2d") return make_experiment(Benchmark::Ou2d);
    if (name == "rough_heston") return make_experiment(Benchmark::RoughHeston);
    if (name == "path_dependent") return make_experiment(Benchmark::PathDependent);
    throw Error(ErrorKind::ValidationError, "unknown experiment '" + name + "'");
}

ExperimentSpec with_deterministic_start(ExperimentSpec spec, std::vector<double> xi) {
    if (xi.size() != spec.problem.d) throw Error(ErrorKind::DimMismatch, "initial condition has wrong dimension");
    spec.law = InitialLaw::deterministic(std::move(xi));
    return spec;
}

PathDataset generate_dataset(const ExperimentSpec& spec, std::size_t n, std::uint64_t seed) {
    return generate_dataset(spec, spec.grid(), n, seed);
}

PathDataset generate_dataset(const ExperimentSpec& spec, const TimeGrid& grid, std::size_t n, std::uint64_t seed) {
    if (n < 5) throw Error(ErrorKind::InvalidArgument, "dataset needs at least 5 samples");
    std::vector<std::optional<PathRecord>> slots(n);
    parallel_for(n, [&](std::size_t i) {
        auto xi_engine = make_engine(seed, i, kXiChannel);
        auto noise_engine = make_engine(seed, i, kNoiseChannel);
        std::vector<double> xi = spec.law.sample(xi_engine);
        BrownianPath noise = sample_brownian(grid, spec.problem.m, noise_engine);
        try {
            SamplePath path = euler_maruyama(spec.problem, xi, noise);
            slots[i].emplace(PathRecord{std::move(xi), std::move(noise), std::move(path)});
        } catch (const NonFinitePathError& e) {
            throw NonFinitePathError(e.node(), spec.name + " dataset sample " + std::to_string(i));
        }
    });
    PathDataset data{grid, {}, {}, {}};
    data.records.reserve(n);
    for (auto& slot : slots) data.records.push_back(std::move(*slot));
    assign_split(data);
    return data;
}

std::size_t default_epochs(std::size_t n) {
    if (n <= 100) return 400;
    if (n <= 500) return 300;
    return 200;
}

double scheduled_learning_rate(const TrainConfig& cfg, std::size_t epoch) {
    const std::size_t e = cfg.epochs;
    const std::size_t boundaries[] = {(e + 3) / 4, (e + 1) / 2, (3 * e + 3) / 4};
    double lr = cfg.learning_rate;
    for (std::size_t b : boundaries)
        if (epoch > b) lr *= cfg.decay;
    return lr;
}

void validate(const TrainConfig& cfg, std::size_t train_size) {
    if (cfg.epochs == 0 || cfg.epochs % 4 != 0)
        throw Error(ErrorKind::ValidationError, "epochs must be a positive multiple of 4");
    if (cfg.batch_size == 0) throw Error(ErrorKind::ValidationError, "batch size must be positive");
    if (train_size == 0) throw Error(ErrorKind::ValidationError, "training set is empty");
    if (cfg.batch_size > train_size)
        throw Error(ErrorKind::ValidationError, "batch size " + std::to_string(cfg.batch_size) +
                                                    " exceeds training set size " + std::to_string(train_size));
    if (!(cfg.learning_rate > 0.0) || !(cfg.decay > 0.0))
        throw Error(ErrorKind::ValidationError, "learning rate and decay must be positive");
}

Var relative_l2_node(Tape& tape, std::span<const Var> nodes, const SamplePath& target) {
    const double denom = path_l2_norm(target);
    if (!(denom >= 1e-12)) throw Error(ErrorKind::ZeroTargetNorm, "target path norm below 1e-12");
    const Var path = tape.concat(nodes);
    const Var diff = tape.sub(path, tape.constant(target.values()));
    const Var norm = tape.sqrt(tape.scale(tape.sum_squares(diff), target.grid().dt()));
    return tape.scale(norm, 1.0 / denom);
}

LossReport train(NeuralSveModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg) {
    return train_recurrent(model, train_set, cfg);
}

LossReport train(NeuralSdeModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg) {
    return train_recurrent(model, train_set, cfg);
}

LossReport train(DeepOnetModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg) {
    validate(cfg, train_set.size());
    check_dims(model, train_set);
    for (const auto& r : train_set) {
        model.check_grid(r.noise);
        if (r.xi != train_set.front().xi)
            throw Error(ErrorKind::ValidationError, "DeepONet training requires a deterministic initial condition");
    }
    const auto start = std::chrono::steady_clock::now();
    const TimeGrid& grid = model.grid();
    const std::size_t nodes = grid.n_nodes();

    // Targets are standardized with the pooled training mean and standard deviation.
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& r : train_set)
        for (double v : r.path.values()) {
            sum += v;
            sum_sq += v * v;
        }
    const double count = static_cast<double>(train_set.size() * nodes);
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    const double sd = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
    model.set_output_normalization(mean, sd);

    ParamVector& params = model.params();
    AdamState adam(params.size(), cfg.learning_rate);
    LossReport report;
    report.objective = "mse";
    report.seed = cfg.seed;

    std::vector<Var> raw;
    std::vector<double> targets;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        adam.learning_rate = scheduled_learning_rate(cfg, epoch);
        const auto order = epoch_order(train_set.size(), cfg.seed, epoch);
        double epoch_sum = 0.0;
        for (std::size_t first = 0; first < train_set.size(); first += cfg.batch_size) {
            const std::size_t batch = std::min(cfg.batch_size, train_set.size() - first);
            Tape tape(params.values());
            std::vector<Var> trunk(nodes);
            for (std::size_t i = 0; i < nodes; ++i) trunk[i] = model.trunk(grid.node(i), tape);
            raw.clear();
            targets.clear();
            for (std::size_t k = 0; k < batch; ++k) {
                const PathRecord& rec = train_set[order[first + k]];
                const Var b = model.branch(rec.noise, tape);
                for (std::size_t i = 0; i < nodes; ++i) {
                    raw.push_back(model.combine(b, trunk[i], tape));
                    targets.push_back((rec.path.at(i)[0] - mean) / sd);
                }
            }
            const Var diff = tape.sub(tape.concat(raw), tape.constant(targets));
            const double inv = 1.0 / static_cast<double>(batch * nodes);
            const Var loss = tape.scale(tape.sum_squares(diff), inv);
            const double value = tape.scalar(loss);
            check_loss(value, epoch);
            params.zero_grad();
            tape.backward(loss, params.grads());
            adam_step(adam, params);
            epoch_sum += value * static_cast<double>(batch) * sd * sd;
        }
        const double epoch_loss = epoch_sum / static_cast<double>(train_set.size());
        report.epochs.push_back({epoch, adam.learning_rate, epoch_loss});
        if (cfg.on_epoch) cfg.on_epoch(epoch, adam.learning_rate, epoch_loss);
    }
    report.final_train_objective = report.epochs.empty() ? 0.0 : report.epochs.back().train_loss;
    report.wall_seconds = elapsed_seconds(start);
    return report;
}

double evaluate_records(const PathModel& model, std::span<const PathRecord> records) {
    if (records.empty()) throw Error(ErrorKind::InvalidArgument, "cannot evaluate on an empty split");
    check_dims(model, records);
    std::vector<double> losses(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        losses[i] = relative_l2(model.predict(records[i].xi, records[i].noise), records[i].path);
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(records.size());
}

SplitLosses evaluate(const PathModel& model, const PathDataset& data) {
    const auto train_set = data.train_split();
    const auto test_set = data.test_split();
    return {evaluate_records(model, train_set), evaluate_records(model, test_set)};
}

}  // namespace vnet
