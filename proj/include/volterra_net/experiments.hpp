#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "volterra_net/baselines.hpp"
#include "volterra_net/core_paths.hpp"
#include "volterra_net/neural_sve.hpp"
#include "volterra_net/sve_solver.hpp"

namespace vnet {

enum class Benchmark { Pendulum, Ou1d, Ou2d, RoughHeston, PathDependent };

/// Law of xi. Normal draws mean[r] + spread * N(0,1) per component; spread is a standard deviation.
struct InitialLaw {
    enum class Kind { Normal, Deterministic };
    Kind kind;
    std::vector<double> mean;
    double spread = 0.0;

    static InitialLaw normal(std::vector<double> mean, double sd) { return {Kind::Normal, std::move(mean), sd}; }
    static InitialLaw deterministic(std::vector<double> value) { return {Kind::Deterministic, std::move(value), 0.0}; }

    std::vector<double> sample(std::mt19937_64& engine) const;
    std::string describe() const;
};

struct ExperimentSpec {
    Benchmark id;
    std::string name;
    SveProblem problem;
    InitialLaw law;
    double horizon = 5.0;
    double dt = 0.1;
    std::vector<ModelKind> model_kinds;

    TimeGrid grid() const { return make_uniform_grid(horizon, dt); }
    bool supports(ModelKind kind) const;
};

ExperimentSpec make_experiment(Benchmark id);
/// pendulum | ou1d | ou2d | rough_heston | path_dependent
ExperimentSpec experiment_by_name(const std::string& name);
/// The same equation started from a fixed xi (the DeepONet protocol uses xi = 2).
ExperimentSpec with_deterministic_start(ExperimentSpec spec, std::vector<double> xi);

/// n i.i.d. (xi, W, X) triples on the spec's grid, 80/20 split by index.
PathDataset generate_dataset(const ExperimentSpec& spec, std::size_t n, std::uint64_t seed);
PathDataset generate_dataset(const ExperimentSpec& spec, const TimeGrid& grid, std::size_t n, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double decay = 0.8;
    std::uint64_t seed = 0;
    /// Called after every epoch with (epoch, lr, train loss); may be empty.
    std::function<void(std::size_t, double, double)> on_epoch;
};

/// 400 epochs for n <= 100, 300 for n <= 500, 200 above.
std::size_t default_epochs(std::size_t n);
/// Learning rate in force during `epoch` (1-based): lr * decay^k, k = boundaries passed.
double scheduled_learning_rate(const TrainConfig& cfg, std::size_t epoch);
void validate(const TrainConfig& cfg, std::size_t train_size);

struct EpochRecord {
    std::size_t epoch;
    double learning_rate;
    double train_loss;
};

struct LossReport {
    std::string objective;  // "mean_relative_l2" or "mse"
    std::vector<EpochRecord> epochs;
    double final_train_objective = 0.0;
    double train_loss = 0.0;  // mean relative L2
    double test_loss = 0.0;   // mean relative L2
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

/// Per-sample objective of the recurrent models: relative L2 of the unrolled path.
Var relative_l2_node(Tape& tape, std::span<const Var> nodes, const SamplePath& target);

// Training sees only the records it is handed; callers pass the train split.
LossReport train(NeuralSveModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg);
LossReport train(NeuralSdeModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg);
/// Minimizes MSE over all grid nodes of normalized targets; requires deterministic xi.
LossReport train(DeepOnetModel& model, std::span<const PathRecord> train_set, const TrainConfig& cfg);

struct SplitLosses {
    double train;
    double test;
};

double evaluate_records(const PathModel& model, std::span<const PathRecord> records);
SplitLosses evaluate(const PathModel& model, const PathDataset& data);

/// Trains on the train split, then fills the report's train/test losses.
template <class Model>
LossReport fit_and_evaluate(Model& model, const PathDataset& data, const TrainConfig& cfg) {
    const auto train_set = data.train_split();
    LossReport report = train(model, train_set, cfg);
    const SplitLosses losses = evaluate(model, data);
    report.train_loss = losses.train;
    report.test_loss = losses.test;
    return report;
}

}  // namespace vnet
