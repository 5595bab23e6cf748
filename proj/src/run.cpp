#include "volterra_net/run.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "volterra_net/baselines.hpp"
#include "volterra_net/experiments.hpp"
#include "volterra_net/model_io.hpp"
#include "volterra_net/neural_sve.hpp"
#include "volterra_net/parallel.hpp"

namespace vnet {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    throw Error(ErrorKind::ConfigParseError, "key '" + key + "': " + what);
}

std::uint64_t as_unsigned(const json& v, const std::string& key) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        bad_key(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) bad_key(key, "expected a number");
    return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) bad_key(key, "expected a string");
    return v.get<std::string>();
}

Command parse_command(const std::string& name) {
    if (name == "generate") return Command::Generate;
    if (name == "train") return Command::Train;
    if (name == "eval") return Command::Eval;
    if (name == "stability") return Command::Stability;
    if (name == "simulate") return Command::Simulate;
    bad_key("command", "unknown command '" + name + "'");
}

std::string numbered(const std::string& prefix, std::size_t i) {
    std::ostringstream name;
    name << prefix << '_' << std::setw(3) << std::setfill('0') << i << ".csv";
    return name.str();
}

void write_json(const json& value, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + file.string() + " for writing");
    out << value.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

void write_losses(const LossReport& report, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + file.string() + " for writing");
    out << "epoch,lr,train_loss\n" << std::setprecision(17);
    for (const auto& e : report.epochs) out << e.epoch << ',' << e.learning_rate << ',' << e.train_loss << '\n';
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

void prepare_directory(const std::filesystem::path& dir, bool force) {
    std::error_code ec;
    if (std::filesystem::exists(dir, ec)) {
        if (!std::filesystem::is_directory(dir, ec))
            throw Error(ErrorKind::IoError, dir.string() + " exists and is not a directory");
        if (!std::filesystem::is_empty(dir, ec) && !force)
            throw Error(ErrorKind::IoError, "output directory " + dir.string() + " is not empty (use --force)");
    }
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

ExperimentSpec resolve_experiment(const RunConfig& cfg) {
    ExperimentSpec spec = experiment_by_name(cfg.experiment);
    if (cfg.horizon) spec.horizon = *cfg.horizon;
    if (cfg.dt) spec.dt = *cfg.dt;
    // DeepONet sees only the noise, so its data starts from the fixed mean of the law.
    if (cfg.model == ModelKind::DeepOnet) spec = with_deterministic_start(spec, spec.law.mean);
    return spec;
}

void validate_config(const RunConfig& cfg) {
    const ExperimentSpec spec = experiment_by_name(cfg.experiment);
    const bool uses_model = cfg.command == Command::Train || cfg.command == Command::Eval;
    if (uses_model && !spec.supports(cfg.model))
        throw Error(ErrorKind::ValidationError, "model '" + std::string(to_string(cfg.model)) +
                                                    "' is not run on experiment '" + cfg.experiment + "'");
    if (cfg.command != Command::Stability && cfg.n < (cfg.command == Command::Simulate ? 1u : 5u))
        throw Error(ErrorKind::ValidationError, "n is too small");
    if (cfg.command == Command::Eval) {
        if (!cfg.model_file) throw Error(ErrorKind::ValidationError, "eval requires model_file");
        for (const char* ext : {".bin", ".json"}) {
            const std::filesystem::path f = *cfg.model_file + ext;
            if (!std::filesystem::exists(f)) throw Error(ErrorKind::IoError, "model file " + f.string() + " not found");
        }
    }
    if (cfg.stability_base != "lipschitz_ou" && cfg.stability_base != "g_only")
        throw Error(ErrorKind::ValidationError, "stability_base must be lipschitz_ou or g_only");
    for (std::size_t i : cfg.dump_indices)
        if (i >= cfg.n) throw Error(ErrorKind::ValidationError, "dump index " + std::to_string(i) + " is not below n");
    if (cfg.latent == 0 || cfg.kernel_width == 0) throw Error(ErrorKind::ValidationError, "widths must be positive");
}

json dataset_summary(const PathDataset& data) {
    const std::size_t last = data.grid.n_steps();
    double mean_end = 0.0;
    for (const auto& r : data.records) mean_end += r.path.at(last)[0];
    mean_end /= static_cast<double>(data.records.size());
    return {{"n_train", data.train_indices.size()},
            {"n_test", data.test_indices.size()},
            {"n_steps", data.grid.n_steps()},
            {"mean_x1_at_T", mean_end}};
}

void dump_predictions(const PathModel& model, const PathDataset& data, const RunConfig& cfg,
                      const std::filesystem::path& dir) {
    if (!cfg.dump_indices.empty()) {
        for (std::size_t i : cfg.dump_indices) {
            const PathRecord& rec = data.records[i];
            write_csv(model.predict(rec.xi, rec.noise), dir / numbered("pred", i));
            write_csv(rec.path, dir / numbered("target", i));
        }
        return;
    }
    const auto test = data.test_split();
    for (std::size_t k = 0; k < std::min(cfg.dump_paths, test.size()); ++k) {
        write_csv(model.predict(test[k].xi, test[k].noise), dir / numbered("pred", data.test_indices[k]));
        write_csv(test[k].path, dir / numbered("target", data.test_indices[k]));
    }
}

std::unique_ptr<PathModel> make_model(const RunConfig& cfg, const ExperimentSpec& spec, const TimeGrid& grid) {
    const LatentDims dims{spec.problem.d, spec.problem.m, cfg.latent, cfg.kernel_width};
    switch (cfg.model) {
        case ModelKind::Nsve:
            return std::make_unique<NeuralSveModel>(NeuralSveModel::init(dims, cfg.effective_model_seed()));
        case ModelKind::Nsde:
            return std::make_unique<NeuralSdeModel>(NeuralSdeModel::init(dims, cfg.effective_model_seed()));
        case ModelKind::DeepOnet: {
            DeepOnetConfig dc;
            dc.learning_rate = cfg.effective_lr();
            return std::make_unique<DeepOnetModel>(
                DeepOnetModel::init(grid, spec.problem.m, dc, cfg.effective_model_seed()));
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model kind");
}

LossReport train_any(PathModel& model, const PathDataset& data, const TrainConfig& tc) {
    if (auto* m = dynamic_cast<NeuralSveModel*>(&model)) return fit_and_evaluate(*m, data, tc);
    if (auto* m = dynamic_cast<NeuralSdeModel*>(&model)) return fit_and_evaluate(*m, data, tc);
    if (auto* m = dynamic_cast<DeepOnetModel*>(&model)) return fit_and_evaluate(*m, data, tc);
    throw Error(ErrorKind::InvalidArgument, "unknown model type");
}

void save_any(const PathModel& model, const std::filesystem::path& stem) {
    if (auto* m = dynamic_cast<const NeuralSveModel*>(&model)) return save_model(*m, stem);
    if (auto* m = dynamic_cast<const NeuralSdeModel*>(&model)) return save_model(*m, stem);
    if (auto* m = dynamic_cast<const DeepOnetModel*>(&model)) return save_model(*m, stem);
    throw Error(ErrorKind::InvalidArgument, "unknown model type");
}

std::size_t param_count(const PathModel& model) {
    if (auto* m = dynamic_cast<const NeuralSveModel*>(&model)) return m->params().size();
    if (auto* m = dynamic_cast<const NeuralSdeModel*>(&model)) return m->params().size();
    if (auto* m = dynamic_cast<const DeepOnetModel*>(&model)) return m->params().size();
    return 0;
}

json run_generate(const RunConfig& cfg, const std::filesystem::path& dir) {
    const ExperimentSpec spec = resolve_experiment(cfg);
    const PathDataset data = generate_dataset(spec, spec.grid(), cfg.n, cfg.seed);
    std::ofstream xi_file(dir / "xi.csv");
    if (!xi_file) throw Error(ErrorKind::IoError, "cannot write xi.csv");
    xi_file << "index,split";
    for (std::size_t r = 0; r < spec.problem.d; ++r) xi_file << ",xi" << r + 1;
    xi_file << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const bool is_train = i < data.train_indices.size();
        xi_file << i << ',' << (is_train ? "train" : "test");
        for (double v : data.records[i].xi) xi_file << ',' << v;
        xi_file << '\n';
        write_csv(data.records[i].path, dir / numbered("path", i));
        write_csv(data.records[i].noise, dir / numbered("noise", i));
    }
    return {{"dataset", dataset_summary(data)}};
}

json run_train(const RunConfig& cfg, const std::filesystem::path& dir) {
    const ExperimentSpec spec = resolve_experiment(cfg);
    const TimeGrid grid = spec.grid();
    const PathDataset data = generate_dataset(spec, grid, cfg.n, cfg.seed);
    auto model = make_model(cfg, spec, grid);

    TrainConfig tc;
    tc.epochs = cfg.effective_epochs();
    tc.batch_size = cfg.batch;
    tc.learning_rate = cfg.effective_lr();
    tc.seed = cfg.effective_model_seed();
    const LossReport report = train_any(*model, data, tc);

    write_losses(report, dir / "losses.csv");
    save_any(*model, dir / "model");
    dump_predictions(*model, data, cfg, dir);
    return {{"objective", report.objective},
            {"final_train_objective", report.final_train_objective},
            {"train_loss", report.train_loss},
            {"test_loss", report.test_loss},
            {"epochs", report.epochs.size()},
            {"n_params", param_count(*model)},
            {"dataset", dataset_summary(data)},
            {"wall_seconds", report.wall_seconds}};
}

json run_eval(const RunConfig& cfg, const std::filesystem::path& dir) {
    const auto model = load_model(*cfg.model_file);
    RunConfig resolved = cfg;
    resolved.model = model->kind();
    const ExperimentSpec spec = resolve_experiment(resolved);
    if (!spec.supports(model->kind()))
        throw Error(ErrorKind::ValidationError, "stored model kind is not run on experiment " + cfg.experiment);
    const PathDataset data = generate_dataset(spec, spec.grid(), cfg.n, cfg.seed);
    const SplitLosses losses = evaluate(*model, data);
    dump_predictions(*model, data, cfg, dir);
    return {{"model_kind", to_string(model->kind())},
            {"train_loss", losses.train},
            {"test_loss", losses.test},
            {"dataset", dataset_summary(data)}};
}

json run_stability(const RunConfig& cfg, const std::filesystem::path& dir) {
    PerturbationPlan plan = default_stability_plan(cfg.channel);
    if (cfg.stability_base == "g_only") {
        plan.base.mu = CoefficientFn::constant(1, 1, 0.0);
        plan.base.sigma = CoefficientFn::constant(1, 1, 0.0);
    }
    plan.p = cfg.p;
    plan.n_mc = cfg.n_mc;
    if (!cfg.epsilons.empty()) plan.epsilons = cfg.epsilons;
    if (cfg.horizon || cfg.dt) plan.grid = make_uniform_grid(cfg.horizon.value_or(5.0), cfg.dt.value_or(0.1));
    const StabilityResult result = stability_scan(plan, cfg.seed);
    write_stability_csv(result, dir / "stability.csv");
    const json summary = {{"channel", to_string(plan.channel)},
                          {"base", cfg.stability_base},
                          {"p", plan.p},
                          {"n_mc", plan.n_mc},
                          {"slope", result.slope},
                          {"slope_stderr", result.slope_stderr},
                          {"intercept", result.intercept},
                          {"C_estimate", result.constant},
                          {"xi_moment", result.xi_moment}};
    write_json(summary, dir / "stability.json");
    return summary;
}

json run_simulate(const RunConfig& cfg, const std::filesystem::path& dir) {
    const ExperimentSpec spec = resolve_experiment(cfg);
    const PathDataset data = generate_dataset(spec, spec.grid(), std::max<std::size_t>(cfg.n, 5), cfg.seed);
    for (std::size_t i = 0; i < cfg.n; ++i) write_csv(data.records[i].path, dir / numbered("path", i));
    return {{"paths", cfg.n}, {"rows_per_path", data.grid.n_nodes()}};
}

}  // namespace

std::string_view to_string(Command command) {
    switch (command) {
        case Command::Generate: return "generate";
        case Command::Train: return "train";
        case Command::Eval: return "eval";
        case Command::Stability: return "stability";
        case Command::Simulate: return "simulate";
    }
    return "?";
}

std::size_t RunConfig::effective_epochs() const { return epochs ? epochs : default_epochs(n); }

double RunConfig::effective_lr() const {
    if (lr) return *lr;
    return model == ModelKind::DeepOnet ? DeepOnetConfig{}.learning_rate : TrainConfig{}.learning_rate;
}

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigParseError, "configuration must be a JSON object");
    RunConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "command") cfg.command = parse_command(as_string(v, key));
        else if (key == "experiment") cfg.experiment = as_string(v, key);
        else if (key == "model") {
            try {
                cfg.model = parse_model_kind(as_string(v, key));
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::ConfigParseError) throw;
                bad_key(key, "unknown model '" + v.get<std::string>() + "'");
            }
        } else if (key == "n") cfg.n = as_unsigned(v, key);
        else if (key == "seed") cfg.seed = as_unsigned(v, key);
        else if (key == "model_seed") cfg.model_seed = as_unsigned(v, key);
        else if (key == "epochs") cfg.epochs = as_unsigned(v, key);
        else if (key == "batch") cfg.batch = as_unsigned(v, key);
        else if (key == "lr") cfg.lr = as_double(v, key);
        else if (key == "T") cfg.horizon = as_double(v, key);
        else if (key == "dt") cfg.dt = as_double(v, key);
        else if (key == "d_h") cfg.latent = as_unsigned(v, key);
        else if (key == "d_K") cfg.kernel_width = as_unsigned(v, key);
        else if (key == "dump_paths") cfg.dump_paths = as_unsigned(v, key);
        else if (key == "dump_indices") {
            if (!v.is_array()) bad_key(key, "expected an array of sample indices");
            cfg.dump_indices.clear();
            for (const auto& e : v) cfg.dump_indices.push_back(as_unsigned(e, key));
        }
        else if (key == "out") cfg.out = as_string(v, key);
        else if (key == "model_file") cfg.model_file = as_string(v, key);
        else if (key == "channel") {
            try {
                cfg.channel = parse_channel(as_string(v, key));
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::ConfigParseError) throw;
                bad_key(key, e.what());
            }
        } else if (key == "stability_base") cfg.stability_base = as_string(v, key);
        else if (key == "p") cfg.p = as_double(v, key);
        else if (key == "n_mc") cfg.n_mc = as_unsigned(v, key);
        else if (key == "epsilons") {
            if (!v.is_array()) bad_key(key, "expected an array of numbers");
            cfg.epsilons.clear();
            for (const auto& e : v) cfg.epsilons.push_back(as_double(e, key));
        } else if (key == "threads") cfg.threads = as_unsigned(v, key);
        else bad_key(key, "unknown configuration key");
    }
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json j = {{"command", to_string(cfg.command)},
              {"experiment", cfg.experiment},
              {"model", to_string(cfg.model)},
              {"n", cfg.n},
              {"seed", cfg.seed},
              {"model_seed", cfg.effective_model_seed()},
              {"epochs", cfg.effective_epochs()},
              {"batch", cfg.batch},
              {"lr", cfg.effective_lr()},
              {"d_h", cfg.latent},
              {"d_K", cfg.kernel_width},
              {"dump_paths", cfg.dump_paths},
              {"dump_indices", cfg.dump_indices},
              {"channel", to_string(cfg.channel)},
              {"stability_base", cfg.stability_base},
              {"p", cfg.p},
              {"n_mc", cfg.n_mc},
              {"epsilons", cfg.epsilons},
              {"threads", cfg.threads}};
    if (cfg.horizon) j["T"] = *cfg.horizon;
    if (cfg.dt) j["dt"] = *cfg.dt;
    if (cfg.out) j["out"] = *cfg.out;
    if (cfg.model_file) j["model_file"] = *cfg.model_file;
    return j;
}

json apply_overrides(json base, const std::vector<std::string>& overrides) {
    if (!base.is_object()) throw Error(ErrorKind::ConfigParseError, "configuration must be a JSON object");
    for (const auto& arg : overrides) {
        if (arg.rfind("--", 0) != 0 || arg.find('=') == std::string::npos)
            throw Error(ErrorKind::ConfigParseError, "expected --key=value, got '" + arg + "'");
        const auto eq = arg.find('=');
        const std::string key = arg.substr(2, eq - 2);
        const std::string text = arg.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        base[key] = value;
    }
    return base;
}

json read_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::IoError, "cannot read config " + file.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::ConfigParseError, file.string() + " is not valid JSON");
    return j;
}

std::filesystem::path output_directory(const RunConfig& cfg) {
    if (cfg.out) return *cfg.out;
    const char* root = std::getenv("VOLTERRA_NET_OUT");
    std::ostringstream name;
    name << to_string(cfg.command) << '_';
    if (cfg.command == Command::Stability)
        name << to_string(cfg.channel);
    else
        name << cfg.experiment;
    if (cfg.command == Command::Train || cfg.command == Command::Eval) name << '_' << to_string(cfg.model);
    name << "_seed" << cfg.seed;
    return std::filesystem::path(root && *root ? root : "runs") / name.str();
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::IoError: return 4;
        case ErrorKind::ZeroTargetNorm:
        case ErrorKind::SingularAtZero:
        case ErrorKind::NonFinitePath:
        case ErrorKind::NonScalarLoss:
        case ErrorKind::DivergedLoss:
        case ErrorKind::DegenerateFit: return 3;
        default: return 2;
    }
}

RunResult run(const RunConfig& cfg, bool force) {
    validate_config(cfg);
    if (cfg.threads) set_thread_limit(cfg.threads);
    const std::filesystem::path dir = output_directory(cfg);
    prepare_directory(dir, force);

    json metrics;
    switch (cfg.command) {
        case Command::Generate: metrics = run_generate(cfg, dir); break;
        case Command::Train: metrics = run_train(cfg, dir); break;
        case Command::Eval: metrics = run_eval(cfg, dir); break;
        case Command::Stability: metrics = run_stability(cfg, dir); break;
        case Command::Simulate: metrics = run_simulate(cfg, dir); break;
    }
    json timing = json::object();
    if (metrics.contains("wall_seconds")) {
        timing["wall_seconds"] = metrics["wall_seconds"];
        metrics.erase("wall_seconds");
    }
    const json report = {{"config", to_json(cfg)},
                         {"xi_convention", "N(mean, sd): the second parameter is a standard deviation"},
                         {"metrics", metrics},
                         {"timing", timing}};
    write_json(report, dir / "report.json");
    return {dir, report};
}

}  // namespace vnet
