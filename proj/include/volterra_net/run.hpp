#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "volterra_net/errors.hpp"
#include "volterra_net/path_model.hpp"
#include "volterra_net/stability.hpp"

namespace vnet {

enum class Command { Generate, Train, Eval, Stability, Simulate };

std::string_view to_string(Command command);

struct RunConfig {
    Command command = Command::Train;
    std::string experiment = "pendulum";
    ModelKind model = ModelKind::Nsve;
    std::size_t n = 100;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> model_seed;  // defaults to seed
    std::size_t epochs = 0;                   // 0: default_epochs(n)
    std::size_t batch = 32;
    std::optional<double> lr;  // 0.01 for the recurrent models, 1e-3 for DeepONet
    std::optional<double> horizon;
    std::optional<double> dt;
    std::size_t latent = 12;  // d_h
    std::size_t kernel_width = 12;  // d_K
    std::size_t dump_paths = 3;
    std::vector<std::size_t> dump_indices;  // dataset indices; replaces the first-dump_paths-test default
    std::optional<std::string> out;
    std::optional<std::string> model_file;  // stem of <stem>.bin / <stem>.json, for eval
    PerturbationChannel channel = PerturbationChannel::Drift;
    std::string stability_base = "lipschitz_ou";  // or "g_only" (mu = sigma = 0)
    double p = 2.0;
    std::size_t n_mc = 10000;
    std::vector<double> epsilons;  // empty: the default scan
    std::size_t threads = 0;

    std::uint64_t effective_model_seed() const { return model_seed.value_or(seed); }
    std::size_t effective_epochs() const;
    double effective_lr() const;
};

/// Strict: any key outside the schema raises ConfigParseError naming it.
RunConfig parse_config(const nlohmann::json& json);
nlohmann::json to_json(const RunConfig& config);

/// Applies "--key=value" overrides; values are parsed as JSON when possible, else taken as strings.
nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides);
nlohmann::json read_config_file(const std::filesystem::path& file);

/// `out` if given, else $VOLTERRA_NET_OUT (or ./runs) joined with a name derived from the config.
std::filesystem::path output_directory(const RunConfig& config);

/// 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
int exit_code(ErrorKind kind);

struct RunResult {
    std::filesystem::path directory;
    nlohmann::json report;
};

/// Executes the configured command and writes its artifacts. Refuses a non-empty
/// output directory unless `force`.
RunResult run(const RunConfig& config, bool force = false);

}  // namespace vnet
