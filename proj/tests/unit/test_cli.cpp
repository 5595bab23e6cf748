#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "volterra_net/run.hpp"

using namespace vnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("vnet_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::size_t count_lines(const fs::path& file) {
    std::ifstream in(file);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    return json::parse(in);
}

int run_binary(const std::string& args) {
    const char* exe = std::getenv("VNET_CLI");
    const int status = std::system((std::string(exe) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("unknown keys are rejected by name") {
    try {
        parse_config(json{{"command", "train"}, {"learning_rte", 0.1}});
        FAIL("expected ConfigParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigParseError);
        CHECK(std::string(e.what()).find("learning_rte") != std::string::npos);
    }
}

TEST_CASE("type errors name the key") {
    try {
        parse_config(json{{"n", "many"}});
        FAIL("expected ConfigParseError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigParseError);
        CHECK(std::string(e.what()).find("'n'") != std::string::npos);
    }
    CHECK(kind_of([] { parse_config(json{{"seed", -1}}); }) == ErrorKind::ConfigParseError);
    CHECK(kind_of([] { parse_config(json{{"command", "fly"}}); }) == ErrorKind::ConfigParseError);
    CHECK(kind_of([] { parse_config(json{{"model", "transformer"}}); }) == ErrorKind::ConfigParseError);
    CHECK(kind_of([] { parse_config(json{{"channel", "noise"}}); }) == ErrorKind::ConfigParseError);
    CHECK(kind_of([] { parse_config(json::array()); }) == ErrorKind::ConfigParseError);
}

TEST_CASE("parsing and the effective-value echo") {
    const RunConfig cfg = parse_config(json{{"command", "train"}, {"experiment", "rough_heston"}, {"model", "deeponet"},
                                            {"n", 500}, {"seed", 3}, {"T", 2.0}, {"dt", 0.05}, {"epsilons", {0.1, 1}}});
    CHECK(cfg.command == Command::Train);
    CHECK(cfg.model == ModelKind::DeepOnet);
    CHECK(cfg.effective_epochs() == 300);
    CHECK(cfg.effective_lr() == 1e-3);
    CHECK(cfg.effective_model_seed() == 3);
    const json echo = to_json(cfg);
    CHECK(echo["epochs"] == 300);
    CHECK(echo["T"] == 2.0);
    CHECK(echo["dt"] == 0.05);
    CHECK(echo["model"] == "deeponet");
    const RunConfig again = parse_config(echo);
    CHECK(to_json(again) == echo);
    CHECK(parse_config(json::object()).effective_lr() == 0.01);
}

TEST_CASE("overrides") {
    const json base = {{"command", "train"}, {"n", 100}};
    const json j = apply_overrides(base, {"--n=500", "--experiment=ou1d", "--lr=0.005", "--epsilons=[0.1,1]"});
    CHECK(j["n"] == 500);
    CHECK(j["experiment"] == "ou1d");
    CHECK(j["lr"] == 0.005);
    CHECK(j["epsilons"].size() == 2);
    CHECK(kind_of([&] { apply_overrides(base, {"n=5"}); }) == ErrorKind::ConfigParseError);
    CHECK(kind_of([&] { parse_config(apply_overrides(base, {"--learning_rte=1"})); }) == ErrorKind::ConfigParseError);
}

TEST_CASE("exit codes") {
    CHECK(exit_code(ErrorKind::ConfigParseError) == 2);
    CHECK(exit_code(ErrorKind::ValidationError) == 2);
    CHECK(exit_code(ErrorKind::GridMismatch) == 2);
    CHECK(exit_code(ErrorKind::NonFinitePath) == 3);
    CHECK(exit_code(ErrorKind::DivergedLoss) == 3);
    CHECK(exit_code(ErrorKind::DegenerateFit) == 3);
    CHECK(exit_code(ErrorKind::IoError) == 4);
}

TEST_CASE("output directory naming") {
    RunConfig cfg;
    cfg.seed = 4;
    ::setenv("VOLTERRA_NET_OUT", "/tmp/vnet_root", 1);
    CHECK(output_directory(cfg) == fs::path("/tmp/vnet_root/train_pendulum_nsve_seed4"));
    cfg.command = Command::Stability;
    cfg.channel = PerturbationChannel::Kernel;
    CHECK(output_directory(cfg) == fs::path("/tmp/vnet_root/stability_kernel_seed4"));
    ::unsetenv("VOLTERRA_NET_OUT");
    CHECK(output_directory(cfg) == fs::path("runs/stability_kernel_seed4"));
    cfg.out = "/tmp/elsewhere";
    CHECK(output_directory(cfg) == fs::path("/tmp/elsewhere"));
}

TEST_CASE("train writes its artifacts and refuses to overwrite") {
    const fs::path dir = fresh_dir("train");
    RunConfig cfg = parse_config(json{{"command", "train"}, {"experiment", "pendulum"}, {"model", "nsve"}, {"n", 20},
                                      {"seed", 1}, {"epochs", 4}, {"batch", 8}, {"threads", 1},
                                      {"out", dir.string()}, {"dump_indices", {0, 19}}});
    const RunResult r = run(cfg);
    for (const char* f : {"report.json", "losses.csv", "model.bin", "model.json", "pred_000.csv", "target_019.csv"})
        CHECK_MESSAGE(fs::exists(dir / f), f);
    CHECK(count_lines(dir / "losses.csv") == 5);
    const json report = read_json(dir / "report.json");
    CHECK(std::isfinite(report["metrics"]["test_loss"].get<double>()));
    CHECK(report["config"]["epochs"] == 4);
    CHECK(report["metrics"]["n_params"] == 1264);
    CHECK(report["timing"].contains("wall_seconds"));
    CHECK(r.report == report);

    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::IoError);
    const RunResult forced = run(cfg, true);
    CHECK(forced.report["metrics"] == report["metrics"]);

    // The saved model evaluates to the same losses on regenerated data.
    const fs::path eval_dir = fresh_dir("eval");
    RunConfig ev = cfg;
    ev.command = Command::Eval;
    ev.model_file = (dir / "model").string();
    ev.out = eval_dir.string();
    const RunResult e = run(ev);
    CHECK(e.report["metrics"]["test_loss"] == report["metrics"]["test_loss"]);
    CHECK(e.report["metrics"]["train_loss"] == report["metrics"]["train_loss"]);
    fs::remove_all(dir);
    fs::remove_all(eval_dir);
}

TEST_CASE("eval with a missing model file is an I/O error") {
    RunConfig cfg;
    cfg.command = Command::Eval;
    cfg.model_file = "/nonexistent/model";
    cfg.out = fresh_dir("missing").string();
    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::IoError);
    cfg.model_file.reset();
    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::ValidationError);
}

TEST_CASE("validation of the model and experiment pairing") {
    RunConfig cfg;
    cfg.experiment = "path_dependent";
    cfg.model = ModelKind::DeepOnet;
    cfg.out = fresh_dir("pairing").string();
    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::ValidationError);
    cfg.experiment = "heat";
    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::ValidationError);
    cfg.experiment = "pendulum";
    cfg.model = ModelKind::Nsve;
    cfg.dump_indices = {100};
    CHECK(kind_of([&] { run(cfg); }) == ErrorKind::ValidationError);
}

TEST_CASE("simulate writes one CSV per path") {
    const fs::path dir = fresh_dir("simulate");
    RunConfig cfg = parse_config(json{{"command", "simulate"}, {"experiment", "rough_heston"}, {"n", 3}, {"seed", 7},
                                      {"out", dir.string()}});
    run(cfg);
    std::size_t csvs = 0;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".csv") {
            ++csvs;
            CHECK(count_lines(entry.path()) == 52);  // header + 51 nodes
        }
    CHECK(csvs == 3);
    fs::remove_all(dir);
}

TEST_CASE("generate writes xi, paths and noise") {
    const fs::path dir = fresh_dir("generate");
    RunConfig cfg = parse_config(json{{"command", "generate"}, {"experiment", "ou2d"}, {"n", 5}, {"out", dir.string()}});
    run(cfg);
    CHECK(count_lines(dir / "xi.csv") == 6);
    CHECK(fs::exists(dir / "path_004.csv"));
    CHECK(fs::exists(dir / "noise_004.csv"));
    std::ifstream in(dir / "path_000.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x1,x2");
    fs::remove_all(dir);
}

TEST_CASE("stability command") {
    const fs::path dir = fresh_dir("stability");
    RunConfig cfg = parse_config(json{{"command", "stability"}, {"channel", "g"}, {"stability_base", "g_only"},
                                      {"n_mc", 1000}, {"T", 1.0}, {"out", dir.string()}});
    const RunResult r = run(cfg);
    CHECK(r.report["metrics"]["slope"].get<double>() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(count_lines(dir / "stability.csv") == 9);
    CHECK(fs::exists(dir / "stability.json"));
    fs::remove_all(dir);

    cfg.epsilons = {0.1, 0.2};
    CHECK(kind_of([&] { run(cfg, true); }) == ErrorKind::ValidationError);
}

TEST_CASE("the binary maps failures to exit codes") {
    if (!std::getenv("VNET_CLI")) return;
    const fs::path dir = fresh_dir("binary");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << R"({"command": "train", "learning_rte": 0.1})";
    std::ofstream(dir / "ok.json") << R"({"command": "simulate", "experiment": "pendulum", "n": 2})";
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run_binary((dir / "bad.json").string()) == 2);
    CHECK(run_binary((dir / "broken.json").string()) == 2);
    CHECK(run_binary((dir / "absent.json").string()) == 4);
    CHECK(run_binary("") == 2);
    const std::string out = "--out=" + (dir / "sim").string();
    CHECK(run_binary((dir / "ok.json").string() + " " + out + " --threads 1") == 0);
    CHECK(run_binary((dir / "ok.json").string() + " " + out) == 4);
    CHECK(run_binary((dir / "ok.json").string() + " " + out + " --force") == 0);
    CHECK(run_binary((dir / "ok.json").string() + " " + out + " --force --T=5 --dt=0.3") == 2);
    fs::remove_all(dir);
}
