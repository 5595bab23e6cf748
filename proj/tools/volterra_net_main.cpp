#include <iostream>

#include <CLI11.hpp>

#include "volterra_net/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Simulate stochastic Volterra equations and train neural SVE models"};
    std::string config_file;
    std::size_t threads = 0;
    bool force = false;
    app.add_option("config", config_file, "JSON run configuration")->required();
    app.add_option("--threads", threads, "Worker thread cap (1 gives bit-reproducible runs)");
    app.add_flag("--force", force, "Reuse a non-empty output directory");
    app.allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto json = vnet::apply_overrides(vnet::read_config_file(config_file), app.remaining());
        if (threads) json["threads"] = threads;
        const vnet::RunConfig config = vnet::parse_config(json);
        const vnet::RunResult result = vnet::run(config, force);
        std::cout << result.report["metrics"].dump() << '\n' << "wrote " << result.directory.string() << '\n';
        return 0;
    } catch (const vnet::Error& e) {
        std::cerr << "volterra-net: " << e.what() << '\n';
        return vnet::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "volterra-net: " << e.what() << '\n';
        return 3;
    }
}
