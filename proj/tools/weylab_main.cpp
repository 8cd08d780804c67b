#include <CLI11.hpp>

#include <iostream>

#include "weylab/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"weylab: spectral laboratory for damped magnetic Schrodinger operator calculus"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int threads = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration (json)")->required();
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--seed", seed, "seed override");
        cmd->add_option("--threads", threads, "worker threads for scan points");
    };

    std::vector<std::string> commands = {"solve",         "sensitivity", "parametrix-scan",
                                         "commutator-scan", "assumptions", "manybody",
                                         "quantize-check"};
    for (const auto& c : commands) add_common(app.add_subcommand(c));

    CLI::App* validate = app.add_subcommand("validate", "validate a configuration without running");
    validate->add_option("--config", config_path, "run configuration (json)")->required();

    CLI11_PARSE(app, argc, argv);

    std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "validate") {
        auto diags = weylab::validate_config(config_path);
        if (diags.empty()) {
            std::cout << "ok\n";
            return 0;
        }
        for (const auto& d : diags) std::cout << d << "\n";
        return 2;
    }

    // the subcommand must match the config's command field; the config wins
    // for dispatch, the CLI name is a convenience check
    auto diags = weylab::validate_config(config_path);
    if (diags.empty()) {
        std::vector<std::string> tmp;
        weylab::RunConfig cfg = weylab::parse_config(config_path, tmp);
        if (cfg.command != sub) {
            std::cerr << "config command '" << cfg.command << "' does not match subcommand '" << sub
                      << "'\n";
            return 2;
        }
    }
    return weylab::run_config(config_path, out_dir, seed, threads);
}
