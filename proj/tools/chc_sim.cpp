#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chc/errors.hpp"
#include "chc/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Spectral Galerkin simulator and ergodicity test-bench for the stochastic Cahn-Hilliard-Cook equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = chc::default_thread_count();

    for (const char* kind :
         {"simulate", "pair", "couple", "girsanov", "asf", "ergodic", "irreducibility", "nsweep", "lintest"}) {
        auto* sub = app.add_subcommand(kind, std::string("run a ") + kind + " experiment");
        sub->add_option("--config", config_path, "key=value configuration file")->required();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--out", out_dir, "override the output root directory");
        sub->add_option("--threads", threads, "worker threads (default: CHC_THREADS or hardware)");
    }

    std::string manifest_path;
    std::string series;
    auto* plot = app.add_subcommand("plot", "write plot-ready CSV for one output series");
    plot->add_option("--manifest", manifest_path, "manifest.json of a finished run")->required();
    plot->add_option("--series", series, "column name, e.g. dist_m1 or norm_m1_sq_mean")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (plot->parsed()) {
            std::cout << chc::emit_plotdata(manifest_path, series).string() << "\n";
            return 0;
        }
        const CLI::App* sub = app.get_subcommands().front();
        chc::ExperimentConfig cfg = chc::parse_config(config_path, chc::parse_kind(sub->get_name()));
        if (sub->count("--seed")) cfg.sim.seed = seed;
        if (sub->count("--out")) cfg.out = out_dir;
        cfg.validate();

        const chc::RunManifest m = chc::run(cfg, {threads});
        std::cout << "run directory: " << m.directory.string() << "\n";
        std::cout << "status: " << m.status << "\n";
        for (const auto& f : m.failures) std::cout << "  failed: " << f << "\n";
        return m.exit_code;
    } catch (const chc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return chc::kExitConfig;
    } catch (const chc::StiffEvent& e) {
        std::cerr << "stiff event: " << e.what() << "\n";
        return chc::kExitStiff;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
