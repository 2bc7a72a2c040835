#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "z2cli/commands.hpp"
#include "z2spectra/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Sign-twisted Laplace spectra on the sphere with branch points"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int refine = -1;
    int threads = 0;
    const std::map<std::string, std::string> help{
        {"spectrum", "eigenvalues in the configured window"},
        {"trace", "local expansion coefficients and the criticality gap"},
        {"perturb", "predicted against re-solved eigenvalue slopes"},
        {"search", "locate a critical configuration from the configured start"},
        {"verify", "rigidity report and plot data at a critical configuration"},
        {"calibrate", "oracle comparisons, convergence table and the slope constant"},
    };
    for (const auto& name : z2cli::command_names()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config,-c", config_path, "INI configuration file")->required();
        sub->add_option("--out,-o", out_dir, "output directory (overrides config and Z2S_OUT)");
        sub->add_option("--seed", seed, "random seed (overrides config)");
        sub->add_option("--refine", refine, "uniform refinement levels (overrides config)")->check(CLI::NonNegativeNumber);
        sub->add_option("--threads", threads, "worker threads (overrides config and Z2S_THREADS)")
            ->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();

    try {
        z2cli::RunConfig cfg = z2cli::load_config(config_path);
        z2cli::apply_environment(cfg);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (sub->count("--seed")) cfg.seed = seed;
        if (refine >= 0) cfg.policy.refinement = refine;
        if (threads > 0) cfg.threads = threads;
        z2cli::finalize(cfg);
        z2cli::run_command(command, cfg, std::cout);
        return 0;
    } catch (const z2s::Error& e) {
        std::cerr << z2cli::error_document(e, config_path).dump(2) << "\n";
        return z2cli::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << z2cli::error_document(z2s::Error(z2s::ErrorCode::IoError, e.what()), config_path).dump(2)
                  << "\n";
        return 1;
    }
}
