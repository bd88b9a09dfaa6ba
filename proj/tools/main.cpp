#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <thread>

#include "scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Talbot lattice simulator: carpet slices, trap tables and single-atom register Monte Carlo"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int trials = 0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    bool seed_given = false;
    bool trials_given = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario JSON file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory (overrides the scenario)");
        cmd->add_option("--seed", seed, "master seed override")->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--trials", trials, "Monte Carlo trial count override")->each([&](const std::string&) {
            trials_given = true;
        });
        cmd->add_option("--threads", threads, "worker thread count");
    };

    add_common(app.add_subcommand("carpet", "compute and dump intensity slices over the configured z range"));
    add_common(app.add_subcommand("traps", "extract a trap table per configured Talbot plane"));
    add_common(app.add_subcommand("load", "stochastic loading statistics over Monte Carlo trials"));
    add_common(app.add_subcommand("assemble", "end-to-end loading plus defect-free assembly trials"));
    add_common(app.add_subcommand("interleave", "interleaved sublattice geometry and addressing statistics"));
    add_common(app.add_subcommand("sweep", "separation validation over a list of minimum distances"));

    CLI11_PARSE(app, argc, argv);

    talbot::cli::RunOptions options;
    options.out_dir = out_dir;
    options.threads = threads;
    if (seed_given) options.seed_override = seed;
    if (trials_given) options.trials_override = trials;

    return talbot::cli::run_command(app.get_subcommands().front()->get_name(), config_path, options);
}
