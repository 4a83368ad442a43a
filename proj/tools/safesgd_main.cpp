// Command-line front end: run, privacy-sweep, estimate, attack, rvc-debug.

#include <CLI11.hpp>

#include "safesgd/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Byzantine-resilient private decentralized SGD simulator"};
    app.require_subcommand(1);

    safesgd::cli::CliOptions opts;
    std::string out_dir, rvc_mode;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "Path to a key=value config file")->required();
        sub->add_option("--out-dir", out_dir, "Override the configured output directory");
        sub->add_option("--seed", seed, "Override the configured master seed");
    };

    auto* run = app.add_subcommand("run", "Run the decentralized training loop");
    add_common(run);
    run->add_option("--rvc-mode", rvc_mode, "Aggregation mode override")
        ->check(CLI::IsMember({"exact", "coordinate-wise"}));

    auto* sweep = app.add_subcommand("privacy-sweep", "Emit privacy budgets over a sigma grid");
    add_common(sweep);
    double sigma_min = 1.0, sigma_max = 5.0;
    int steps = 401;
    sweep->add_option("--sigma-min", sigma_min, "Smallest sigma in the sweep");
    sweep->add_option("--sigma-max", sigma_max, "Largest sigma in the sweep");
    sweep->add_option("--steps", steps, "Number of sweep rows");

    auto* estimate = app.add_subcommand("estimate", "Estimate G and L' by local training");
    add_common(estimate);

    auto* attack = app.add_subcommand("attack", "Run paired gradient-inversion attacks");
    add_common(attack);

    auto* debug = app.add_subcommand("rvc-debug", "Dump a Tukey-depth landscape grid");
    add_common(debug);

    CLI11_PARSE(app, argc, argv);

    auto* sub = app.get_subcommands().front();
    if (sub->count("--out-dir")) opts.out_dir = out_dir;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--rvc-mode")) opts.rvc_mode = rvc_mode;

    if (sub == run) return safesgd::cli::cmd_run(opts);
    if (sub == sweep) return safesgd::cli::cmd_privacy_sweep(opts, sigma_min, sigma_max, steps);
    if (sub == estimate) return safesgd::cli::cmd_estimate(opts);
    if (sub == attack) return safesgd::cli::cmd_attack(opts);
    if (sub == debug) return safesgd::cli::cmd_rvc_debug(opts);
    return 1;
}
