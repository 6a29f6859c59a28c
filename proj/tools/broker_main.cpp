// Command-line front end: simulate | gen-trace | analyze.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "broker/config.hpp"
#include "broker/reporting.hpp"
#include "broker/scenario.hpp"

namespace {

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, const std::string& strategies) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config file " << config_path << "\n";
        return 1;
    }
    std::vector<std::string> errors;
    broker::detail::RawConfig raw = broker::parse_config_text(in, errors);
    broker::apply_env_overrides(raw);
    if (seed) raw["run.seed"] = {std::to_string(*seed), 0};
    if (!strategies.empty()) raw["run.strategies"] = {strategies, 0};
    broker::ScenarioConfig cfg = broker::validate_config(raw, errors);
    if (!errors.empty()) {
        for (const std::string& e : errors) std::cerr << "config error: " << e << "\n";
        return 1;
    }
    auto t0 = std::chrono::steady_clock::now();
    broker::ScenarioResult res = broker::run_scenario(cfg);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    broker::RunManifest man = broker::write_scenario_outputs(res, out_dir, wall);
    std::cout << "wrote " << man.files.size() + 1 << " files to " << out_dir << " (config hash "
              << man.config_hash << ", " << wall << "s)\n";
    return 0;
}

int cmd_gen_trace(const std::string& profile, const std::string& horizon, std::uint64_t seed,
                  const std::string& out_path) {
    broker::TraceStats stats;
    if (profile == "dataset1") stats = broker::dataset1_profile();
    else if (profile == "dataset2") stats = broker::dataset2_profile();
    else {
        std::cerr << "error: profile must be dataset1 or dataset2\n";
        return 1;
    }
    broker::SimTime h = broker::parse_duration_minutes(horizon);
    if (h == 0) {
        std::cerr << "error: horizon must be > 0\n";
        return 1;
    }
    broker::Trace t = broker::synthesize_trace(stats, broker::DurationDist{}, h, seed);
    std::ofstream os(out_path);
    if (!os) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return 1;
    }
    broker::save_trace(t, os);
    std::cout << "wrote " << t.requests.size() << " requests over " << h << " minutes to "
              << out_path << "\n";
    return 0;
}

int cmd_analyze(const std::vector<std::string>& runs, const std::string& out_dir) {
    std::vector<std::filesystem::path> paths(runs.begin(), runs.end());
    broker::analyze_runs(paths, out_dir);
    std::cout << "wrote analysis outputs to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven benchmark of reserved-instance placement strategies for a cloud "
                 "VM broker"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Run the configured strategies over one workload");
    std::string config_path, out_dir = "out", strategies;
    std::optional<std::uint64_t> seed;
    sim->add_option("--config", config_path, "Scenario configuration file")->required();
    sim->add_option("--seed", seed, "Override run.seed");
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--strategies", strategies, "Comma-separated strategy subset");

    auto* gen = app.add_subcommand("gen-trace", "Synthesize a workload trace CSV");
    std::string profile, horizon, trace_out;
    std::uint64_t gen_seed = 1;
    gen->add_option("--profile", profile, "dataset1 | dataset2")->required();
    gen->add_option("--horizon", horizon, "Length in minutes (h/d/mo/q/y suffix ok)")->required();
    gen->add_option("--seed", gen_seed, "Random seed");
    gen->add_option("--out", trace_out, "Output CSV path")->required();

    auto* ana = app.add_subcommand("analyze", "Aggregate one or more run directories");
    std::vector<std::string> run_paths;
    std::string ana_out = "analysis";
    ana->add_option("--runs", run_paths, "Run directories or manifest.json paths")->required();
    ana->add_option("--out", ana_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, seed, out_dir, strategies);
        if (gen->parsed()) return cmd_gen_trace(profile, horizon, gen_seed, trace_out);
        if (ana->parsed()) return cmd_analyze(run_paths, ana_out);
    } catch (const broker::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
