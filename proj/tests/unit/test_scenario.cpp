#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "broker/config.hpp"
#include "broker/reporting.hpp"
#include "broker/scenario.hpp"

using namespace broker;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_scenario() {
    ScenarioConfig cfg;
    cfg.trace.source = TraceConfig::Source::Synthesize;
    cfg.trace.profile = "custom";
    cfg.trace.custom_stats = {0, 2, 3, 0, 60, 0, 1, 3};
    cfg.trace.horizon = 2 * kMinutesPerDay;
    cfg.engine.pricing.contract_len = kMinutesPerDay;
    cfg.engine.quarter_len = kMinutesPerDay;
    cfg.engine.arima.period_min = 60;
    cfg.engine.arima.refit_period_min = 720;
    cfg.run.seed = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run_scenario produces one run per strategy over the same trace") {
    ScenarioConfig cfg = tiny_scenario();
    ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.runs.size() == 5);
    std::uint64_t reqs = res.runs[0].result.total_requests;
    CHECK(reqs > 0);
    for (const StrategyRun& run : res.runs) {
        CHECK(run.result.total_requests == reqs);
        CHECK(run.quarters.size() == 2);
    }
}

TEST_CASE("scenario outputs: files, manifest, and determinism") {
    fs::path dir1 = fs::temp_directory_path() / "broker_test_run_a";
    fs::path dir2 = fs::temp_directory_path() / "broker_test_run_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    ScenarioConfig cfg = tiny_scenario();

    RunManifest m1 = write_scenario_outputs(run_scenario(cfg), dir1);
    RunManifest m2 = write_scenario_outputs(run_scenario(cfg), dir2);
    CHECK(m1.config_hash == m2.config_hash);
    REQUIRE(m1.files == m2.files);
    for (const std::string& f : m1.files) CHECK(slurp(dir1 / f) == slurp(dir2 / f));

    // loaders round-trip the outputs
    LoadedRun run = load_run(dir1 / "manifest.json");
    CHECK(run.seed == cfg.run.seed);
    CHECK(run.quarters.size() == 5);
    CHECK(run.quarters.at("pure_reserved").size() == 2);
    bool forecasts_missing =
        run.forecasts.empty() && fs::exists(dir1 / "forecasts_auto_arima.csv");
    CHECK_FALSE(forecasts_missing);

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("analyze_runs writes the four analysis outputs") {
    fs::path run_dir = fs::temp_directory_path() / "broker_test_run_c";
    fs::path out_dir = fs::temp_directory_path() / "broker_test_analysis";
    fs::remove_all(run_dir);
    fs::remove_all(out_dir);
    write_scenario_outputs(run_scenario(tiny_scenario()), run_dir);
    analyze_runs({run_dir}, out_dir);
    for (const char* f :
         {"comparison.csv", "correlations.csv", "normalized_profit.csv", "estimation_error.csv"})
        CHECK(fs::exists(out_dir / f));
    std::string cmp = slurp(out_dir / "comparison.csv");
    CHECK(cmp.find("best_case") != std::string::npos);
    CHECK(cmp.find("risk_taking") != std::string::npos);
    fs::remove_all(run_dir);
    fs::remove_all(out_dir);
}

TEST_CASE("profit report csv round trip") {
    fs::path p = fs::temp_directory_path() / "broker_test_reports.csv";
    std::vector<ProfitReport> reports{{0, 10, 100.0, 40.0, 60.0, 0.5},
                                      {10, 20, 0.0, 5.0, std::nullopt, 0.0}};
    {
        std::ofstream os(p);
        export_reports_csv(os, reports);
    }
    std::vector<ProfitReport> back = load_reports_csv(p);
    REQUIRE(back.size() == 2);
    CHECK(back[0].rho == doctest::Approx(100.0));
    CHECK(back[0].psi.value() == doctest::Approx(60.0));
    CHECK_FALSE(back[1].psi.has_value());
    fs::remove(p);
}
