#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "broker/analysis.hpp"
#include "broker/config.hpp"
#include "broker/engine.hpp"

namespace broker {

struct StrategyRun {
    StrategyKind strategy;
    SimResult result;
    std::vector<ProfitReport> quarters;
};

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<StrategyRun> runs;
};

// Builds the workload feed a scenario asks for. A synthesized feed streams;
// file and resampled feeds are materialized once and shared by strategies.
class TraceFeed {
public:
    explicit TraceFeed(const TraceConfig& tc, std::uint64_t seed) {
        switch (tc.source) {
            case TraceConfig::Source::File:
                trace_ = load_trace(std::filesystem::path(tc.path));
                source_ = std::make_unique<VectorTraceSource>(trace_);
                break;
            case TraceConfig::Source::Resample: {
                Trace base = load_trace(std::filesystem::path(tc.path));
                trace_ = resample_trace(base, tc.horizon, seed, tc.block_len);
                source_ = std::make_unique<VectorTraceSource>(trace_);
                break;
            }
            case TraceConfig::Source::Synthesize:
                source_ = std::make_unique<SyntheticTraceSource>(profile_stats(tc), tc.duration,
                                                                 tc.horizon, seed);
                break;
        }
    }

    TraceSource& source() { return *source_; }

private:
    Trace trace_;  // backing storage for non-streaming feeds
    std::unique_ptr<TraceSource> source_;
};

inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    ScenarioResult out;
    out.config = cfg;
    TraceFeed feed(cfg.trace, cfg.run.seed);
    for (StrategyKind s : cfg.run.strategies) {
        feed.source().reset();
        Simulation sim(cfg.engine, s, cfg.run.seed);
        StrategyRun run;
        run.strategy = s;
        run.result = sim.run(feed.source());
        run.quarters = run.result.ledger.quarterly_series(run.result.horizon, cfg.engine.quarter_len);
        out.runs.push_back(std::move(run));
    }
    return out;
}

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace detail

// comparison.csv: one row per strategy with headline profit-margin figures.
inline void export_comparison_csv(std::ostream& os, const ScenarioResult& res) {
    os << "strategy,highest_psi,lowest_psi,mean_psi,overall_psi,overall_rho,overall_omega,"
          "mean_utilization,reserved_purchases,ondemand_provisions,total_requests\n";
    for (const StrategyRun& run : res.runs) {
        std::vector<double> psi;
        double util_sum = 0;
        for (const ProfitReport& q : run.quarters) {
            psi.push_back(q.psi.value_or(0.0));
            util_sum += q.utilization;
        }
        ProfitReport overall =
            run.result.ledger.profit_margin(0, run.result.ledger.minutes_closed());
        StrategySummary sm;
        if (!psi.empty()) {
            ComparisonTable t = compare_strategies({{strategy_name(run.strategy), psi}});
            sm = t.rows.front();
        }
        os << strategy_name(run.strategy) << ',' << detail::fmt_num(sm.highest) << ','
           << detail::fmt_num(sm.lowest) << ',' << detail::fmt_num(sm.mean) << ','
           << detail::fmt_num(overall.psi.value_or(0.0)) << ',' << detail::fmt_num(overall.rho)
           << ',' << detail::fmt_num(overall.omega) << ','
           << detail::fmt_num(psi.empty() ? 0.0 : util_sum / static_cast<double>(psi.size()))
           << ',' << run.result.reserved_purchases << ',' << run.result.ondemand_provisions << ','
           << run.result.total_requests << '\n';
    }
}

// forecasts CSV: period_start,forecast,actual
inline void export_forecasts_csv(std::ostream& os, const std::vector<ForecastLogRow>& rows) {
    os << "period_start,forecast,actual\n";
    for (const ForecastLogRow& r : rows)
        os << r.period_start << ',' << detail::fmt_num(r.forecast) << ','
           << detail::fmt_num(r.actual) << '\n';
}

// aux CSV: per-quarter mean usage and mean aggregated risk.
inline void export_aux_csv(std::ostream& os, const std::vector<QuarterAux>& quarters,
                           SimTime quarter_len) {
    os << "quarter_start,mean_usage,mean_risk\n";
    for (std::size_t i = 0; i < quarters.size(); ++i)
        os << i * quarter_len << ',' << detail::fmt_num(quarters[i].mean_usage()) << ','
           << detail::fmt_num(quarters[i].mean_risk()) << '\n';
}

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> strategies;
    std::vector<std::string> files;
    double wall_seconds = 0.0;
    std::string version = "1.0.0";
};

// Writes every per-strategy artifact plus manifest.json into out_dir.
// On failure the partially written directory contents are removed.
inline RunManifest write_scenario_outputs(const ScenarioResult& res,
                                          const std::filesystem::path& out_dir,
                                          double wall_seconds = 0.0) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    RunManifest man;
    man.seed = res.config.run.seed;
    man.wall_seconds = wall_seconds;
    std::string resolved = resolved_config_text(res.config);
    {
        std::ostringstream h;
        h << std::hex << fnv1a(resolved);
        man.config_hash = h.str();
    }
    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, auto&& writer) {
        fs::path p = out_dir / name;
        std::ofstream os(p);
        if (!os) throw ValidationError("cannot write " + p.string());
        writer(os);
        written.push_back(p);
        man.files.push_back(name);
    };
    try {
        emit("config.resolved.ini", [&](std::ostream& os) { os << resolved; });
        for (const StrategyRun& run : res.runs) {
            std::string s = strategy_name(run.strategy);
            man.strategies.push_back(s);
            emit("quarters_" + s + ".csv",
                 [&](std::ostream& os) { export_reports_csv(os, run.quarters); });
            emit("aux_" + s + ".csv", [&](std::ostream& os) {
                export_aux_csv(os, run.result.quarters, res.config.engine.quarter_len);
            });
            if (res.config.engine.record_entries)
                emit("ledger_" + s + ".csv",
                     [&](std::ostream& os) { run.result.ledger.export_csv(os); });
            if (run.strategy == StrategyKind::AutoArima)
                emit("forecasts_" + s + ".csv",
                     [&](std::ostream& os) { export_forecasts_csv(os, run.result.forecast_log); });
        }
        emit("comparison.csv", [&](std::ostream& os) { export_comparison_csv(os, res); });

        nlohmann::json j{{"config_hash", man.config_hash},
                         {"seed", man.seed},
                         {"strategies", man.strategies},
                         {"files", man.files},
                         {"wall_seconds", man.wall_seconds},
                         {"version", man.version}};
        std::ofstream os(out_dir / "manifest.json");
        if (!os) throw ValidationError("cannot write manifest.json");
        os << j.dump(2) << '\n';
    } catch (...) {
        for (const fs::path& p : written) fs::remove(p);
        fs::remove(out_dir / "manifest.json");
        throw;
    }
    return man;
}

}  // namespace broker
