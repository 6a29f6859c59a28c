#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "broker/analysis.hpp"
#include "broker/engine.hpp"
#include "broker/scenario.hpp"

namespace broker {

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

// Reads back a t1,t2,rho,omega,psi,utilization file.
inline std::vector<ProfitReport> load_reports_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "t1,t2,rho,omega,psi,utilization")
        throw ValidationError(path.string() + ": unexpected header");
    std::vector<ProfitReport> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = detail::split_csv_row(line);
        if (f.size() != 6) throw ValidationError(path.string() + ": malformed row: " + line);
        ProfitReport r;
        r.t1 = std::stoull(f[0]);
        r.t2 = std::stoull(f[1]);
        r.rho = std::stod(f[2]);
        r.omega = std::stod(f[3]);
        if (!f[4].empty()) r.psi = std::stod(f[4]);
        r.utilization = std::stod(f[5]);
        out.push_back(r);
    }
    return out;
}

struct AuxRow {
    SimTime quarter_start = 0;
    double mean_usage = 0.0;
    double mean_risk = 0.0;
};

inline std::vector<AuxRow> load_aux_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "quarter_start,mean_usage,mean_risk")
        throw ValidationError(path.string() + ": unexpected header");
    std::vector<AuxRow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = detail::split_csv_row(line);
        if (f.size() != 3) throw ValidationError(path.string() + ": malformed row: " + line);
        out.push_back({std::stoull(f[0]), std::stod(f[1]), std::stod(f[2])});
    }
    return out;
}

inline std::vector<ForecastLogRow> load_forecasts_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "period_start,forecast,actual")
        throw ValidationError(path.string() + ": unexpected header");
    std::vector<ForecastLogRow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = detail::split_csv_row(line);
        if (f.size() != 3) throw ValidationError(path.string() + ": malformed row: " + line);
        out.push_back({std::stoull(f[0]), std::stod(f[1]), std::stod(f[2])});
    }
    return out;
}

// One simulation run directory as written by write_scenario_outputs.
struct LoadedRun {
    std::filesystem::path dir;
    std::uint64_t seed = 0;
    std::map<std::string, std::vector<ProfitReport>> quarters;  // strategy -> series
    std::map<std::string, std::vector<AuxRow>> aux;
    std::vector<ForecastLogRow> forecasts;  // auto_arima, if present
};

inline LoadedRun load_run(const std::filesystem::path& manifest_or_dir) {
    namespace fs = std::filesystem;
    fs::path dir = manifest_or_dir;
    if (dir.filename() == "manifest.json") dir = dir.parent_path();
    fs::path manifest = dir / "manifest.json";
    std::ifstream in(manifest);
    if (!in) throw ValidationError("cannot open " + manifest.string());
    nlohmann::json j = nlohmann::json::parse(in);
    LoadedRun run;
    run.dir = dir;
    run.seed = j.value("seed", 0ull);
    for (const auto& s : j.at("strategies")) {
        std::string name = s.get<std::string>();
        run.quarters[name] = load_reports_csv(dir / ("quarters_" + name + ".csv"));
        run.aux[name] = load_aux_csv(dir / ("aux_" + name + ".csv"));
    }
    fs::path fc = dir / "forecasts_auto_arima.csv";
    if (fs::exists(fc)) run.forecasts = load_forecasts_csv(fc);
    return run;
}

// Cross-run post-processing: strategy comparison, min-max normalized profit,
// profit-difference correlations, and forecast estimation error.
inline void analyze_runs(const std::vector<std::filesystem::path>& manifests,
                         const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (manifests.empty()) throw ValidationError("analyze_runs: no runs given");
    std::vector<LoadedRun> runs;
    for (const fs::path& m : manifests) runs.push_back(load_run(m));
    fs::create_directories(out_dir);

    // quarterly profit-margin series per strategy, concatenated across runs
    std::map<std::string, std::vector<double>> psi;
    for (const LoadedRun& run : runs)
        for (const auto& [name, series] : run.quarters)
            for (const ProfitReport& q : series) psi[name].push_back(q.psi.value_or(0.0));

    {
        std::ofstream os(out_dir / "comparison.csv");
        os << "strategy,highest_psi,lowest_psi,mean_psi,n_quarters\n";
        for (const auto& [name, series] : psi) {
            ComparisonTable t = compare_strategies({{name, series}});
            const StrategySummary& r = t.rows.front();
            os << name << ',' << detail::fmt_num(r.highest) << ',' << detail::fmt_num(r.lowest)
               << ',' << detail::fmt_num(r.mean) << ',' << series.size() << '\n';
        }
    }

    {
        std::ofstream os(out_dir / "normalized_profit.csv");
        os << "strategy,quarter_index,psi,normalized_psi\n";
        for (const auto& [name, series] : psi) {
            std::vector<double> norm = minmax_normalize(series);
            for (std::size_t i = 0; i < series.size(); ++i)
                os << name << ',' << i << ',' << detail::fmt_num(series[i]) << ','
                   << detail::fmt_num(norm[i]) << '\n';
        }
    }

    // profit difference (best_case − pure_reserved) per quarter against the
    // per-quarter mean request usage and mean aggregated risk
    {
        std::ofstream os(out_dir / "correlations.csv");
        os << "target,method,coefficient,p_value,n\n";
        std::vector<double> diff, usage, risk;
        for (const LoadedRun& run : runs) {
            auto bc = run.quarters.find("best_case");
            auto pr = run.quarters.find("pure_reserved");
            if (bc == run.quarters.end() || pr == run.quarters.end()) continue;
            std::size_t n = std::min(bc->second.size(), pr->second.size());
            auto ubc = run.aux.find("best_case");
            auto rrt = run.aux.find("risk_taking");
            for (std::size_t i = 0; i < n; ++i) {
                diff.push_back(bc->second[i].psi.value_or(0.0) -
                               pr->second[i].psi.value_or(0.0));
                usage.push_back(ubc != run.aux.end() && i < ubc->second.size()
                                    ? ubc->second[i].mean_usage
                                    : 0.0);
                risk.push_back(rrt != run.aux.end() && i < rrt->second.size()
                                   ? rrt->second[i].mean_risk
                                   : 0.0);
            }
        }
        auto emit = [&](const char* target, std::span<const double> x) {
            for (CorrelationMethod m : {CorrelationMethod::Pearson, CorrelationMethod::Spearman,
                                        CorrelationMethod::Kendall}) {
                try {
                    CorrelationResult r = correlate(x, diff, m);
                    os << target << ',' << correlation_method_name(m) << ','
                       << detail::fmt_num(r.coefficient) << ',' << detail::fmt_num(r.p_value)
                       << ',' << diff.size() << '\n';
                } catch (const ValidationError&) {
                    os << target << ',' << correlation_method_name(m) << ",,," << diff.size()
                       << '\n';
                }
            }
        };
        if (diff.size() >= 3) {
            emit("mean_usage", usage);
            emit("mean_risk", risk);
        }
    }

    {
        std::ofstream os(out_dir / "estimation_error.csv");
        os << "period_start,forecast,actual,error_pct,excluded\n";
        for (const LoadedRun& run : runs) {
            if (run.forecasts.empty()) continue;
            std::vector<double> f, a;
            for (const ForecastLogRow& r : run.forecasts) {
                f.push_back(r.forecast);
                a.push_back(r.actual);
            }
            std::vector<double> err = estimation_error_series(f, a);
            for (std::size_t i = 0; i < err.size(); ++i) {
                bool excluded = !std::isfinite(err[i]);
                os << run.forecasts[i].period_start << ',' << detail::fmt_num(f[i]) << ','
                   << detail::fmt_num(a[i]) << ','
                   << (excluded ? "inf" : detail::fmt_num(err[i])) << ','
                   << (excluded ? 1 : 0) << '\n';
            }
        }
    }
}

}  // namespace broker
