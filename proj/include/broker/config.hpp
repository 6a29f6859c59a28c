#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "broker/engine.hpp"
#include "broker/errors.hpp"
#include "broker/trace.hpp"

namespace broker {

struct TraceConfig {
    enum class Source { File, Synthesize, Resample };
    Source source = Source::Synthesize;
    std::string path;                  // file / resample input
    std::string profile = "dataset1";  // synthesize: dataset1 | dataset2 | custom
    TraceStats custom_stats;
    SimTime horizon = kMinutesPerYear;  // synthesize / resample target
    SimTime block_len = 60;             // resample block length
    DurationDist duration;
};

struct RunConfig {
    std::vector<StrategyKind> strategies = all_strategies();
    std::uint64_t seed = 1;
};

struct ScenarioConfig {
    TraceConfig trace;
    EngineConfig engine;
    RunConfig run;
};

namespace detail {

struct KeyedValue {
    std::string value;
    std::size_t line = 0;
};

using RawConfig = std::map<std::string, KeyedValue>;  // "section.key" -> value

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "trace.source", "trace.path", "trace.profile", "trace.horizon", "trace.block_len",
        "trace.duration_log_mean", "trace.duration_log_sd", "trace.mean", "trace.sd", "trace.min",
        "trace.max", "trace.q25", "trace.q50", "trace.q75",
        "pricing.ondemand_rate", "pricing.reserved_discount", "pricing.contract_len",
        "pricing.cashback_fraction",
        "risk.weights", "risk.anomaly_window_frac", "risk.sd_multiplier", "risk.adjustment_step",
        "risk.decision_threshold", "risk.decision_threshold_mode",
        "arima.grid_max", "arima.refit_period_min", "arima.period_min", "arima.target",
        "run.strategies", "run.seed", "run.quarter_len", "run.optimiser_period_min",
        "run.event_order", "run.record_entries", "run.record_events",
        "run.bestcase_recompute_min", "run.bestcase_plan_max_requests",
    };
    return keys;
}

}  // namespace detail

// key = value lines grouped under [section] headers; `#` and `;` comments.
inline detail::RawConfig parse_config_text(std::istream& in, std::vector<std::string>& errors) {
    detail::RawConfig raw;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                errors.push_back("line " + std::to_string(lineno) + ": malformed section header");
                continue;
            }
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (section.empty()) {
            errors.push_back("line " + std::to_string(lineno) + ": key outside any [section]");
            continue;
        }
        raw[section + "." + key] = {value, lineno};
    }
    return raw;
}

// Environment overrides: BROKER_<SECTION>_<KEY>, e.g. BROKER_PRICING_ONDEMAND_RATE.
inline void apply_env_overrides(detail::RawConfig& raw) {
    for (const std::string& key : detail::known_keys()) {
        std::string env = "BROKER_";
        for (char c : key) env += c == '.' ? '_' : static_cast<char>(std::toupper(c));
        if (const char* v = std::getenv(env.c_str())) raw[key] = {v, 0};
    }
}

// Minutes with an optional unit suffix: min (default), h, d, mo, q, y.
inline SimTime parse_duration_minutes(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long n = std::stoull(s, &pos);
    std::string unit = detail::trim(s.substr(pos));
    if (unit.empty() || unit == "min" || unit == "m") return n;
    if (unit == "h") return n * kMinutesPerHour;
    if (unit == "d") return n * kMinutesPerDay;
    if (unit == "mo") return n * kMinutesPerMonth;
    if (unit == "q") return n * kMinutesPerQuarter;
    if (unit == "y") return n * kMinutesPerYear;
    throw ConfigError("unknown duration unit '" + unit + "'");
}

// Checks every key, fills defaults, and collects all problems before giving up.
inline ScenarioConfig validate_config(detail::RawConfig raw, std::vector<std::string>& errors) {
    ScenarioConfig cfg;

    auto fail = [&](const std::string& key, const std::string& msg) {
        auto it = raw.find(key);
        std::string where = it != raw.end() && it->second.line
                                ? " (line " + std::to_string(it->second.line) + ")"
                                : "";
        errors.push_back(key + where + ": " + msg);
    };
    auto take = [&](const std::string& key) -> const std::string* {
        auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second.value;
    };
    auto take_double = [&](const std::string& key, double& out) {
        if (const std::string* v = take(key)) {
            try {
                out = std::stod(*v);
            } catch (const std::exception&) {
                fail(key, "expected a number, got '" + *v + "'");
            }
        }
    };
    auto take_u64 = [&](const std::string& key, std::uint64_t& out) {
        if (const std::string* v = take(key)) {
            try {
                out = std::stoull(*v);
            } catch (const std::exception&) {
                fail(key, "expected a non-negative integer, got '" + *v + "'");
            }
        }
    };
    auto take_duration = [&](const std::string& key, SimTime& out) {
        if (const std::string* v = take(key)) {
            try {
                out = parse_duration_minutes(*v);
            } catch (const std::exception&) {
                fail(key, "expected minutes (optionally with h/d/mo/q/y suffix), got '" + *v + "'");
            }
        }
    };
    auto take_bool = [&](const std::string& key, bool& out) {
        if (const std::string* v = take(key)) {
            if (*v == "true" || *v == "1") out = true;
            else if (*v == "false" || *v == "0") out = false;
            else fail(key, "expected true/false, got '" + *v + "'");
        }
    };

    for (const auto& [key, kv] : raw) {
        const auto& known = detail::known_keys();
        if (std::find(known.begin(), known.end(), key) == known.end())
            errors.push_back(key + (kv.line ? " (line " + std::to_string(kv.line) + ")" : "") +
                             ": unknown key");
    }

    if (const std::string* v = take("trace.source")) {
        if (*v == "file") cfg.trace.source = TraceConfig::Source::File;
        else if (*v == "synthesize") cfg.trace.source = TraceConfig::Source::Synthesize;
        else if (*v == "resample") cfg.trace.source = TraceConfig::Source::Resample;
        else fail("trace.source", "must be file | synthesize | resample");
    }
    if (const std::string* v = take("trace.path")) cfg.trace.path = *v;
    if (const std::string* v = take("trace.profile")) {
        if (*v != "dataset1" && *v != "dataset2" && *v != "custom")
            fail("trace.profile", "must be dataset1 | dataset2 | custom");
        else cfg.trace.profile = *v;
    }
    take_duration("trace.horizon", cfg.trace.horizon);
    take_duration("trace.block_len", cfg.trace.block_len);
    take_double("trace.duration_log_mean", cfg.trace.duration.log_mean);
    take_double("trace.duration_log_sd", cfg.trace.duration.log_sd);
    cfg.trace.custom_stats = TraceStats{};
    take_double("trace.mean", cfg.trace.custom_stats.mean);
    take_double("trace.sd", cfg.trace.custom_stats.sd);
    take_double("trace.min", cfg.trace.custom_stats.min);
    take_double("trace.max", cfg.trace.custom_stats.max);
    take_double("trace.q25", cfg.trace.custom_stats.q25);
    take_double("trace.q50", cfg.trace.custom_stats.q50);
    take_double("trace.q75", cfg.trace.custom_stats.q75);

    take_double("pricing.ondemand_rate", cfg.engine.pricing.ondemand_rate);
    take_double("pricing.reserved_discount", cfg.engine.pricing.reserved_discount);
    take_duration("pricing.contract_len", cfg.engine.pricing.contract_len);
    take_double("pricing.cashback_fraction", cfg.engine.pricing.cashback_fraction);

    if (const std::string* v = take("risk.weights")) {
        std::stringstream ss(*v);
        std::string tok;
        std::vector<double> w;
        try {
            while (std::getline(ss, tok, ',')) w.push_back(std::stod(detail::trim(tok)));
        } catch (const std::exception&) {
            w.clear();
        }
        if (w.size() != 3) fail("risk.weights", "expected three comma-separated numbers");
        else cfg.engine.risk.weights = {w[0], w[1], w[2]};
    }
    take_double("risk.anomaly_window_frac", cfg.engine.risk.anomaly_window_frac);
    take_double("risk.sd_multiplier", cfg.engine.risk.sd_multiplier);
    take_double("risk.adjustment_step", cfg.engine.risk.adjustment_step);
    take_double("risk.decision_threshold", cfg.engine.risk.decision_threshold);
    if (const std::string* v = take("risk.decision_threshold_mode")) {
        if (*v == "geq") cfg.engine.risk.threshold_mode = ThresholdMode::Geq;
        else if (*v == "leq") cfg.engine.risk.threshold_mode = ThresholdMode::Leq;
        else fail("risk.decision_threshold_mode", "must be geq | leq");
    }

    if (const std::string* v = take("arima.grid_max")) {
        int p, d, q;
        char c1, c2;
        std::stringstream ss(*v);
        if (ss >> p >> c1 >> d >> c2 >> q && c1 == ',' && c2 == ',' && p >= 0 && d >= 0 && q >= 0)
            cfg.engine.arima.grid_max = {p, d, q};
        else
            fail("arima.grid_max", "expected p,d,q");
    }
    take_duration("arima.refit_period_min", cfg.engine.arima.refit_period_min);
    take_duration("arima.period_min", cfg.engine.arima.period_min);
    if (const std::string* v = take("arima.target")) {
        if (*v == "active") cfg.engine.arima.target = ArimaConfig::Target::Active;
        else if (*v == "arrivals") cfg.engine.arima.target = ArimaConfig::Target::Arrivals;
        else fail("arima.target", "must be active | arrivals");
    }

    if (const std::string* v = take("run.strategies")) {
        std::stringstream ss(*v);
        std::string tok;
        std::vector<StrategyKind> list;
        bool ok = true;
        while (std::getline(ss, tok, ',')) {
            if (auto k = parse_strategy(detail::trim(tok))) list.push_back(*k);
            else {
                fail("run.strategies", "unknown strategy '" + detail::trim(tok) + "'");
                ok = false;
            }
        }
        if (ok && !list.empty()) cfg.run.strategies = list;
        else if (ok) fail("run.strategies", "must name at least one strategy");
    }
    take_u64("run.seed", cfg.run.seed);
    take_duration("run.quarter_len", cfg.engine.quarter_len);
    take_duration("run.optimiser_period_min", cfg.engine.optimiser_period);
    if (const std::string* v = take("run.event_order")) {
        if (*v == "arrivals_terminations_optimiser")
            cfg.engine.event_order = EventOrder::ArrivalsTerminationsOptimiser;
        else if (*v == "terminations_arrivals_optimiser")
            cfg.engine.event_order = EventOrder::TerminationsArrivalsOptimiser;
        else
            fail("run.event_order",
                 "must be arrivals_terminations_optimiser | terminations_arrivals_optimiser");
    }
    take_bool("run.record_entries", cfg.engine.record_entries);
    take_bool("run.record_events", cfg.engine.record_events);
    take_duration("run.bestcase_recompute_min", cfg.engine.bestcase_recompute_min);
    take_u64("run.bestcase_plan_max_requests", cfg.engine.bestcase_plan_max_requests);

    // cross-field checks
    if (errors.empty()) {
        try {
            cfg.engine.validate();
        } catch (const ConfigError& e) {
            errors.push_back(e.what());
        }
        if (cfg.trace.source == TraceConfig::Source::File ||
            cfg.trace.source == TraceConfig::Source::Resample) {
            if (cfg.trace.path.empty()) errors.push_back("trace.path: required for this source");
        }
        if (cfg.trace.source == TraceConfig::Source::Synthesize && cfg.trace.horizon == 0)
            errors.push_back("trace.horizon: must be > 0");
        if (cfg.trace.profile == "custom") {
            try {
                cfg.trace.custom_stats.validate();
            } catch (const ValidationError& e) {
                errors.push_back(std::string("trace custom stats: ") + e.what());
            }
        }
    }
    return cfg;
}

inline TraceStats profile_stats(const TraceConfig& tc) {
    if (tc.profile == "dataset1") return dataset1_profile();
    if (tc.profile == "dataset2") return dataset2_profile();
    return tc.custom_stats;
}

// Fully resolved key = value echo; also the input of the config hash.
inline std::string resolved_config_text(const ScenarioConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    os << "[trace]\n";
    os << "source = "
       << (cfg.trace.source == TraceConfig::Source::File
               ? "file"
               : cfg.trace.source == TraceConfig::Source::Synthesize ? "synthesize" : "resample")
       << "\n";
    if (!cfg.trace.path.empty()) os << "path = " << cfg.trace.path << "\n";
    os << "profile = " << cfg.trace.profile << "\n";
    os << "horizon = " << cfg.trace.horizon << "\n";
    os << "block_len = " << cfg.trace.block_len << "\n";
    os << "duration_log_mean = " << num(cfg.trace.duration.log_mean) << "\n";
    os << "duration_log_sd = " << num(cfg.trace.duration.log_sd) << "\n";
    if (cfg.trace.profile == "custom") {
        const TraceStats& s = cfg.trace.custom_stats;
        os << "mean = " << num(s.mean) << "\nsd = " << num(s.sd) << "\nmin = " << num(s.min)
           << "\nmax = " << num(s.max) << "\nq25 = " << num(s.q25) << "\nq50 = " << num(s.q50)
           << "\nq75 = " << num(s.q75) << "\n";
    }
    os << "[pricing]\n";
    os << "ondemand_rate = " << num(cfg.engine.pricing.ondemand_rate) << "\n";
    os << "reserved_discount = " << num(cfg.engine.pricing.reserved_discount) << "\n";
    os << "contract_len = " << cfg.engine.pricing.contract_len << "\n";
    os << "cashback_fraction = " << num(cfg.engine.pricing.cashback_fraction) << "\n";
    os << "[risk]\n";
    os << "weights = " << num(cfg.engine.risk.weights[0]) << "," << num(cfg.engine.risk.weights[1])
       << "," << num(cfg.engine.risk.weights[2]) << "\n";
    os << "anomaly_window_frac = " << num(cfg.engine.risk.anomaly_window_frac) << "\n";
    os << "sd_multiplier = " << num(cfg.engine.risk.sd_multiplier) << "\n";
    os << "adjustment_step = " << num(cfg.engine.risk.adjustment_step) << "\n";
    os << "decision_threshold = " << num(cfg.engine.risk.decision_threshold) << "\n";
    os << "decision_threshold_mode = "
       << (cfg.engine.risk.threshold_mode == ThresholdMode::Geq ? "geq" : "leq") << "\n";
    os << "[arima]\n";
    os << "grid_max = " << cfg.engine.arima.grid_max.p << "," << cfg.engine.arima.grid_max.d << ","
       << cfg.engine.arima.grid_max.q << "\n";
    os << "refit_period_min = " << cfg.engine.arima.refit_period_min << "\n";
    os << "period_min = " << cfg.engine.arima.period_min << "\n";
    os << "target = "
       << (cfg.engine.arima.target == ArimaConfig::Target::Active ? "active" : "arrivals") << "\n";
    os << "[run]\n";
    os << "strategies = ";
    for (std::size_t i = 0; i < cfg.run.strategies.size(); ++i)
        os << (i ? "," : "") << strategy_name(cfg.run.strategies[i]);
    os << "\n";
    os << "seed = " << cfg.run.seed << "\n";
    os << "quarter_len = " << cfg.engine.quarter_len << "\n";
    os << "optimiser_period_min = " << cfg.engine.optimiser_period << "\n";
    os << "event_order = "
       << (cfg.engine.event_order == EventOrder::ArrivalsTerminationsOptimiser
               ? "arrivals_terminations_optimiser"
               : "terminations_arrivals_optimiser")
       << "\n";
    os << "record_entries = " << (cfg.engine.record_entries ? "true" : "false") << "\n";
    os << "record_events = " << (cfg.engine.record_events ? "true" : "false") << "\n";
    os << "bestcase_recompute_min = " << cfg.engine.bestcase_recompute_min << "\n";
    os << "bestcase_plan_max_requests = " << cfg.engine.bestcase_plan_max_requests << "\n";
    return os.str();
}

}  // namespace broker
