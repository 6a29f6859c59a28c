#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "broker/config.hpp"

using namespace broker;

namespace {

ScenarioConfig parse_ok(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> errors;
    detail::RawConfig raw = parse_config_text(in, errors);
    ScenarioConfig cfg = validate_config(raw, errors);
    std::string first = errors.empty() ? std::string() : errors.front();
    REQUIRE_MESSAGE(errors.empty(), first);
    return cfg;
}

std::vector<std::string> parse_errors(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> errors;
    detail::RawConfig raw = parse_config_text(in, errors);
    validate_config(raw, errors);
    return errors;
}

}  // namespace

TEST_CASE("minimal config applies the documented defaults") {
    ScenarioConfig cfg = parse_ok("[trace]\nsource = file\npath = /tmp/x.csv\n");
    CHECK(cfg.engine.pricing.reserved_discount == doctest::Approx(0.60));
    CHECK(cfg.engine.pricing.contract_len == kMinutesPerQuarter);
    CHECK(cfg.engine.optimiser_period == 1);
    CHECK(cfg.engine.risk.decision_threshold == doctest::Approx(0.5));
    CHECK(cfg.run.strategies.size() == 5);
    CHECK(cfg.run.seed == 1);
}

TEST_CASE("unknown keys and strategies are rejected") {
    auto errs = parse_errors("[trace]\nsource = file\npath = x\nbogus = 1\n");
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("unknown key") != std::string::npos);
    CHECK(errs[0].find("trace.bogus") != std::string::npos);

    errs = parse_errors("[trace]\nsource = synthesize\n[run]\nstrategies = quantum\n");
    REQUIRE_FALSE(errs.empty());
    CHECK(errs[0].find("quantum") != std::string::npos);
}

TEST_CASE("errors are aggregated and line-referenced") {
    auto errs = parse_errors(
        "[trace]\n"
        "source = teleport\n"
        "[pricing]\n"
        "ondemand_rate = fast\n"
        "reserved_discount = -1\n");
    CHECK(errs.size() >= 2);
    bool has_line = false;
    for (const std::string& e : errs)
        if (e.find("line ") != std::string::npos) has_line = true;
    CHECK(has_line);
}

TEST_CASE("negative discount fails validation") {
    auto errs = parse_errors(
        "[trace]\nsource = synthesize\n[pricing]\nreserved_discount = -0.2\n");
    REQUIRE_FALSE(errs.empty());
}

TEST_CASE("duration suffixes") {
    CHECK(parse_duration_minutes("90") == 90);
    CHECK(parse_duration_minutes("2h") == 120);
    CHECK(parse_duration_minutes("1d") == 1440);
    CHECK(parse_duration_minutes("1mo") == 43200);
    CHECK(parse_duration_minutes("1q") == 129600);
    CHECK(parse_duration_minutes("1y") == 518400);
    CHECK_THROWS_AS(parse_duration_minutes("3weeks"), ConfigError);
}

TEST_CASE("section values parse into the engine config") {
    ScenarioConfig cfg = parse_ok(
        "[trace]\nsource = synthesize\nprofile = dataset2\nhorizon = 1d\n"
        "[pricing]\nondemand_rate = 2.5\nreserved_discount = 0.5\ncontract_len = 4h\n"
        "[risk]\nweights = 0.2, 0.3, 0.5\ndecision_threshold_mode = leq\n"
        "[arima]\ngrid_max = 2,1,2\ntarget = arrivals\n"
        "[run]\nstrategies = pure_reserved,best_case\nseed = 99\nrecord_entries = false\n");
    CHECK(cfg.trace.profile == "dataset2");
    CHECK(cfg.trace.horizon == 1440);
    CHECK(cfg.engine.pricing.ondemand_rate == doctest::Approx(2.5));
    CHECK(cfg.engine.pricing.contract_len == 240);
    CHECK(cfg.engine.risk.weights[2] == doctest::Approx(0.5));
    CHECK(cfg.engine.risk.threshold_mode == ThresholdMode::Leq);
    CHECK(cfg.engine.arima.grid_max.p == 2);
    CHECK(cfg.engine.arima.target == ArimaConfig::Target::Arrivals);
    CHECK(cfg.run.strategies == std::vector<StrategyKind>{StrategyKind::PureReserved,
                                                          StrategyKind::BestCase});
    CHECK(cfg.run.seed == 99);
    CHECK_FALSE(cfg.engine.record_entries);
}

TEST_CASE("file and resample sources require a path") {
    auto errs = parse_errors("[trace]\nsource = resample\n");
    REQUIRE_FALSE(errs.empty());
    CHECK(errs[0].find("trace.path") != std::string::npos);
}

TEST_CASE("environment overrides mirror config keys") {
    setenv("BROKER_PRICING_ONDEMAND_RATE", "3.75", 1);
    setenv("BROKER_RUN_SEED", "1234", 1);
    std::istringstream in("[trace]\nsource = synthesize\n");
    std::vector<std::string> errors;
    detail::RawConfig raw = parse_config_text(in, errors);
    apply_env_overrides(raw);
    ScenarioConfig cfg = validate_config(raw, errors);
    unsetenv("BROKER_PRICING_ONDEMAND_RATE");
    unsetenv("BROKER_RUN_SEED");
    REQUIRE(errors.empty());
    CHECK(cfg.engine.pricing.ondemand_rate == doctest::Approx(3.75));
    CHECK(cfg.run.seed == 1234);
}

TEST_CASE("resolved text echoes every default and reparses unchanged") {
    ScenarioConfig cfg = parse_ok("[trace]\nsource = synthesize\n");
    std::string text = resolved_config_text(cfg);
    CHECK(text.find("reserved_discount = 0.6") != std::string::npos);
    CHECK(text.find("contract_len = 129600") != std::string::npos);
    CHECK(text.find("decision_threshold_mode = geq") != std::string::npos);
    // round trip: parsing the echo reproduces the identical echo
    ScenarioConfig cfg2 = parse_ok(text);
    CHECK(resolved_config_text(cfg2) == text);
}

TEST_CASE("custom profile requires consistent stats") {
    auto errs = parse_errors(
        "[trace]\nsource = synthesize\nprofile = custom\n"
        "mean = 5\nsd = 2\nmin = 0\nmax = 50\nq25 = 9\nq50 = 4\nq75 = 12\n");
    REQUIRE_FALSE(errs.empty());  // q25 > q50
}

TEST_CASE("malformed syntax is reported") {
    auto errs = parse_errors("[trace\nsource = synthesize\n");
    REQUIRE_FALSE(errs.empty());
    errs = parse_errors("key_without_section = 1\n");
    REQUIRE_FALSE(errs.empty());
    errs = parse_errors("[trace]\nno equals sign here\n");
    REQUIRE_FALSE(errs.empty());
}
