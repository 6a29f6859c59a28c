#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <string_view>
#include <vector>

#include "broker/accounting.hpp"
#include "broker/domain.hpp"
#include "broker/errors.hpp"
#include "broker/forecast.hpp"
#include "broker/risk.hpp"
#include "broker/rng.hpp"
#include "broker/trace.hpp"

namespace broker {

enum class StrategyKind { RiskTaking, NoRiskAdjustment, AutoArima, PureReserved, BestCase };

inline const char* strategy_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::RiskTaking: return "risk_taking";
        case StrategyKind::NoRiskAdjustment: return "no_risk_adjustment";
        case StrategyKind::AutoArima: return "auto_arima";
        case StrategyKind::PureReserved: return "pure_reserved";
        case StrategyKind::BestCase: return "best_case";
    }
    return "?";
}

inline std::optional<StrategyKind> parse_strategy(std::string_view s) {
    if (s == "risk_taking") return StrategyKind::RiskTaking;
    if (s == "no_risk_adjustment") return StrategyKind::NoRiskAdjustment;
    if (s == "auto_arima") return StrategyKind::AutoArima;
    if (s == "pure_reserved") return StrategyKind::PureReserved;
    if (s == "best_case") return StrategyKind::BestCase;
    return std::nullopt;
}

inline const std::vector<StrategyKind>& all_strategies() {
    static const std::vector<StrategyKind> v{
        StrategyKind::RiskTaking, StrategyKind::NoRiskAdjustment, StrategyKind::AutoArima,
        StrategyKind::PureReserved, StrategyKind::BestCase};
    return v;
}

enum class EventOrder { ArrivalsTerminationsOptimiser, TerminationsArrivalsOptimiser };

struct EngineConfig {
    PricingConfig pricing;
    RiskConfig risk;
    ArimaConfig arima;
    SimTime optimiser_period = 1;
    EventOrder event_order = EventOrder::ArrivalsTerminationsOptimiser;
    SimTime quarter_len = kMinutesPerQuarter;
    bool record_entries = true;
    bool record_events = false;
    // How often the perfect-information oracle re-evaluates its reserved
    // capacity target. 1 = every optimiser pass.
    SimTime bestcase_recompute_min = 60;
    // Traces with at most this many requests are planned offline by the
    // perfect-information oracle (local search over the full decision
    // sequence); larger traces fall back to the streaming capacity heuristic.
    std::uint64_t bestcase_plan_max_requests = 64;

    void validate() const {
        pricing.validate();
        risk.validate();
        if (optimiser_period == 0) throw ConfigError("optimiser_period must be > 0");
        if (quarter_len == 0) throw ConfigError("quarter_len must be > 0");
        if (bestcase_recompute_min == 0)
            throw ConfigError("bestcase_recompute_min must be > 0");
        if (arima.period_min == 0 || arima.refit_period_min == 0)
            throw ConfigError("arima periods must be > 0");
        if (arima.refit_period_min % arima.period_min != 0)
            throw ConfigError("arima refit period must be a multiple of the aggregation period");
    }
};

struct ForecastLogRow {
    SimTime period_start;
    double forecast;
    double actual;
};

// Per-reporting-quarter aggregates used by the correlation analyses.
struct QuarterAux {
    double usage_sum = 0.0;   // total served minutes of requests terminating in the quarter
    std::uint64_t usage_cnt = 0;
    double risk_sum = 0.0;    // aggregated risk over optimiser passes with pending work
    std::uint64_t risk_cnt = 0;

    double mean_usage() const { return usage_cnt ? usage_sum / static_cast<double>(usage_cnt) : 0; }
    double mean_risk() const { return risk_cnt ? risk_sum / static_cast<double>(risk_cnt) : 0; }
};

struct SimResult {
    SimTime horizon = 0;
    Ledger ledger{true};
    RequestDB request_db{false};
    std::vector<QuarterAux> quarters;
    std::vector<ForecastLogRow> forecast_log;  // Auto-ARIMA only
    std::uint64_t total_requests = 0;
    std::uint64_t reserved_purchases = 0;
    std::uint64_t ondemand_provisions = 0;
};

// One full simulation of a single strategy over one trace. State mutation is
// single-threaded; independent scenarios can run on separate threads.
class Simulation {
public:
    Simulation(EngineConfig cfg, StrategyKind strategy, std::uint64_t seed)
        : cfg_(std::move(cfg)), strategy_(strategy), seed_(seed) {
        cfg_.validate();
    }

    SimResult run(TraceSource& source) {
        const SimTime horizon = source.horizon();
        const SimTime contract = cfg_.pricing.contract_len;
        const double rate = cfg_.pricing.ondemand_rate;
        const double reserved_cost = cfg_.pricing.reserved_cost();
        const double amort_rate = reserved_cost / static_cast<double>(contract);
        const SimTime window = cfg_.risk.window_len(contract);

        SimResult res;
        res.horizon = horizon;
        res.ledger = Ledger(cfg_.record_entries);
        res.request_db = RequestDB(cfg_.record_events);
        res.quarters.assign(horizon / cfg_.quarter_len + 1, QuarterAux{});

        ResourcePool pool;
        PendingQueue queue;
        RollingWindow arrivals_win(window), count_win(window);
        std::mt19937_64 decision_rng =
            substream(seed_, std::string("decisions/") + strategy_name(strategy_));

        std::priority_queue<TermEvent, std::vector<TermEvent>, std::greater<>> terminations;
        std::vector<UserRequest> arrivals_buf;
        std::vector<bool> ever_placed;
        std::int64_t last_seen_id = -1;
        std::uint64_t ondemand_active = 0;

        // perfect-information state
        std::vector<std::uint32_t> future_demand;
        std::vector<SimTime> purchase_times;
        std::unordered_map<RequestId, SimTime> active_end;  // BestCase bookkeeping
        std::vector<SimTime> ondemand_ends;                 // committed on-demand requests
        std::uint64_t bestcase_budget = 0;
        SimTime bestcase_computed_at = 0;
        bool bestcase_fresh = false;
        std::vector<std::uint64_t> bestcase_px1, bestcase_px2;  // overflow >= 1 / >= 2 prefixes
        const double bestcase_threshold =
            cfg_.pricing.break_even_utilization() * static_cast<double>(contract);
        bool bestcase_planned = false;
        std::vector<char> bestcase_plan_bits;
        std::size_t bestcase_plan_next = 0;
        if (strategy_ == StrategyKind::BestCase) {
            std::vector<PlanRequest> plan_reqs;
            bool small_trace = false;
            future_demand = active_demand_profile(source, horizon,
                                                  cfg_.bestcase_plan_max_requests, plan_reqs,
                                                  small_trace);
            if (small_trace) {
                bestcase_plan_bits = bestcase_make_plan(
                    plan_reqs, horizon, contract, rate, reserved_cost,
                    cfg_.event_order == EventOrder::ArrivalsTerminationsOptimiser);
                bestcase_planned = true;
            }
        }

        // forecaster state
        ArimaState arima;
        const SimTime arima_period = cfg_.arima.period_min;
        const SimTime arima_refit = cfg_.arima.refit_period_min;

        auto mark_placed = [&](RequestId id) {
            if (id >= ever_placed.size()) ever_placed.resize(id + 1, false);
            ever_placed[id] = true;
        };
        auto quarter_of = [&](SimTime t) {
            return std::min<std::size_t>(t / cfg_.quarter_len, res.quarters.size() - 1);
        };

        auto settle_termination = [&](const TermEvent& ev, SimTime t) {
            double spend = rate * static_cast<double>(ev.end - ev.start);
            res.ledger.record_revenue(t, ev.id, spend);
            if (ev.start < t) {
                double due = res.ledger.cashback_due(cfg_.pricing, ev.start, t, spend);
                if (due > 0) res.ledger.record_cashback(t, ev.id, due);
            }
            QuarterAux& qa = res.quarters[quarter_of(std::min(t, horizon - 1))];
            qa.usage_sum += static_cast<double>(ev.end - ev.start);
            ++qa.usage_cnt;
        };

        auto provision_reserved = [&](RequestId rq, SimTime t) {
            ResourceId rid = pool.add_reserved(t, contract);
            res.ledger.record_reserved_purchase(t, rid, reserved_cost);
            if (strategy_ == StrategyKind::BestCase) purchase_times.push_back(t);
            pool.bind(rid, rq, t);
            mark_placed(rq);
            ++res.reserved_purchases;
        };
        auto provision_ondemand = [&](RequestId rq, SimTime t) {
            if (strategy_ == StrategyKind::BestCase)
                if (auto it = active_end.find(rq); it != active_end.end())
                    ondemand_ends.push_back(it->second);
            ResourceId rid = pool.add_on_demand(t);
            pool.bind(rid, rq, t);
            mark_placed(rq);
            ++ondemand_active;
            ++res.ondemand_provisions;
        };

        auto process_arrivals = [&](SimTime t) {
            arrivals_buf.clear();
            source.arrivals_at(t, arrivals_buf);
            for (const UserRequest& r : arrivals_buf) {
                if (static_cast<std::int64_t>(r.id) <= last_seen_id)
                    throw ValidationError("duplicate or out-of-order request id " +
                                          std::to_string(r.id));
                last_seen_id = static_cast<std::int64_t>(r.id);
                if (strategy_ == StrategyKind::BestCase) active_end.emplace(r.id, r.end);
                res.request_db.record_creation(r.id, t);
                terminations.push({r.end, r.id, r.start});
                if (auto rid = pool.acquire_free_reserved(t)) {
                    pool.bind(*rid, r.id, t);
                    mark_placed(r.id);
                } else {
                    queue.push_back(r.id);
                }
                ++res.total_requests;
            }
        };

        auto process_terminations = [&](SimTime t) {
            while (!terminations.empty() && terminations.top().end <= t) {
                TermEvent ev = terminations.top();
                terminations.pop();
                if (pool.is_bound(ev.id)) {
                    ResourcePool::ReleaseInfo info = pool.release(ev.id);
                    if (info.kind == SchemeKind::OnDemand) {
                        --ondemand_active;
                        res.ledger.record_ondemand_usage_entry(
                            t, ev.id, rate * static_cast<double>(ev.end - info.scheme_start));
                    }
                    settle_termination(ev, t);
                } else {
                    queue.remove(ev.id);
                    bool placed = ev.id < ever_placed.size() && ever_placed[ev.id];
                    // a request that was served and re-queued by a contract
                    // expiry still pays; one never placed is billed zero
                    if (placed) settle_termination(ev, t);
                }
                if (strategy_ == StrategyKind::BestCase) active_end.erase(ev.id);
                res.request_db.record_termination(ev.id, t);
            }
        };

        auto run_optimiser = [&](SimTime t) {
            if (queue.empty()) return;
            // strategy pass setup: factors are computed once per pass
            double aggregated_risk = 0.0;
            bool risk_based = strategy_ == StrategyKind::RiskTaking ||
                              strategy_ == StrategyKind::NoRiskAdjustment;
            std::uint64_t arima_target = 0;
            bool arima_warm = false;
            if (risk_based) {
                RiskVector v;
                v.anomaly = anomaly_risk(res.request_db.arrivals_at(t), arrivals_win.stats(),
                                         cfg_.risk.sd_multiplier);
                v.pool_count = pool_count_risk(static_cast<double>(pool.reserved_count()),
                                               count_win.stats(), cfg_.risk.sd_multiplier);
                v.pool_volume = pool_volume_risk(pool, t, contract);
                if (strategy_ == StrategyKind::RiskTaking) {
                    SimTime p = cfg_.optimiser_period;
                    double recent = res.ledger.revenue_between(t > p ? t - p : 0, t);
                    double previous =
                        res.ledger.revenue_between(t > 2 * p ? t - 2 * p : 0, t > p ? t - p : 0);
                    v.revenue_adjustment =
                        revenue_adjustment(recent, previous, cfg_.risk.adjustment_step);
                }
                aggregated_risk = aggregate_risk(v, cfg_.risk.weights);
                QuarterAux& qa = res.quarters[quarter_of(t)];
                qa.risk_sum += aggregated_risk;
                ++qa.risk_cnt;
            } else if (strategy_ == StrategyKind::AutoArima) {
                arima_warm = arima.warm;
                if (arima_warm) arima_target = arima.target_at(t);
            } else if (strategy_ == StrategyKind::BestCase) {
                if (!bestcase_planned &&
                    (!bestcase_fresh || t - bestcase_computed_at >= cfg_.bestcase_recompute_min)) {
                    // drop committed on-demand requests that already terminated
                    std::erase_if(ondemand_ends, [&](SimTime e) { return e <= t; });
                    std::sort(ondemand_ends.begin(), ondemand_ends.end());
                    std::vector<SimTime> queued_ends;
                    for (RequestId rq : queue)
                        if (auto it = active_end.find(rq); it != active_end.end())
                            queued_ends.push_back(it->second);
                    std::sort(queued_ends.begin(), queued_ends.end());
                    bestcase_budget = bestcase_capacity_gap(
                        future_demand, purchase_times, ondemand_ends, queued_ends, t, contract,
                        horizon, cfg_.pricing.break_even_utilization(), bestcase_px1,
                        bestcase_px2);
                    bestcase_computed_at = t;
                    bestcase_fresh = true;
                }
            }

            while (!queue.empty()) {
                RequestId rq = queue.pop_front();
                if (auto rid = pool.acquire_free_reserved(t)) {
                    pool.bind(*rid, rq, t);
                    mark_placed(rq);
                    continue;
                }
                bool reserved;
                switch (strategy_) {
                    case StrategyKind::PureReserved:
                        reserved = true;
                        break;
                    case StrategyKind::RiskTaking:
                    case StrategyKind::NoRiskAdjustment:
                        reserved = decide(aggregated_risk, uniform01(decision_rng), cfg_.risk) ==
                                   Placement::CreateReserved;
                        break;
                    case StrategyKind::AutoArima:
                        reserved = !arima_warm || pool.reserved_count() < arima_target;
                        break;
                    case StrategyKind::BestCase: {
                        if (bestcase_planned) {
                            reserved = bestcase_plan_next < bestcase_plan_bits.size() &&
                                       bestcase_plan_bits[bestcase_plan_next] != 0;
                            ++bestcase_plan_next;
                            break;
                        }
                        // The budget says how many instances the overflow can
                        // jointly keep above break-even, but binding is
                        // non-preemptive: the instance bought here serves this
                        // request first and only then picks up later overflow.
                        // Gate the purchase on that achievable busy time: the
                        // request's own remaining minutes plus overflow
                        // minutes after it ends that no other queued request
                        // would claim first (level >= 2 while others wait).
                        reserved = false;
                        if (bestcase_budget > 0) {
                            double busy = 0.0;
                            SimTime e = t;
                            if (auto it = active_end.find(rq); it != active_end.end())
                                e = it->second;
                            const SimTime cend = t + contract;
                            if (e > t) busy += static_cast<double>(std::min(e, cend) - t);
                            if (busy < bestcase_threshold) {
                                const auto& px = queue.empty() ? bestcase_px1 : bestcase_px2;
                                const std::size_t len = px.empty() ? 0 : px.size() - 1;
                                auto idx = [&](SimTime m) {
                                    if (m <= bestcase_computed_at) return std::size_t{0};
                                    return std::min<std::size_t>(m - bestcase_computed_at, len);
                                };
                                std::size_t a = idx(std::max(e, t));
                                std::size_t b = idx(cend);
                                if (b > a) busy += static_cast<double>(px[b] - px[a]);
                            }
                            reserved = busy >= bestcase_threshold;
                            if (reserved) --bestcase_budget;
                        }
                        break;
                    }
                }
                if (reserved)
                    provision_reserved(rq, t);
                else
                    provision_ondemand(rq, t);
            }
        };

        for (SimTime t = 0; t <= horizon; ++t) {
            pool.expire_until(t);
            {
                std::vector<RequestId> migrated = pool.take_migrations();
                for (auto it = migrated.rbegin(); it != migrated.rend(); ++it)
                    queue.push_front(*it);
            }
            if (t < horizon) {
                if (cfg_.event_order == EventOrder::ArrivalsTerminationsOptimiser) {
                    process_arrivals(t);
                    process_terminations(t);
                } else {
                    process_terminations(t);
                    process_arrivals(t);
                }
                if (t % cfg_.optimiser_period == 0) run_optimiser(t);

                std::size_t resv = pool.reserved_count();
                res.ledger.close_minute(t, static_cast<double>(ondemand_active) * rate,
                                        pool.occupied_reserved_count(), resv,
                                        static_cast<double>(resv) * amort_rate);
                arrivals_win.push(res.request_db.arrivals_at(t));
                count_win.push(static_cast<double>(resv));

                if (strategy_ == StrategyKind::AutoArima)
                    arima.on_minute_close(t, *this, res, window, arima_period, arima_refit);
            } else {
                // wrap-up: settle requests terminating exactly at the horizon
                process_terminations(t);
                res.ledger.close_minute(t, 0.0, 0, 0, 0.0);
            }
        }
        return res;
    }

private:
    struct PlanRequest {
        SimTime start;
        SimTime end;
    };

    struct TermEvent {
        SimTime end;
        RequestId id;
        SimTime start;
        bool operator>(const TermEvent& o) const {
            return end != o.end ? end > o.end : id > o.id;
        }
    };

    struct ArimaState {
        bool warm = false;
        std::vector<double> period_series;  // completed aggregation periods
        std::vector<double> forecasts;      // for periods after last refit
        SimTime last_refit = 0;
        double active_sum = 0.0;
        std::uint64_t minutes_in_period = 0;
        SimTime period_start = 0;

        std::uint64_t target_at(SimTime t) const {
            if (forecasts.empty()) return 0;
            std::size_t idx = 0;  // set by caller context via last_refit
            idx = std::min<std::size_t>((t - last_refit) / period_len, forecasts.size() - 1);
            double f = std::max(0.0, forecasts[idx]);
            return static_cast<std::uint64_t>(std::ceil(f));
        }
        SimTime period_len = 60;

        void on_minute_close(SimTime t, const Simulation& sim, SimResult& res, SimTime window,
                             SimTime period, SimTime refit) {
            period_len = period;
            double demand = sim.cfg_.arima.target == ArimaConfig::Target::Arrivals
                                ? static_cast<double>(res.request_db.arrivals_at(t))
                                : static_cast<double>(res.request_db.active());
            active_sum += demand;
            ++minutes_in_period;
            if ((t + 1) % period == 0) {
                double value = active_sum / static_cast<double>(minutes_in_period);
                // log forecast accuracy for the completed period
                if (warm) {
                    std::size_t idx = static_cast<std::size_t>((period_start - last_refit) / period);
                    if (idx < forecasts.size())
                        res.forecast_log.push_back(
                            {period_start, std::max(0.0, forecasts[idx]), value});
                }
                period_series.push_back(value);
                active_sum = 0.0;
                minutes_in_period = 0;
                period_start = t + 1;
            }
            if ((t + 1) % refit == 0 && !period_series.empty()) {
                const ArimaOrder& gm = sim.cfg_.arima.grid_max;
                std::size_t min_len = 2 * static_cast<std::size_t>(gm.p + gm.d + gm.q + 1);
                std::size_t fit_window = std::max<std::size_t>(window / period, min_len);
                if (period_series.size() >= min_len) {
                    std::size_t n = std::min(fit_window, period_series.size());
                    std::span<const double> recent(period_series.data() + period_series.size() - n,
                                                  n);
                    ArimaModel model = fit_auto_arima(recent, gm);
                    forecasts = forecast_demand(model, recent, refit / period);
                    last_refit = t + 1;
                    warm = true;
                }
            }
        }
    };

    // Active-request count per minute over the whole horizon (oracle pre-pass).
    static std::vector<std::uint32_t> active_demand_profile(TraceSource& source, SimTime horizon,
                                                            std::uint64_t collect_cap,
                                                            std::vector<PlanRequest>& collected,
                                                            bool& within_cap) {
        within_cap = true;
        collected.clear();
        std::vector<std::int32_t> delta(horizon + 1, 0);
        std::vector<UserRequest> buf;
        for (SimTime t = 0; t < horizon; ++t) {
            buf.clear();
            source.arrivals_at(t, buf);
            for (const UserRequest& r : buf) {
                ++delta[r.start];
                --delta[std::min(r.end, horizon)];
                if (within_cap) {
                    if (collected.size() < collect_cap) {
                        collected.push_back({r.start, r.end});
                    } else {
                        within_cap = false;
                        collected.clear();
                        collected.shrink_to_fit();
                    }
                }
            }
        }
        source.reset();
        std::vector<std::uint32_t> demand(horizon, 0);
        std::int64_t acc = 0;
        for (SimTime m = 0; m < horizon; ++m) {
            acc += delta[m];
            demand[m] = static_cast<std::uint32_t>(acc);
        }
        return demand;
    }

    // How many additional reserved instances, bought now, would each clear the
    // break-even utilization over [now, now+contract). Overflow is future
    // demand in excess of the committed reserved capacity, excluding requests
    // already bound to on-demand resources (they can never migrate back).
    // A purchase is deferred (budget 0) when a contract started later inside
    // the window would cover strictly more overflow minutes; in that future
    // the requests pending right now have already been served on-demand (a
    // break-even placement that costs nothing), so the later-start profile
    // treats them as committed too.
    static std::uint64_t bestcase_capacity_gap(const std::vector<std::uint32_t>& demand,
                                               const std::vector<SimTime>& purchases,
                                               const std::vector<SimTime>& ondemand_ends,
                                               const std::vector<SimTime>& queued_ends,
                                               SimTime now, SimTime contract, SimTime horizon,
                                               double break_even,
                                               std::vector<std::uint64_t>& px1,
                                               std::vector<std::uint64_t>& px2) {
        const SimTime wend = std::min(now + contract, horizon);
        const SimTime scan_end = std::min(now + 2 * contract, horizon);
        // effective overflow at m: demand - committed capacity - active
        // on-demand commitments, floored at zero
        std::size_t ptr = 0;   // purchases are sorted ascending
        std::size_t optr = 0;  // ondemand_ends are sorted ascending
        std::size_t qptr = 0;  // queued_ends are sorted ascending
        std::vector<std::uint32_t> overflow(scan_end - now, 0);
        std::vector<std::uint32_t> overflow_later(scan_end - now, 0);
        for (SimTime m = now; m < scan_end; ++m) {
            if (m >= contract)
                while (ptr < purchases.size() && purchases[ptr] + contract <= m) ++ptr;
            while (optr < ondemand_ends.size() && ondemand_ends[optr] <= m) ++optr;
            while (qptr < queued_ends.size() && queued_ends[qptr] <= m) ++qptr;
            std::uint64_t committed = (purchases.size() - ptr) + (ondemand_ends.size() - optr);
            std::uint32_t d = demand[m];
            if (d > committed) overflow[m - now] = static_cast<std::uint32_t>(d - committed);
            committed += queued_ends.size() - qptr;
            if (d > committed)
                overflow_later[m - now] = static_cast<std::uint32_t>(d - committed);
        }
        px1.assign(overflow.size() + 1, 0);
        px2.assign(overflow.size() + 1, 0);
        for (std::size_t i = 0; i < overflow.size(); ++i) {
            px1[i + 1] = px1[i] + (overflow[i] >= 1 ? 1 : 0);
            px2[i + 1] = px2[i] + (overflow[i] >= 2 ? 1 : 0);
        }
        const double threshold = break_even * static_cast<double>(contract);
        std::uint64_t busy_now = 0;
        for (SimTime m = now; m < wend; ++m)
            if (overflow[m - now] >= 1) ++busy_now;
        if (static_cast<double>(busy_now) < threshold) return 0;

        // A purchase started later inside the window may cover more overflow
        // minutes. Defer only when that better start exists AND buying now
        // would leave too little overflow for it to stay viable; otherwise
        // the two purchases serve different demand and both should happen.
        auto window_max = [&](const std::vector<std::uint32_t>& profile, auto&& level) {
            std::vector<std::uint64_t> px(profile.size() + 1, 0);
            for (std::size_t i = 0; i < profile.size(); ++i)
                px[i + 1] = px[i] + (level(profile[i], i) >= 1 ? 1 : 0);
            std::uint64_t best = 0;
            for (SimTime s = now + 1; s < wend; ++s) {
                std::size_t a = s - now;
                std::size_t b = std::min<std::size_t>(a + contract, profile.size());
                best = std::max(best, px[b] - px[a]);
            }
            return best;
        };
        std::uint64_t best_later =
            window_max(overflow_later, [](std::uint32_t v, std::size_t) { return v; });
        if (best_later > busy_now) {
            const std::size_t win = wend - now;
            std::uint64_t best_after = window_max(
                overflow_later, [&](std::uint32_t v, std::size_t i) {
                    return i < win && v > 0 ? v - 1 : v;  // one instance bought now
                });
            if (static_cast<double>(best_after) < threshold) return 0;
        }

        // Budget: the largest j for which j instances can jointly stay above
        // break-even. Per-minute they can serve min(overflow, j) requests,
        // and the load can be rebalanced across instances, so the bound is
        // sum_m min(overflow(m), j) >= j * threshold.
        std::vector<std::uint64_t> hist;
        for (SimTime m = now; m < wend; ++m) {
            std::uint64_t over = overflow[m - now];
            if (over > 0) {
                if (over >= hist.size()) hist.resize(over + 1, 0);
                ++hist[over];
            }
        }
        std::vector<std::uint64_t> at_least(hist.size(), 0);  // #{m : overflow >= j}
        std::uint64_t suffix = 0;
        for (std::size_t v = hist.size(); v-- > 1;) {
            suffix += hist[v];
            at_least[v] = suffix;
        }
        std::uint64_t budget = 0;
        double served = 0.0;  // sum_m min(overflow(m), j)
        for (std::size_t j = 1; j < at_least.size(); ++j) {
            served += static_cast<double>(at_least[j]);
            if (served >= static_cast<double>(j) * threshold)
                budget = j;
            else
                break;
        }
        return budget;
    }

    // Replays the placement dynamics with every reserved/on-demand decision
    // read from an explicit sequence; positions past the end of `bits` take
    // `default_bit`. On return `bits` holds exactly the consumed sequence and
    // the gross profit (revenue minus reserved purchases and on-demand
    // minutes) is reported. Time advances event-to-event: between arrivals,
    // terminations and contract expiries the pending queue is empty, so
    // on-demand cost accrues linearly and no decision can arise.
    static double bestcase_plan_eval(const std::vector<PlanRequest>& reqs, SimTime horizon,
                                     SimTime contract, double rate, double reserved_cost,
                                     bool arrivals_first, char default_bit,
                                     std::vector<char>& bits) {
        struct Inst {
            SimTime expiry;
            std::int64_t occupant = -1;
            bool expired = false;
        };
        const std::size_t n = reqs.size();
        std::vector<Inst> inst;  // creation order; expiries are monotone
        std::deque<std::size_t> queue;
        std::vector<char> placed(n, 0), ond(n, 0);
        std::vector<std::int64_t> bound(n, -1);
        std::vector<std::size_t> by_end(n);
        for (std::size_t i = 0; i < n; ++i) by_end[i] = i;
        std::stable_sort(by_end.begin(), by_end.end(), [&](std::size_t a, std::size_t b) {
            return reqs[a].end < reqs[b].end;
        });
        std::size_t next_arrival = 0, next_term = 0, next_expiry = 0, next_bit = 0;
        std::uint64_t ondemand_active = 0;
        double revenue = 0.0, cost = 0.0;

        auto acquire_free = [&](SimTime now) -> std::int64_t {
            for (std::size_t i = next_expiry; i < inst.size(); ++i)
                if (inst[i].occupant < 0 && now < inst[i].expiry)
                    return static_cast<std::int64_t>(i);
            return -1;
        };
        auto settle = [&](std::size_t id) {
            revenue += rate * static_cast<double>(reqs[id].end - reqs[id].start);
        };
        auto do_arrivals = [&](SimTime t) {
            while (next_arrival < n && reqs[next_arrival].start == t) {
                std::size_t id = next_arrival++;
                if (std::int64_t f = acquire_free(t); f >= 0) {
                    inst[f].occupant = static_cast<std::int64_t>(id);
                    bound[id] = f;
                    placed[id] = 1;
                } else {
                    queue.push_back(id);
                }
            }
        };
        auto do_terminations = [&](SimTime t) {
            while (next_term < n && reqs[by_end[next_term]].end <= t) {
                std::size_t id = by_end[next_term++];
                if (bound[id] >= 0) {
                    inst[bound[id]].occupant = -1;
                    bound[id] = -1;
                    settle(id);
                } else if (ond[id]) {
                    ond[id] = 0;
                    --ondemand_active;
                    settle(id);
                } else {
                    queue.erase(std::find(queue.begin(), queue.end(), id));
                    if (placed[id]) settle(id);
                }
            }
        };

        SimTime t = 0;
        while (true) {
            // contract expiries; occupants migrate to the queue front in order
            std::vector<std::size_t> migrated;
            while (next_expiry < inst.size() && inst[next_expiry].expiry <= t) {
                Inst& in = inst[next_expiry++];
                in.expired = true;
                if (in.occupant >= 0) {
                    std::size_t rq = static_cast<std::size_t>(in.occupant);
                    in.occupant = -1;
                    bound[rq] = -1;
                    migrated.push_back(rq);
                }
            }
            for (auto it = migrated.rbegin(); it != migrated.rend(); ++it) queue.push_front(*it);

            if (t >= horizon) {
                do_terminations(t);  // wrap-up settlements at the horizon
                break;
            }
            if (arrivals_first) {
                do_arrivals(t);
                do_terminations(t);
            } else {
                do_terminations(t);
                do_arrivals(t);
            }
            while (!queue.empty()) {
                std::size_t id = queue.front();
                queue.pop_front();
                if (std::int64_t f = acquire_free(t); f >= 0) {
                    inst[f].occupant = static_cast<std::int64_t>(id);
                    bound[id] = f;
                    placed[id] = 1;
                    continue;
                }
                if (next_bit >= bits.size()) bits.push_back(default_bit);
                if (bits[next_bit++]) {
                    cost += reserved_cost;
                    inst.push_back({t + contract, static_cast<std::int64_t>(id), false});
                    bound[id] = static_cast<std::int64_t>(inst.size()) - 1;
                } else {
                    ond[id] = 1;
                    ++ondemand_active;
                }
                placed[id] = 1;
            }
            SimTime next = horizon;
            if (next_arrival < n) next = std::min(next, reqs[next_arrival].start);
            if (next_term < n) next = std::min(next, reqs[by_end[next_term]].end);
            if (next_expiry < inst.size()) next = std::min(next, inst[next_expiry].expiry);
            next = std::max(next, t + 1);
            cost += static_cast<double>(ondemand_active) * rate * static_cast<double>(next - t);
            t = next;
        }
        bits.resize(next_bit);
        return revenue - cost;
    }

    // Offline plan for small traces: the full decision sequence is optimised
    // by steepest-ascent local search (single flips, plus pair flips while
    // the sequence is short) from an all-on-demand and an all-reserved seed.
    static std::vector<char> bestcase_make_plan(const std::vector<PlanRequest>& reqs,
                                                SimTime horizon, SimTime contract, double rate,
                                                double reserved_cost, bool arrivals_first) {
        constexpr double kGain = 1e-9;      // minimum improvement worth a move
        constexpr std::size_t kPairLimit = 64;
        constexpr int kMaxSteps = 500;
        auto eval = [&](std::vector<char>& bits, char default_bit) {
            return bestcase_plan_eval(reqs, horizon, contract, rate, reserved_cost,
                                      arrivals_first, default_bit, bits);
        };
        std::vector<char> best;
        double best_profit = 0.0;
        bool have_best = false;
        // reserved seed first: at equal profit (exact break-even) the
        // committed-capacity plan wins, matching the streaming heuristic
        for (char seed_bit : {char{1}, char{0}}) {
            std::vector<char> cur;
            double cur_profit = eval(cur, seed_bit);
            for (int step = 0; step < kMaxSteps; ++step) {
                std::vector<char> best_nb;
                double best_nb_profit = cur_profit;
                bool found = false;
                auto consider = [&](std::vector<char> cand) {
                    double p = eval(cand, 0);
                    if (p > best_nb_profit + kGain) {
                        best_nb_profit = p;
                        best_nb = std::move(cand);
                        found = true;
                    }
                };
                for (std::size_t i = 0; i < cur.size(); ++i) {
                    std::vector<char> cand = cur;
                    cand[i] = !cand[i];
                    consider(std::move(cand));
                }
                if (cur.size() <= kPairLimit)
                    for (std::size_t i = 0; i < cur.size(); ++i)
                        for (std::size_t j = i + 1; j < cur.size(); ++j) {
                            std::vector<char> cand = cur;
                            cand[i] = !cand[i];
                            cand[j] = !cand[j];
                            consider(std::move(cand));
                        }
                if (!found) break;
                cur = std::move(best_nb);
                cur_profit = best_nb_profit;
            }
            if (!have_best || cur_profit > best_profit) {
                best_profit = cur_profit;
                best = std::move(cur);
                have_best = true;
            }
        }
        return best;
    }

    EngineConfig cfg_;
    StrategyKind strategy_;
    std::uint64_t seed_;
};

}  // namespace broker
