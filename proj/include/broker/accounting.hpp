#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include "broker/domain.hpp"
#include "broker/errors.hpp"

namespace broker {

enum class EntryKind { ReservedPurchase, OnDemandUsage, Revenue, Cashback };

inline const char* entry_kind_name(EntryKind k) {
    switch (k) {
        case EntryKind::ReservedPurchase: return "reserved_purchase";
        case EntryKind::OnDemandUsage: return "ondemand_usage";
        case EntryKind::Revenue: return "revenue";
        case EntryKind::Cashback: return "cashback";
    }
    return "?";
}

struct LedgerEntry {
    SimTime time;
    EntryKind kind;
    double amount;
    std::uint64_t id;  // request or resource id, per kind
};

struct ProfitReport {
    SimTime t1 = 0, t2 = 0;
    double rho = 0.0;    // revenue
    double omega = 0.0;  // cost
    std::optional<double> psi;  // gross margin %, unset when rho == 0
    double utilization = 0.0;   // occupied reserved minutes / reserved minutes
};

// Money flows of one simulation run. Amounts are kept in per-minute bins
// with running prefix sums, so window reports are O(1) folds and the
// in-run cashback computation can read any closed window. The per-entry
// log is optional; it exists for export and audit of small runs.
//
// Window attribution: revenue and cashback at termination time, reserved
// purchases at purchase time, on-demand usage accrued minute by minute.
class Ledger {
public:
    explicit Ledger(bool record_entries = true) : record_entries_(record_entries) {
        px_rev_.push_back(0);
        px_res_.push_back(0);
        px_ond_.push_back(0);
        px_cb_.push_back(0);
        px_amort_.push_back(0);
        px_occ_.push_back(0);
        px_resv_.push_back(0);
    }

    void record_reserved_purchase(SimTime t, ResourceId rid, double amount) {
        bin_at(res_bin_, t) += amount;
        if (record_entries_) entries_.push_back({t, EntryKind::ReservedPurchase, amount, rid});
    }
    void record_revenue(SimTime t, RequestId rq, double amount) {
        bin_at(rev_bin_, t) += amount;
        if (record_entries_) entries_.push_back({t, EntryKind::Revenue, amount, rq});
    }
    void record_cashback(SimTime t, RequestId rq, double amount) {
        bin_at(cb_bin_, t) += amount;
        if (record_entries_) entries_.push_back({t, EntryKind::Cashback, amount, rq});
    }
    // Log-only: the window accrual of on-demand cost comes from close_minute.
    void record_ondemand_usage_entry(SimTime t, RequestId rq, double amount) {
        if (record_entries_) entries_.push_back({t, EntryKind::OnDemandUsage, amount, rq});
    }

    // Seals minute `t` (must be called in order, once per minute).
    // `ondemand_cost` is the metered cost of that minute; the occupancy
    // counts feed the utilization report; `amortized_reserved_cost` is the
    // per-minute spread of the active reserved contracts (reporting only).
    void close_minute(SimTime t, double ondemand_cost, std::uint64_t occupied_reserved,
                      std::uint64_t reserved_total, double amortized_reserved_cost = 0.0) {
        if (t != minutes_closed_)
            throw InvariantError("close_minute out of order at t=" + std::to_string(t));
        double rev = t < rev_bin_.size() ? rev_bin_[t] : 0.0;
        double res = t < res_bin_.size() ? res_bin_[t] : 0.0;
        double cb = t < cb_bin_.size() ? cb_bin_[t] : 0.0;
        px_rev_.push_back(px_rev_.back() + rev);
        px_res_.push_back(px_res_.back() + res);
        px_ond_.push_back(px_ond_.back() + ondemand_cost);
        px_cb_.push_back(px_cb_.back() + cb);
        px_amort_.push_back(px_amort_.back() + amortized_reserved_cost);
        px_occ_.push_back(px_occ_.back() + occupied_reserved);
        px_resv_.push_back(px_resv_.back() + reserved_total);
        ++minutes_closed_;
    }

    SimTime minutes_closed() const { return minutes_closed_; }

    double revenue_between(SimTime t1, SimTime t2) const { return fold(px_rev_, t1, t2); }
    double reserved_cost_between(SimTime t1, SimTime t2) const { return fold(px_res_, t1, t2); }
    double ondemand_cost_between(SimTime t1, SimTime t2) const { return fold(px_ond_, t1, t2); }
    double cashback_between(SimTime t1, SimTime t2) const { return fold(px_cb_, t1, t2); }
    double amortized_reserved_between(SimTime t1, SimTime t2) const {
        return fold(px_amort_, t1, t2);
    }

    ProfitReport profit_margin(SimTime t1, SimTime t2) const {
        return report(t1, t2, /*amortized=*/false);
    }
    // Reporting-only view with reserved cost spread over the contract.
    ProfitReport profit_margin_amortized(SimTime t1, SimTime t2) const {
        return report(t1, t2, /*amortized=*/true);
    }

    // Consecutive windows of quarter_len covering [0, horizon). The last
    // window also absorbs the wrap-up minute at `horizon` where requests
    // terminating exactly at the horizon are booked.
    std::vector<ProfitReport> quarterly_series(SimTime horizon, SimTime quarter_len) const {
        if (quarter_len == 0) throw ConfigError("quarter_len must be > 0");
        std::vector<ProfitReport> out;
        for (SimTime t1 = 0; t1 < horizon; t1 += quarter_len) {
            SimTime t2 = std::min(t1 + quarter_len, horizon);
            out.push_back(profit_margin(t1, t2));
        }
        if (!out.empty() && minutes_closed_ > horizon) {
            // fold the wrap-up minute into the final window
            ProfitReport& last = out.back();
            last = profit_margin(last.t1, horizon + 1);
            last.t2 = horizon;
        }
        return out;
    }

    // Cashback entitlement for a request that spent `spend` and ran over
    // [start, end): at most the broker's gross margin over that window.
    double cashback_due(const PricingConfig& pricing, SimTime start, SimTime end,
                        double spend) const {
        ProfitReport r = profit_margin(start, end);
        if (!r.psi || *r.psi <= 0) return 0.0;
        return pricing.cashback_fraction * (*r.psi / 100.0) * spend;
    }

    const std::vector<LedgerEntry>& entries() const { return entries_; }

    // CSV: time,kind,amount,id
    void export_csv(std::ostream& os) const {
        os << "time,kind,amount,id\n";
        char buf[64];
        for (const LedgerEntry& e : entries_) {
            std::snprintf(buf, sizeof(buf), "%.10g", e.amount);
            os << e.time << ',' << entry_kind_name(e.kind) << ',' << buf << ',' << e.id << '\n';
        }
    }

private:
    static double& bin_at(std::vector<double>& bins, SimTime t) {
        if (t >= bins.size()) bins.resize(t + 1, 0.0);
        return bins[t];
    }
    template <class T>
    static T fold_raw(const std::vector<T>& px, SimTime t1, SimTime t2) {
        auto clamp = [&](SimTime t) { return std::min<SimTime>(t, px.size() - 1); };
        return px[clamp(t2)] - px[clamp(t1)];
    }
    double fold(const std::vector<double>& px, SimTime t1, SimTime t2) const {
        return fold_raw(px, t1, t2);
    }

    ProfitReport report(SimTime t1, SimTime t2, bool amortized) const {
        if (t1 >= t2) throw ValidationError("profit_margin: t1 must be < t2");
        ProfitReport r;
        r.t1 = t1;
        r.t2 = t2;
        r.rho = fold(px_rev_, t1, t2);
        double reserved = amortized ? fold(px_amort_, t1, t2) : fold(px_res_, t1, t2);
        r.omega = reserved + fold(px_ond_, t1, t2);
        if (r.rho > 0) r.psi = 100.0 * (r.rho - r.omega) / r.rho;
        std::uint64_t resv = fold_raw(px_resv_, t1, t2);
        if (resv > 0)
            r.utilization = static_cast<double>(fold_raw(px_occ_, t1, t2)) /
                            static_cast<double>(resv);
        return r;
    }

    bool record_entries_;
    SimTime minutes_closed_ = 0;
    std::vector<double> rev_bin_, res_bin_, cb_bin_;
    std::vector<double> px_rev_, px_res_, px_ond_, px_cb_, px_amort_;
    std::vector<std::uint64_t> px_occ_, px_resv_;
    std::vector<LedgerEntry> entries_;
};

// ProfitReport CSV: t1,t2,rho,omega,psi,utilization (psi empty when undefined)
inline void export_reports_csv(std::ostream& os, const std::vector<ProfitReport>& reports) {
    os << "t1,t2,rho,omega,psi,utilization\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        os << buf;
    };
    for (const ProfitReport& r : reports) {
        os << r.t1 << ',' << r.t2 << ',';
        put(r.rho);
        os << ',';
        put(r.omega);
        os << ',';
        if (r.psi) put(*r.psi);
        os << ',';
        put(r.utilization);
        os << '\n';
    }
}

}  // namespace broker
