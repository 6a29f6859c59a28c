#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <unordered_map>
#include <utility>
#include <vector>

#include "broker/errors.hpp"

namespace broker {

// Simulation time in elapsed minutes since epoch 0.
using SimTime = std::uint64_t;
using RequestId = std::uint64_t;
using ResourceId = std::uint64_t;

inline constexpr SimTime kMinutesPerHour = 60;
inline constexpr SimTime kMinutesPerDay = 1440;
inline constexpr SimTime kMinutesPerMonth = 30 * kMinutesPerDay;   // 43,200
inline constexpr SimTime kMinutesPerQuarter = 3 * kMinutesPerMonth;  // 129,600
inline constexpr SimTime kMinutesPerYear = 12 * kMinutesPerMonth;

enum class SchemeKind { Reserved, OnDemand };

// Reserved: bought at `start` for `contract_len` minutes, usable during
// [start, start + contract_len - 1]. OnDemand: metered from `start`.
struct PricingScheme {
    SchemeKind kind = SchemeKind::OnDemand;
    SimTime start = 0;
    SimTime contract_len = 0;

    static PricingScheme reserved(SimTime purchase_time, SimTime len) {
        if (len == 0) throw ConfigError("reserved contract_len must be > 0");
        return {SchemeKind::Reserved, purchase_time, len};
    }
    static PricingScheme on_demand(SimTime start_time) {
        return {SchemeKind::OnDemand, start_time, 0};
    }
    SimTime expiry() const { return start + contract_len; }
};

// One VM rental. The broker learns end_time only when the termination
// event arrives.
struct UserRequest {
    RequestId id = 0;
    SimTime start = 0;
    SimTime end = 0;

    SimTime duration() const { return end - start; }
};

struct PricingConfig {
    double ondemand_rate = 1.0;       // currency per minute, c_Ond
    double reserved_discount = 0.60;  // fraction of the on-demand price waived
    SimTime contract_len = kMinutesPerQuarter;
    double cashback_fraction = 1.0;   // share of the entitled cashback paid out

    // Up-front cost of one reserved instance, c_Re.
    double reserved_cost() const {
        return (1.0 - reserved_discount) * ondemand_rate * static_cast<double>(contract_len);
    }
    // Occupancy fraction at which a reserved instance matches on-demand cost.
    double break_even_utilization() const { return 1.0 - reserved_discount; }

    void validate() const {
        if (ondemand_rate <= 0) throw ConfigError("ondemand_rate must be > 0");
        if (reserved_discount < 0 || reserved_discount >= 1)
            throw ConfigError("reserved_discount must be in [0,1)");
        if (contract_len == 0) throw ConfigError("contract_len must be > 0");
        if (cashback_fraction < 0 || cashback_fraction > 1)
            throw ConfigError("cashback_fraction must be in [0,1]");
    }
};

// The broker's inventory of instances plus the request->resource occupancy
// binding. Time only moves forward; expiry handling is driven by
// expire_until(), which the simulation calls once per minute.
class ResourcePool {
public:
    struct ReleaseInfo {
        ResourceId resource = 0;
        SchemeKind kind = SchemeKind::OnDemand;
        SimTime scheme_start = 0;  // purchase time (reserved) or meter start (on-demand)
    };

    ResourceId add_reserved(SimTime now, SimTime contract_len) {
        PricingScheme scheme = PricingScheme::reserved(now, contract_len);
        ResourceId rid = next_id_++;
        std::uint32_t idx = static_cast<std::uint32_t>(reserved_.size());
        reserved_.push_back({rid, scheme.start, scheme.expiry(), kNoRequest, false});
        id_to_index_.emplace(rid, idx);
        free_reserved_.push(idx);
        expiries_.push({scheme.expiry(), idx});
        ++active_reserved_;
        sum_expiry_ += scheme.expiry();
        return rid;
    }

    ResourceId add_on_demand(SimTime now) {
        ResourceId rid = next_id_++;
        ondemand_.emplace(rid, OndRec{now, kNoRequest});
        return rid;
    }

    // Unoccupied, unexpired reserved resources at `now`, ascending id.
    std::vector<ResourceId> available_reserved(SimTime now) const {
        std::vector<ResourceId> out;
        for (const ReservedRec& r : reserved_)
            if (now < r.expiry && r.occupant == kNoRequest) out.push_back(r.id);
        return out;  // creation order == ascending id
    }

    void bind(ResourceId rid, RequestId rq, SimTime now) {
        if (bound_resource(rq) != kUnbound)
            throw InvariantError("bind: request " + std::to_string(rq) + " already bound");
        if (auto it = id_to_index_.find(rid); it != id_to_index_.end()) {
            ReservedRec& rec = reserved_[it->second];
            if (now >= rec.expiry)
                throw InvariantError("bind: reserved resource " + std::to_string(rid) + " expired");
            if (rec.occupant != kNoRequest)
                throw InvariantError("bind: resource " + std::to_string(rid) + " occupied");
            rec.occupant = rq;
            ++occupied_reserved_;
            set_binding(rq, it->second);
            return;
        }
        if (auto it = ondemand_.find(rid); it != ondemand_.end()) {
            if (it->second.occupant != kNoRequest)
                throw InvariantError("bind: resource " + std::to_string(rid) + " occupied");
            it->second.occupant = rq;
            set_binding(rq, kOndFlag | rid);
            return;
        }
        throw InvariantError("bind: unknown resource " + std::to_string(rid));
    }

    // Frees the request's resource. An on-demand resource is destroyed and
    // its billing stops; a reserved one stays in the pool until expiry.
    ReleaseInfo release(RequestId rq) {
        std::uint64_t enc = bound_resource(rq);
        if (enc == kUnbound)
            throw ValidationError("release: request " + std::to_string(rq) + " not bound");
        binding_[rq] = kUnbound;
        if (enc & kOndFlag) {
            ResourceId rid = enc & ~kOndFlag;
            auto it = ondemand_.find(rid);
            ReleaseInfo info{rid, SchemeKind::OnDemand, it->second.start};
            ondemand_.erase(it);
            return info;
        }
        ReservedRec& rec = reserved_[enc];
        rec.occupant = kNoRequest;
        --occupied_reserved_;
        if (!rec.expired) free_reserved_.push(static_cast<std::uint32_t>(enc));
        return {rec.id, SchemeKind::Reserved, rec.purchase};
    }

    bool is_bound(RequestId rq) const { return bound_resource(rq) != kUnbound; }

    std::optional<ResourceId> occupant_of(ResourceId rid) const {
        if (auto it = id_to_index_.find(rid); it != id_to_index_.end()) {
            RequestId occ = reserved_[it->second].occupant;
            return occ == kNoRequest ? std::nullopt : std::optional<ResourceId>(occ);
        }
        if (auto it = ondemand_.find(rid); it != ondemand_.end()) {
            RequestId occ = it->second.occupant;
            return occ == kNoRequest ? std::nullopt : std::optional<ResourceId>(occ);
        }
        return std::nullopt;
    }

    // Lowest-id free reserved instance usable at `now`, if any.
    std::optional<ResourceId> acquire_free_reserved(SimTime now) {
        while (!free_reserved_.empty()) {
            std::uint32_t idx = free_reserved_.top();
            const ReservedRec& rec = reserved_[idx];
            if (rec.expired || rec.occupant != kNoRequest || now >= rec.expiry) {
                free_reserved_.pop();  // stale entry
                continue;
            }
            return rec.id;
        }
        return std::nullopt;
    }

    // Processes contract expiries up to and including minute `now`. Occupants
    // of expiring resources are unbound and queued for migration.
    void expire_until(SimTime now) {
        while (!expiries_.empty() && expiries_.top().expiry <= now) {
            std::uint32_t idx = expiries_.top().index;
            expiries_.pop();
            ReservedRec& rec = reserved_[idx];
            rec.expired = true;
            --active_reserved_;
            sum_expiry_ -= rec.expiry;
            if (rec.occupant != kNoRequest) {
                RequestId rq = rec.occupant;
                rec.occupant = kNoRequest;
                --occupied_reserved_;
                binding_[rq] = kUnbound;
                pending_migrations_.push_back(rq);
            }
        }
    }

    std::vector<RequestId> take_migrations() { return std::exchange(pending_migrations_, {}); }

    // (total remaining contract minutes, count) over unexpired reserved
    // resources at `now`.
    std::pair<SimTime, std::size_t> volume(SimTime now) {
        expire_until(now);
        return {sum_expiry_ - active_reserved_ * now, static_cast<std::size_t>(active_reserved_)};
    }

    // Unexpired reserved instance count; expiries must be processed to `now`.
    std::size_t reserved_count() const { return static_cast<std::size_t>(active_reserved_); }
    std::size_t occupied_reserved_count() const {
        return static_cast<std::size_t>(occupied_reserved_);
    }
    std::size_t ondemand_count() const { return ondemand_.size(); }

private:
    static constexpr RequestId kNoRequest = std::numeric_limits<RequestId>::max();
    static constexpr std::uint64_t kUnbound = std::numeric_limits<std::uint64_t>::max();
    static constexpr std::uint64_t kOndFlag = 1ull << 63;

    struct ReservedRec {
        ResourceId id;
        SimTime purchase;
        SimTime expiry;
        RequestId occupant;
        bool expired;
    };
    struct OndRec {
        SimTime start;
        RequestId occupant;
    };
    struct ExpiryEvent {
        SimTime expiry;
        std::uint32_t index;
        bool operator>(const ExpiryEvent& o) const {
            return expiry != o.expiry ? expiry > o.expiry : index > o.index;
        }
    };

    std::uint64_t bound_resource(RequestId rq) const {
        return rq < binding_.size() ? binding_[rq] : kUnbound;
    }
    void set_binding(RequestId rq, std::uint64_t enc) {
        if (rq >= binding_.size()) binding_.resize(rq + 1, kUnbound);
        binding_[rq] = enc;
    }

    std::vector<ReservedRec> reserved_;  // dense, creation order
    std::unordered_map<ResourceId, std::uint32_t> id_to_index_;
    std::unordered_map<ResourceId, OndRec> ondemand_;
    std::vector<std::uint64_t> binding_;  // request id -> encoded resource
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> free_reserved_;
    std::priority_queue<ExpiryEvent, std::vector<ExpiryEvent>, std::greater<>> expiries_;
    std::vector<RequestId> pending_migrations_;
    std::int64_t active_reserved_ = 0;
    std::int64_t occupied_reserved_ = 0;
    SimTime sum_expiry_ = 0;
    ResourceId next_id_ = 0;
};

enum class RequestEventKind { Creation, Termination };

// Time-series store of request events. The per-minute arrival counts are
// the view the risk factors read; the raw event log is optional since it
// is only needed for audits of small runs.
class RequestDB {
public:
    explicit RequestDB(bool record_events = false) : record_events_(record_events) {}

    struct Event {
        RequestId id;
        RequestEventKind kind;
        SimTime time;
    };

    void record_creation(RequestId id, SimTime t) {
        if (t >= arrivals_.size()) arrivals_.resize(t + 1, 0);
        ++arrivals_[t];
        ++creations_;
        if (record_events_) events_.push_back({id, RequestEventKind::Creation, t});
    }
    void record_termination(RequestId id, SimTime t) {
        ++terminations_;
        if (record_events_) events_.push_back({id, RequestEventKind::Termination, t});
    }

    std::uint32_t arrivals_at(SimTime t) const {
        return t < arrivals_.size() ? arrivals_[t] : 0;
    }
    const std::vector<std::uint32_t>& arrival_counts() const { return arrivals_; }
    // Creations minus terminations so far == currently active requests.
    std::int64_t active() const { return creations_ - terminations_; }
    const std::vector<Event>& events() const { return events_; }

private:
    bool record_events_;
    std::vector<std::uint32_t> arrivals_;
    std::vector<Event> events_;
    std::int64_t creations_ = 0;
    std::int64_t terminations_ = 0;
};

// FIFO of requests awaiting placement. Drained by every optimiser pass.
class PendingQueue {
public:
    void push_back(RequestId id) { q_.push_back(id); }
    void push_front(RequestId id) { q_.push_front(id); }
    RequestId pop_front() {
        RequestId id = q_.front();
        q_.pop_front();
        return id;
    }
    // Removes a request that terminated before ever being placed.
    bool remove(RequestId id) {
        auto it = std::find(q_.begin(), q_.end(), id);
        if (it == q_.end()) return false;
        q_.erase(it);
        return true;
    }
    bool empty() const { return q_.empty(); }
    std::size_t size() const { return q_.size(); }
    auto begin() const { return q_.begin(); }
    auto end() const { return q_.end(); }

private:
    std::deque<RequestId> q_;
};

}  // namespace broker
