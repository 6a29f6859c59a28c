#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "broker/domain.hpp"
#include "broker/errors.hpp"
#include "broker/rng.hpp"

namespace broker {

// Statistics of a per-minute arrival-count series.
struct TraceStats {
    std::size_t n_points = 0;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;

    void validate() const {
        if (sd < 0) throw ValidationError("TraceStats: sd must be >= 0");
        if (!(min <= q25 && q25 <= q50 && q50 <= q75 && q75 <= max))
            throw ValidationError("TraceStats: quantiles out of order");
        if (sd == 0 && min != max)
            throw ValidationError("TraceStats: sd = 0 requires min = max");
    }
};

// Table-2 shaped profiles used for synthetic workloads.
inline TraceStats dataset1_profile() {
    return {1298775, 77.08, 96.98, 0, 5450, 18, 47, 108};
}
inline TraceStats dataset2_profile() {
    return {7324831146ull, 49.12, 370.43, 0, 129215, 4, 14, 48};
}

struct Trace {
    std::vector<UserRequest> requests;  // sorted by start time; ids dense from 0
    SimTime horizon = 0;
    std::vector<std::string> labels;  // optional external ids, parallel to requests

    std::string label(std::size_t i) const {
        return i < labels.size() ? labels[i] : "r" + std::to_string(requests[i].id);
    }
};

// Per-minute arrival counts over [0, horizon).
inline std::vector<std::uint32_t> arrival_counts(const Trace& t) {
    std::vector<std::uint32_t> counts(t.horizon, 0);
    for (const UserRequest& r : t.requests)
        if (r.start < t.horizon) ++counts[r.start];
    return counts;
}

namespace detail {

inline double quantile(const std::vector<std::uint32_t>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return (1.0 - frac) * sorted[lo] + frac * sorted[lo + 1];
}

}  // namespace detail

inline TraceStats trace_stats(const Trace& t) {
    std::vector<std::uint32_t> counts = arrival_counts(t);
    TraceStats s;
    s.n_points = counts.size();
    if (counts.empty()) return s;
    double sum = 0, sumsq = 0;
    for (std::uint32_t c : counts) {
        sum += c;
        sumsq += static_cast<double>(c) * c;
    }
    s.mean = sum / static_cast<double>(counts.size());
    double var = sumsq / static_cast<double>(counts.size()) - s.mean * s.mean;
    s.sd = var > 0 ? std::sqrt(var) : 0.0;
    std::sort(counts.begin(), counts.end());
    s.min = counts.front();
    s.max = counts.back();
    s.q25 = detail::quantile(counts, 0.25);
    s.q50 = detail::quantile(counts, 0.50);
    s.q75 = detail::quantile(counts, 0.75);
    return s;
}

// Draws per-minute arrival counts matching a (mean, sd) target by moment
// matching. Overdispersed targets (the Table-2 regime, variance >> mean)
// get a negative binomial realized as a gamma-Poisson mixture.
class ArrivalSampler {
public:
    explicit ArrivalSampler(const TraceStats& stats) {
        stats.validate();
        if (stats.mean < 0) throw ValidationError("arrival mean must be >= 0");
        double m = stats.mean, v = stats.sd * stats.sd;
        if (stats.sd == 0.0) {
            double rounded = std::round(m);
            if (std::abs(m - rounded) > 1e-9)
                throw ValidationError("sd = 0 requires an integer mean arrival rate");
            kind_ = Kind::Constant;
            constant_ = static_cast<std::uint32_t>(rounded);
        } else if (v > m) {
            kind_ = Kind::NegBinomial;
            gamma_ = std::gamma_distribution<double>(m * m / (v - m), (v - m) / m);
        } else if (v == m) {
            kind_ = Kind::Poisson;
            poisson_ = std::poisson_distribution<std::uint32_t>(m);
        } else {
            // underdispersed: moment-matched binomial
            double n = std::max(1.0, std::round(m * m / (m - v)));
            kind_ = Kind::Binomial;
            binomial_ = std::binomial_distribution<std::uint32_t>(
                static_cast<std::uint32_t>(n), std::min(1.0, m / n));
        }
    }

    std::uint32_t operator()(std::mt19937_64& rng) {
        switch (kind_) {
            case Kind::Constant: return constant_;
            case Kind::Poisson: return poisson_(rng);
            case Kind::Binomial: return binomial_(rng);
            case Kind::NegBinomial: {
                double lambda = gamma_(rng);
                return std::poisson_distribution<std::uint32_t>(lambda)(rng);
            }
        }
        return 0;
    }

private:
    enum class Kind { Constant, Poisson, Binomial, NegBinomial };
    Kind kind_ = Kind::Constant;
    std::uint32_t constant_ = 0;
    std::poisson_distribution<std::uint32_t> poisson_;
    std::binomial_distribution<std::uint32_t> binomial_;
    std::gamma_distribution<double> gamma_;
};

// Request-duration model; the source traces do not pin this down, so it is
// a configurable log-normal.
struct DurationDist {
    double log_mean = 4.0943445622221004;  // ln(60): one-hour median
    double log_sd = 1.0;
    SimTime min_minutes = 1;

    SimTime sample(std::mt19937_64& rng) const {
        if (log_sd == 0.0)
            return std::max<SimTime>(min_minutes,
                                     static_cast<SimTime>(std::llround(std::exp(log_mean))));
        double d = std::lognormal_distribution<double>(log_mean, log_sd)(rng);
        return std::max<SimTime>(min_minutes, static_cast<SimTime>(std::llround(d)));
    }
};

// Feeds the simulation one minute of arrivals at a time. Minutes must be
// queried in increasing order; reset() rewinds for another pass.
class TraceSource {
public:
    virtual ~TraceSource() = default;
    virtual SimTime horizon() const = 0;
    virtual void arrivals_at(SimTime minute, std::vector<UserRequest>& out) = 0;  // appends
    virtual void reset() = 0;
};

class VectorTraceSource final : public TraceSource {
public:
    explicit VectorTraceSource(const Trace& trace) : trace_(&trace) {}
    SimTime horizon() const override { return trace_->horizon; }
    void arrivals_at(SimTime minute, std::vector<UserRequest>& out) override {
        const auto& reqs = trace_->requests;
        while (pos_ < reqs.size() && reqs[pos_].start == minute) out.push_back(reqs[pos_++]);
    }
    void reset() override { pos_ = 0; }

private:
    const Trace* trace_;
    std::size_t pos_ = 0;
};

// Streaming synthetic workload; regenerates the identical request sequence
// on every pass for a fixed seed, without materializing the trace.
class SyntheticTraceSource final : public TraceSource {
public:
    SyntheticTraceSource(const TraceStats& stats, const DurationDist& durations, SimTime horizon,
                         std::uint64_t seed)
        : stats_(stats), durations_(durations), horizon_(horizon), seed_(seed),
          sampler_(stats), rng_(substream(seed, "trace/synthesize")) {}

    SimTime horizon() const override { return horizon_; }
    void arrivals_at(SimTime minute, std::vector<UserRequest>& out) override {
        std::uint32_t n = sampler_(rng_);
        for (std::uint32_t i = 0; i < n; ++i) {
            SimTime end = std::min<SimTime>(minute + durations_.sample(rng_), horizon_);
            if (end <= minute) end = minute + 1;
            out.push_back({next_id_++, minute, end});
        }
    }
    void reset() override {
        sampler_ = ArrivalSampler(stats_);
        rng_ = substream(seed_, "trace/synthesize");
        next_id_ = 0;
    }

private:
    TraceStats stats_;
    DurationDist durations_;
    SimTime horizon_;
    std::uint64_t seed_;
    ArrivalSampler sampler_;
    std::mt19937_64 rng_;
    RequestId next_id_ = 0;
};

// Generates a workload whose per-minute arrival counts reproduce the target
// (mean, sd). Durations crossing the horizon are truncated there.
inline Trace synthesize_trace(const TraceStats& stats, const DurationDist& durations,
                              SimTime horizon, std::uint64_t seed) {
    SyntheticTraceSource src(stats, durations, horizon, seed);
    Trace out;
    out.horizon = horizon;
    for (SimTime t = 0; t < horizon; ++t) src.arrivals_at(t, out.requests);
    return out;
}

// Stretches a short trace to a long horizon with a seasonal block bootstrap:
// source arrival counts are cut into fixed blocks, blocks are drawn with
// replacement to tile the target horizon, and durations are drawn from the
// source's empirical duration distribution.
inline Trace resample_trace(const Trace& src, SimTime target_horizon, std::uint64_t seed,
                            SimTime block_len = 60) {
    if (src.requests.empty()) throw ValidationError("resample_trace: source trace is empty");
    if (target_horizon <= src.horizon)
        throw ValidationError("resample_trace: target horizon must exceed the source horizon");
    if (block_len == 0) throw ConfigError("resample_trace: block_len must be > 0");

    std::vector<std::uint32_t> counts = arrival_counts(src);
    std::vector<SimTime> durations;
    durations.reserve(src.requests.size());
    for (const UserRequest& r : src.requests) durations.push_back(r.duration());

    std::size_t n_blocks = (counts.size() + block_len - 1) / block_len;
    std::mt19937_64 rng = substream(seed, "trace/resample");
    std::uniform_int_distribution<std::size_t> pick_block(0, n_blocks - 1);
    std::uniform_int_distribution<std::size_t> pick_dur(0, durations.size() - 1);

    Trace out;
    out.horizon = target_horizon;
    RequestId next = 0;
    for (SimTime base = 0; base < target_horizon; base += block_len) {
        std::size_t block = pick_block(rng);
        for (SimTime off = 0; off < block_len; ++off) {
            SimTime t = base + off;
            if (t >= target_horizon) break;
            SimTime src_t = block * block_len + off;
            std::uint32_t n = src_t < counts.size() ? counts[src_t] : 0;
            for (std::uint32_t i = 0; i < n; ++i) {
                SimTime end = std::min<SimTime>(t + durations[pick_dur(rng)], target_horizon);
                if (end <= t) end = t + 1;
                out.requests.push_back({next++, t, end});
            }
        }
    }
    return out;
}

// CSV schema: header `request_id,start_time,end_time`, integer minutes,
// `#` starts a comment line.
inline Trace load_trace(std::istream& in, const std::string& origin = "<stream>") {
    Trace out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::unordered_set<std::string> seen_ids;
    SimTime max_end = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "request_id,start_time,end_time")
                throw ValidationError(origin + ":" + std::to_string(lineno) +
                                      ": expected header request_id,start_time,end_time");
            header_seen = true;
            continue;
        }
        std::size_t c1 = line.find(',');
        std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": malformed row");
        std::string id = line.substr(0, c1);
        SimTime start, end;
        try {
            start = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
            end = std::stoull(line.substr(c2 + 1));
        } catch (const std::exception&) {
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": times must be non-negative integer minutes");
        }
        if (end <= start)
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": end_time must exceed start_time");
        if (!seen_ids.insert(id).second)
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": duplicate request_id " + id);
        out.requests.push_back({0, start, end});
        out.labels.push_back(std::move(id));
        max_end = std::max(max_end, end);
    }
    if (!header_seen && lineno > 0)
        throw ValidationError(origin + ": missing header request_id,start_time,end_time");
    // stable sort keeps file order among equal start times
    std::vector<std::size_t> order(out.requests.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.requests[a].start < out.requests[b].start;
    });
    Trace sorted;
    sorted.horizon = max_end;
    sorted.requests.reserve(out.requests.size());
    sorted.labels.reserve(out.labels.size());
    for (std::size_t i : order) {
        UserRequest r = out.requests[i];
        r.id = sorted.requests.size();
        sorted.requests.push_back(r);
        sorted.labels.push_back(std::move(out.labels[i]));
    }
    return sorted;
}

inline Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace file " + path.string());
    return load_trace(in, path.string());
}

inline void save_trace(const Trace& t, std::ostream& os) {
    os << "request_id,start_time,end_time\n";
    for (std::size_t i = 0; i < t.requests.size(); ++i)
        os << t.label(i) << ',' << t.requests[i].start << ',' << t.requests[i].end << '\n';
}

}  // namespace broker
