#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>

#include "broker/domain.hpp"
#include "broker/errors.hpp"

namespace broker {

enum class ThresholdMode { Geq, Leq };

struct RiskConfig {
    std::array<double, 3> weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // anomaly, count, volume
    double anomaly_window_frac = 0.10;  // share of the contract length
    double sd_multiplier = 2.0;
    double adjustment_step = 0.05;
    double decision_threshold = 0.5;
    ThresholdMode threshold_mode = ThresholdMode::Geq;

    SimTime window_len(SimTime contract_len) const {
        SimTime w = static_cast<SimTime>(anomaly_window_frac * static_cast<double>(contract_len));
        return std::max<SimTime>(w, 1);
    }
    void validate() const {
        for (double w : weights)
            if (w < 0) throw ConfigError("risk weights must be non-negative");
        if (anomaly_window_frac <= 0 || anomaly_window_frac > 1)
            throw ConfigError("anomaly_window_frac must be in (0,1]");
        if (sd_multiplier <= 0) throw ConfigError("sd_multiplier must be > 0");
        if (adjustment_step < 0) throw ConfigError("adjustment_step must be >= 0");
    }
};

struct WindowStats {
    double mean = 0.0;
    double sd = 0.0;  // population sd
    SimTime window_len = 0;
};

// Mean and population sd of series values in [now - window_len, now).
// With a short history all available points are used; with none, (0, 0).
inline WindowStats window_stats(std::span<const double> series, SimTime now, SimTime window_len) {
    SimTime end = std::min<SimTime>(now, series.size());
    SimTime begin = end > window_len ? end - window_len : 0;
    WindowStats ws;
    ws.window_len = window_len;
    std::size_t n = static_cast<std::size_t>(end - begin);
    if (n == 0) return ws;
    double sum = 0.0, sumsq = 0.0;
    for (SimTime i = begin; i < end; ++i) {
        sum += series[i];
        sumsq += series[i] * series[i];
    }
    ws.mean = sum / static_cast<double>(n);
    double var = sumsq / static_cast<double>(n) - ws.mean * ws.mean;
    ws.sd = var > 0 ? std::sqrt(var) : 0.0;
    return ws;
}

// Incremental window over a per-minute series; one push per minute.
class RollingWindow {
public:
    explicit RollingWindow(SimTime capacity) : capacity_(std::max<SimTime>(capacity, 1)) {}

    void push(double v) {
        buf_.push_back(v);
        sum_ += v;
        sumsq_ += v * v;
        if (buf_.size() > capacity_) {
            double old = buf_[head_++];
            sum_ -= old;
            sumsq_ -= old * old;
            if (head_ > capacity_) {  // compact occasionally
                buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
                head_ = 0;
            }
        }
    }

    WindowStats stats() const {
        WindowStats ws;
        ws.window_len = capacity_;
        std::size_t n = buf_.size() - head_;
        if (n == 0) return ws;
        ws.mean = sum_ / static_cast<double>(n);
        double var = sumsq_ / static_cast<double>(n) - ws.mean * ws.mean;
        ws.sd = var > 0 ? std::sqrt(var) : 0.0;
        return ws;
    }

private:
    SimTime capacity_;
    std::vector<double> buf_;
    std::size_t head_ = 0;
    double sum_ = 0.0, sumsq_ = 0.0;
};

// Mean-sd anomaly score: 0 below the mean, linear up to mean + k*sd, then 1.
// sd == 0 degenerates to a step at the mean.
inline double anomaly_risk(double current, const WindowStats& stats, double sd_multiplier = 2.0) {
    if (current < stats.mean) return 0.0;
    if (stats.sd == 0.0) return current <= stats.mean ? 0.0 : 1.0;
    double upper = stats.mean + sd_multiplier * stats.sd;
    if (current > upper) return 1.0;
    return (current - stats.mean) / (sd_multiplier * stats.sd);
}

// Same scoring applied to the reserved-instance-count series.
inline double pool_count_risk(double current_count, const WindowStats& stats,
                              double sd_multiplier = 2.0) {
    return anomaly_risk(current_count, stats, sd_multiplier);
}

// Remaining contract minutes over the maximum possible, sum(vol_i) / (N * len).
inline double pool_volume_risk(SimTime total_remaining, std::size_t count, SimTime contract_len) {
    if (count == 0 || contract_len == 0) return 0.0;
    return static_cast<double>(total_remaining) /
           (static_cast<double>(count) * static_cast<double>(contract_len));
}

inline double pool_volume_risk(ResourcePool& pool, SimTime now, SimTime contract_len) {
    auto [total, count] = pool.volume(now);
    return pool_volume_risk(total, count, contract_len);
}

// Revenue-trend adjustment: the broker takes more risk (lower r) when the
// most recent period earned more than the one before.
inline double revenue_adjustment(double revenue_recent, double revenue_previous,
                                 double step = 0.05) {
    if (revenue_recent > revenue_previous) return -step;
    if (revenue_recent < revenue_previous) return step;
    return 0.0;
}

struct RiskVector {
    double anomaly = 0.0;
    double pool_count = 0.0;
    double pool_volume = 0.0;
    double revenue_adjustment = 0.0;
};

// Weighted sum of the factors plus the adjustment, clamped to [0,1].
inline double aggregate_risk(const RiskVector& v, const std::array<double, 3>& weights) {
    for (double w : weights)
        if (w < 0) throw ConfigError("aggregate_risk: negative weight");
    double r = weights[0] * v.anomaly + weights[1] * v.pool_count + weights[2] * v.pool_volume +
               v.revenue_adjustment;
    return std::clamp(r, 0.0, 1.0);
}

enum class Placement { CreateReserved, CreateOnDemand };

// Stochastic decision: S = 1 at zero risk, else 1 - exp(-draw / r).
// Reserved when S clears the threshold; higher risk makes that rarer.
inline Placement decide(double r, double draw, const RiskConfig& cfg = RiskConfig{}) {
    if (r < 0.0 || r > 1.0)
        throw ValidationError("decide: aggregated risk " + std::to_string(r) + " outside [0,1]");
    double s = r == 0.0 ? 1.0 : 1.0 - std::exp(-draw / r);
    bool reserved = cfg.threshold_mode == ThresholdMode::Geq ? s >= cfg.decision_threshold
                                                             : s <= cfg.decision_threshold;
    return reserved ? Placement::CreateReserved : Placement::CreateOnDemand;
}

// Closed-form P(CreateReserved) of decide() under the default threshold:
// 1 - min(r * ln 2, 1), strictly decreasing on (0, 1].
inline double reserved_probability(double r) {
    if (r == 0.0) return 1.0;
    return 1.0 - std::min(r * std::numbers::ln2_v<double>, 1.0);
}

}  // namespace broker
