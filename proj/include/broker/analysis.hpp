#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "broker/errors.hpp"

namespace broker {

// x -> (x - min) / (max - min); a constant series maps to the midpoint 0.5
// so downstream plots stay well defined.
inline std::vector<double> minmax_normalize(std::span<const double> series) {
    if (series.empty()) throw ValidationError("minmax_normalize: empty series");
    auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(series.size());
    if (lo == hi) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - lo) / (hi - lo);
    return out;
}

namespace detail {

// Regularized incomplete beta function I_x(a, b), continued-fraction form.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log(1.0 - x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided p-value of a t statistic with nu degrees of freedom.
inline double t_two_sided_p(double t, double nu) {
    if (!std::isfinite(t)) return 0.0;
    double x = nu / (nu + t * t);
    return incbeta(nu / 2.0, 0.5, x);
}

inline double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// Average ranks, ties shared.
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace detail

enum class CorrelationMethod { Pearson, Spearman, Kendall };

inline const char* correlation_method_name(CorrelationMethod m) {
    switch (m) {
        case CorrelationMethod::Pearson: return "pearson";
        case CorrelationMethod::Spearman: return "spearman";
        case CorrelationMethod::Kendall: return "kendall";
    }
    return "?";
}

struct CorrelationResult {
    CorrelationMethod method;
    double coefficient;  // in [-1, 1]
    double p_value;      // in [0, 1]
};

inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("correlate: length mismatch");
    std::size_t n = x.size();
    if (n < 3) throw ValidationError("correlate: need at least 3 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0)
        throw ValidationError("correlate: zero variance, coefficient undefined");
    double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    double nu = static_cast<double>(n - 2);
    double p;
    if (std::abs(r) == 1.0)
        p = 0.0;
    else
        p = detail::t_two_sided_p(r * std::sqrt(nu / (1.0 - r * r)), nu);
    return {CorrelationMethod::Pearson, r, p};
}

// Pearson on tie-averaged ranks.
inline CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("correlate: length mismatch");
    std::vector<double> rx = detail::ranks(x), ry = detail::ranks(y);
    CorrelationResult r = pearson(rx, ry);
    r.method = CorrelationMethod::Spearman;
    return r;
}

// Kendall tau-b with a tie-corrected normal-approximation p-value.
inline CorrelationResult kendall(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("correlate: length mismatch");
    std::size_t n = x.size();
    if (n < 3) throw ValidationError("correlate: need at least 3 points");
    std::int64_t concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double a = x[i] - x[j], b = y[i] - y[j];
            double s = a * b;
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
        }
    auto tie_sums = [](std::span<const double> v) {
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        double t1 = 0, t2 = 0, t3 = 0;  // sum t(t-1), t(t-1)(2t+5), t(t-1)(t-2)
        std::size_t i = 0;
        while (i < s.size()) {
            std::size_t j = i;
            while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
            double t = static_cast<double>(j - i + 1);
            t1 += t * (t - 1);
            t2 += t * (t - 1) * (2 * t + 5);
            t3 += t * (t - 1) * (t - 2);
            i = j + 1;
        }
        return std::array<double, 3>{t1, t2, t3};
    };
    auto [xt1, xt2, xt3] = tie_sums(x);
    auto [yt1, yt2, yt3] = tie_sums(y);
    double dn = static_cast<double>(n);
    double n0 = dn * (dn - 1) / 2.0;
    double n1 = xt1 / 2.0, n2 = yt1 / 2.0;
    double denom = std::sqrt((n0 - n1) * (n0 - n2));
    if (denom == 0) throw ValidationError("correlate: zero variance, coefficient undefined");
    double s = static_cast<double>(concordant - discordant);
    double tau = std::clamp(s / denom, -1.0, 1.0);
    double v0 = dn * (dn - 1) * (2 * dn + 5);
    double var = (v0 - xt2 - yt2) / 18.0 + xt1 * yt1 / (2.0 * dn * (dn - 1)) +
                 xt3 * yt3 / (9.0 * dn * (dn - 1) * (dn - 2));
    double p = var > 0 ? detail::normal_two_sided_p(s / std::sqrt(var)) : 1.0;
    return {CorrelationMethod::Kendall, tau, p};
}

inline CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                                   CorrelationMethod method) {
    switch (method) {
        case CorrelationMethod::Pearson: return pearson(x, y);
        case CorrelationMethod::Spearman: return spearman(x, y);
        case CorrelationMethod::Kendall: return kendall(x, y);
    }
    throw ValidationError("correlate: unknown method");
}

// Percentage over/under-estimation per period, 100 * (forecast - actual) / actual.
// Periods with actual == 0 get an infinity sentinel and are excluded from
// aggregate statistics by the callers.
inline std::vector<double> estimation_error_series(std::span<const double> forecasts,
                                                   std::span<const double> actuals) {
    if (forecasts.size() != actuals.size())
        throw ValidationError("estimation_error_series: length mismatch");
    std::vector<double> out(forecasts.size());
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        if (actuals[i] == 0.0)
            out[i] = forecasts[i] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        else
            out[i] = 100.0 * (forecasts[i] - actuals[i]) / actuals[i];
    }
    return out;
}

struct StrategySummary {
    std::string name;
    double highest = 0, lowest = 0, mean = 0;
    std::vector<double> series;
};

struct ComparisonTable {
    std::vector<StrategySummary> rows;
};

inline ComparisonTable compare_strategies(
    const std::vector<std::pair<std::string, std::vector<double>>>& per_strategy_psi) {
    ComparisonTable table;
    std::size_t len = 0;
    for (const auto& [name, series] : per_strategy_psi) {
        if (series.empty()) throw ValidationError("compare_strategies: empty series for " + name);
        if (len == 0) len = series.size();
        if (series.size() != len)
            throw ValidationError("compare_strategies: series length mismatch for " + name);
        StrategySummary row;
        row.name = name;
        row.series = series;
        row.highest = *std::max_element(series.begin(), series.end());
        row.lowest = *std::min_element(series.begin(), series.end());
        double sum = 0;
        for (double v : series) sum += v;
        row.mean = sum / static_cast<double>(series.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline std::vector<double> series_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("series_difference: length mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

}  // namespace broker
