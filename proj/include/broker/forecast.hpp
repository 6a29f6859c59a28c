#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "broker/domain.hpp"
#include "broker/errors.hpp"

namespace broker {

struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;
};

struct ArimaModel {
    ArimaOrder order;
    std::vector<double> ar;  // phi_1..p
    std::vector<double> ma;  // theta_1..q
    double intercept = 0.0;
    double aic = std::numeric_limits<double>::infinity();
    bool fallback = false;  // (0,1,0) random walk used because no candidate converged
};

struct ArimaConfig {
    ArimaOrder grid_max{3, 2, 3};
    SimTime refit_period_min = kMinutesPerDay;
    SimTime period_min = 60;  // demand aggregation period for fitting
    enum class Target { Active, Arrivals } target = Target::Active;
};

namespace detail {

inline std::vector<double> difference(std::span<const double> y, int d) {
    std::vector<double> w(y.begin(), y.end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i + 1 < w.size(); ++i) w[i] = w[i + 1] - w[i];
        w.pop_back();
    }
    return w;
}

// Conditional residuals: e_t = w_t - c - sum phi_i w_{t-i} - sum theta_j e_{t-j},
// for t in [p, n), with pre-sample residuals fixed at zero.
inline double css_residuals(const std::vector<double>& w, int p, int q,
                            const std::vector<double>& params, std::vector<double>& e) {
    const double c = params[0];
    const double* phi = params.data() + 1;
    const double* theta = params.data() + 1 + p;
    std::size_t n = w.size();
    e.assign(n, 0.0);
    double rss = 0.0;
    for (std::size_t t = static_cast<std::size_t>(p); t < n; ++t) {
        double pred = c;
        for (int i = 1; i <= p; ++i) pred += phi[i - 1] * w[t - i];
        for (int j = 1; j <= q; ++j)
            if (t >= static_cast<std::size_t>(j)) pred += theta[j - 1] * e[t - j];
        e[t] = w[t] - pred;
        rss += e[t] * e[t];
    }
    return rss;
}

// Solves A x = b in place, k <= 8. Returns false on a singular system.
inline bool solve_linear(std::vector<double>& a, std::vector<double>& b, int k) {
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
        if (std::abs(a[piv * k + col]) < 1e-14) return false;
        if (piv != col) {
            for (int cc = 0; cc < k; ++cc) std::swap(a[col * k + cc], a[piv * k + cc]);
            std::swap(b[col], b[piv]);
        }
        for (int r = col + 1; r < k; ++r) {
            double f = a[r * k + col] / a[col * k + col];
            for (int cc = col; cc < k; ++cc) a[r * k + cc] -= f * a[col * k + cc];
            b[r] -= f * b[col];
        }
    }
    for (int r = k - 1; r >= 0; --r) {
        double s = b[r];
        for (int cc = r + 1; cc < k; ++cc) s -= a[r * k + cc] * b[cc];
        b[r] = s / a[r * k + r];
    }
    return true;
}

}  // namespace detail

// Conditional-sum-of-squares fit of a single ARIMA(p,d,q) candidate using a
// damped Gauss-Newton iteration with a numeric Jacobian. Deterministic:
// fixed start (intercept = mean, zero AR/MA), no random restarts.
inline ArimaModel fit_arima(std::span<const double> series, ArimaOrder order) {
    ArimaModel m;
    m.order = order;
    std::vector<double> w = detail::difference(series, order.d);
    int p = order.p, q = order.q;
    int k = 1 + p + q;
    std::ptrdiff_t n_eff = static_cast<std::ptrdiff_t>(w.size()) - p;
    if (n_eff < k + 1) return m;  // aic stays +inf: not enough data

    std::vector<double> params(k, 0.0);
    double mean = 0.0;
    for (double v : w) mean += v;
    params[0] = w.empty() ? 0.0 : mean / static_cast<double>(w.size());

    std::vector<double> e, e2;
    double rss = detail::css_residuals(w, p, q, params, e);
    if (!std::isfinite(rss)) return m;

    double lambda = 1e-3;
    std::vector<double> jac(static_cast<std::size_t>(n_eff) * k);
    for (int iter = 0; iter < 100; ++iter) {
        // numeric Jacobian of the residual vector
        for (int j = 0; j < k; ++j) {
            double h = 1e-6 * (1.0 + std::abs(params[j]));
            std::vector<double> pj = params;
            pj[j] += h;
            detail::css_residuals(w, p, q, pj, e2);
            for (std::ptrdiff_t t = 0; t < n_eff; ++t)
                jac[static_cast<std::size_t>(t) * k + j] = (e2[t + p] - e[t + p]) / h;
        }
        std::vector<double> jtj(static_cast<std::size_t>(k) * k, 0.0), jte(k, 0.0);
        for (std::ptrdiff_t t = 0; t < n_eff; ++t) {
            const double* row = &jac[static_cast<std::size_t>(t) * k];
            double res = e[t + p];
            for (int a = 0; a < k; ++a) {
                jte[a] -= row[a] * res;
                for (int b = a; b < k; ++b) jtj[a * k + b] += row[a] * row[b];
            }
        }
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < a; ++b) jtj[a * k + b] = jtj[b * k + a];

        bool improved = false;
        for (int attempt = 0; attempt < 8 && !improved; ++attempt) {
            std::vector<double> a = jtj, delta = jte;
            for (int i = 0; i < k; ++i) a[i * k + i] += lambda * (1.0 + jtj[i * k + i]);
            if (!detail::solve_linear(a, delta, k)) {
                lambda *= 10;
                continue;
            }
            std::vector<double> trial = params;
            for (int i = 0; i < k; ++i) trial[i] += delta[i];
            double trial_rss = detail::css_residuals(w, p, q, trial, e2);
            if (std::isfinite(trial_rss) && trial_rss <= rss) {
                improved = trial_rss < rss * (1.0 - 1e-12);
                params = std::move(trial);
                std::swap(e, e2);
                double old = rss;
                rss = trial_rss;
                lambda = std::max(lambda * 0.3, 1e-12);
                if (old - rss <= 1e-12 * std::max(old, 1e-12)) {
                    improved = false;
                    iter = 100;  // converged
                }
                break;
            }
            lambda *= 10;
        }
        if (!improved) break;
    }

    if (!std::isfinite(rss)) return m;
    m.intercept = params[0];
    m.ar.assign(params.begin() + 1, params.begin() + 1 + p);
    m.ma.assign(params.begin() + 1 + p, params.end());
    double n = static_cast<double>(n_eff);
    m.aic = n * std::log(std::max(rss, 1e-300) / n) + 2.0 * k;
    return m;
}

// AIC-minimal candidate over the full (p,d,q) grid, iterated lexicographically
// so ties keep the smallest order. Falls back to a (0,1,0) random walk if
// nothing converges.
inline ArimaModel fit_auto_arima(std::span<const double> series, ArimaOrder grid_max = {3, 2, 3}) {
    std::size_t min_len =
        2 * static_cast<std::size_t>(grid_max.p + grid_max.d + grid_max.q + 1);
    if (series.size() < min_len)
        throw ValidationError("fit_auto_arima: series too short (" +
                              std::to_string(series.size()) + " < " + std::to_string(min_len) +
                              ")");
    ArimaModel best;
    for (int p = 0; p <= grid_max.p; ++p)
        for (int d = 0; d <= grid_max.d; ++d)
            for (int q = 0; q <= grid_max.q; ++q) {
                ArimaModel cand = fit_arima(series, {p, d, q});
                if (cand.aic < best.aic) best = std::move(cand);
            }
    if (!std::isfinite(best.aic)) {
        best = ArimaModel{};
        best.order = {0, 1, 0};
        best.aic = 0.0;
        best.fallback = true;
    }
    return best;
}

// Point forecasts for `steps` periods ahead, clamped to >= 0.
inline std::vector<double> forecast_demand(const ArimaModel& m, std::span<const double> history,
                                           std::size_t steps) {
    int p = m.order.p, d = m.order.d, q = m.order.q;
    if (history.size() <= static_cast<std::size_t>(d))
        throw ValidationError("forecast_demand: history shorter than differencing order");
    std::vector<double> w = detail::difference(history, d);

    std::vector<double> params;
    params.push_back(m.intercept);
    params.insert(params.end(), m.ar.begin(), m.ar.end());
    params.insert(params.end(), m.ma.begin(), m.ma.end());
    std::vector<double> e;
    if (!w.empty()) detail::css_residuals(w, p, q, params, e);

    // integration tails: last value of each differencing level
    std::vector<double> tails(d);
    {
        std::vector<double> level(history.begin(), history.end());
        for (int l = 0; l < d; ++l) {
            tails[l] = level.back();
            for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = level[i + 1] - level[i];
            level.pop_back();
        }
    }

    std::vector<double> out;
    out.reserve(steps);
    std::size_t n = w.size();
    for (std::size_t h = 1; h <= steps; ++h) {
        double pred = m.intercept;
        for (int i = 1; i <= p; ++i) {
            std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(n + h - 1) - i;
            double past = idx >= static_cast<std::ptrdiff_t>(n)
                              ? w[idx]  // previously appended forecast
                              : (idx >= 0 ? w[idx] : 0.0);
            pred += m.ar[i - 1] * past;
        }
        for (int j = 1; j <= q; ++j) {
            std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(n + h - 1) - j;
            // future shocks are zero; only observed residuals contribute
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(e.size())) pred += m.ma[j - 1] * e[idx];
        }
        w.push_back(pred);
        double y = pred;
        for (int l = d - 1; l >= 0; --l) {
            y += tails[l];
            tails[l] = y;
        }
        out.push_back(std::max(0.0, y));
    }
    return out;
}

}  // namespace broker
