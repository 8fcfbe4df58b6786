#pragma once

#include "cdbn/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace cdbn::baselines {

struct ArimaOrder {
    int p = 0;
    int d = 0;
    int q = 0;

    auto operator<=>(const ArimaOrder&) const = default;
};

inline std::string to_string(const ArimaOrder& o) {
    return "(" + std::to_string(o.p) + "," + std::to_string(o.d) + "," + std::to_string(o.q) + ")";
}

/// ARIMA(p, d, q) fitted by conditional sum of squares. An intercept is only
/// estimated when d = 0; differenced models have none.
struct ArimaModel {
    ArimaOrder order;
    std::vector<double> ar_coeffs;
    std::vector<double> ma_coeffs;
    double intercept = 0.0;
    double sigma2 = 0.0;
    double sse = 0.0;
    double aic = 0.0;
    std::size_t residual_count = 0;
    std::size_t iterations = 0;
    /// Last max(p, q) + d observations and last q residuals of the training series.
    std::vector<double> tail_values;
    std::vector<double> tail_residuals;
};

struct ArimaGrid {
    std::vector<int> p{0, 1, 2, 3};
    std::vector<int> d{0, 1, 2};
    std::vector<int> q{0, 1, 2, 3};
};

struct ArimaFitOptions {
    std::size_t max_iterations = 500;
    double tolerance = 1e-8;
};

struct ArimaCandidate {
    ArimaOrder order;
    std::string status;  // "ok", "too_short", "non_convergence"
    double aic = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::vector<double> difference(std::span<const double> y, int d) {
    std::vector<double> w(y.begin(), y.end());
    for (int k = 0; k < d; ++k) {
        if (w.size() < 2) return {};
        for (std::size_t i = 0; i + 1 < w.size(); ++i) w[i] = w[i + 1] - w[i];
        w.pop_back();
    }
    return w;
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Adds back d levels of differencing: y_t = w_t + sum_k (-1)^(k+1) C(d,k) y_(t-k).
/// `previous` holds y_(t-1), y_(t-2), ... (most recent first).
inline double integrate(double w, int d, std::span<const double> previous) {
    double y = w;
    for (int k = 1; k <= d; ++k) y += ((k % 2) ? 1.0 : -1.0) * binomial(d, k) * previous[static_cast<std::size_t>(k - 1)];
    return y;
}

/// CSS residuals of an ARMA(p, q) on w: zero for t < p, and residuals before
/// index p treated as zero in the MA part.
inline std::vector<double> css_residuals(std::span<const double> w, int p, int q, double c,
                                         std::span<const double> ar, std::span<const double> ma) {
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = static_cast<std::size_t>(p); t < w.size(); ++t) {
        double pred = c;
        for (int i = 1; i <= p; ++i) pred += ar[static_cast<std::size_t>(i - 1)] * w[t - static_cast<std::size_t>(i)];
        for (int j = 1; j <= q; ++j)
            if (t >= static_cast<std::size_t>(j)) pred += ma[static_cast<std::size_t>(j - 1)] * e[t - static_cast<std::size_t>(j)];
        e[t] = w[t] - pred;
    }
    return e;
}

inline double sse_of(std::span<const double> e, int p) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(p); t < e.size(); ++t) s += e[t] * e[t];
    return s;
}

} // namespace detail

/// Fits one order by CSS. Minimization uses Gauss-Newton steps damped in the
/// Levenberg-Marquardt manner; a step is only kept when it lowers the SSE.
/// Returns nullopt when the series is too short for the order or the
/// iteration cap is hit without convergence.
inline std::optional<ArimaModel> fit_arima_order(std::span<const double> series, ArimaOrder order,
                                                 const ArimaFitOptions& opts = {}) {
    const auto w = detail::difference(series, order.d);
    const int p = order.p, q = order.q, k_params = p + q + 1;
    if (w.size() < static_cast<std::size_t>(10 * k_params) || w.size() <= static_cast<std::size_t>(p)) return std::nullopt;

    const bool has_intercept = order.d == 0;
    const int np = (has_intercept ? 1 : 0) + p + q;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(np);
    if (has_intercept) beta[0] = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());

    auto unpack = [&](const Eigen::VectorXd& b, double& c, std::vector<double>& ar, std::vector<double>& ma) {
        int at = 0;
        c = has_intercept ? b[at++] : 0.0;
        ar.assign(static_cast<std::size_t>(p), 0.0);
        ma.assign(static_cast<std::size_t>(q), 0.0);
        for (int i = 0; i < p; ++i) ar[static_cast<std::size_t>(i)] = b[at++];
        for (int j = 0; j < q; ++j) ma[static_cast<std::size_t>(j)] = b[at++];
    };

    double c = 0.0;
    std::vector<double> ar, ma;
    unpack(beta, c, ar, ma);
    auto e = detail::css_residuals(w, p, q, c, ar, ma);
    double sse = detail::sse_of(e, p);
    std::size_t iterations = 0;
    bool converged = np == 0 || (p == 0 && q == 0);  // intercept-only fits are closed form

    double lambda = 1e-3;
    const std::size_t n = w.size();
    while (!converged && iterations < opts.max_iterations) {
        ++iterations;
        // Jacobian of residuals by the recursion de_t = -x_t - sum_j theta_j de_(t-j).
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), np);
        for (std::size_t t = static_cast<std::size_t>(p); t < n; ++t) {
            int col = 0;
            const auto row = static_cast<Eigen::Index>(t);
            if (has_intercept) jac(row, col++) = -1.0;
            for (int i = 1; i <= p; ++i) jac(row, col++) = -w[t - static_cast<std::size_t>(i)];
            for (int j = 1; j <= q; ++j) jac(row, col++) = t >= static_cast<std::size_t>(j) ? -e[t - static_cast<std::size_t>(j)] : 0.0;
            for (int j = 1; j <= q; ++j)
                if (t >= static_cast<std::size_t>(j) + static_cast<std::size_t>(p))
                    jac.row(row) -= ma[static_cast<std::size_t>(j - 1)] * jac.row(row - j);
        }
        Eigen::VectorXd resid = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(n));
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jte = jac.transpose() * resid;

        bool accepted = false;
        while (lambda < 1e12) {
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd step = lhs.ldlt().solve(-jte);
            const Eigen::VectorXd trial = beta + step;
            double tc = 0.0;
            std::vector<double> tar, tma;
            unpack(trial, tc, tar, tma);
            auto te = detail::css_residuals(w, p, q, tc, tar, tma);
            const double tsse = detail::sse_of(te, p);
            if (std::isfinite(tsse) && tsse <= sse) {
                const double rel = (sse - tsse) / std::max(sse, 1e-300);
                const double step_norm = step.norm();
                beta = trial;
                c = tc;
                ar = std::move(tar);
                ma = std::move(tma);
                e = std::move(te);
                sse = tsse;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel < opts.tolerance || step_norm < opts.tolerance * (beta.norm() + opts.tolerance)) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        // No descent direction left at any damping: stationary to working precision.
        if (!accepted) converged = true;
    }
    if (!converged || !std::isfinite(sse)) return std::nullopt;

    ArimaModel m;
    m.order = order;
    m.ar_coeffs = ar;
    m.ma_coeffs = ma;
    m.intercept = c;
    m.sse = sse;
    m.iterations = iterations;
    m.residual_count = n - static_cast<std::size_t>(p);
    const double resid_n = static_cast<double>(m.residual_count);
    m.sigma2 = sse / resid_n;
    m.aic = resid_n * std::log(std::max(sse, 1e-300) / resid_n) + 2.0 * k_params;
    const std::size_t keep = static_cast<std::size_t>(std::max(p, q) + order.d);
    m.tail_values.assign(series.end() - static_cast<std::ptrdiff_t>(std::min(keep, series.size())), series.end());
    m.tail_residuals.assign(e.end() - static_cast<std::ptrdiff_t>(std::min<std::size_t>(static_cast<std::size_t>(q), e.size())), e.end());
    return m;
}

struct ArimaSearch {
    ArimaModel best;
    std::vector<ArimaCandidate> candidates;
};

/// Grid search by AIC; ties go to the smaller p + q, then the smaller (p, d, q).
inline ArimaSearch arima_grid_search(std::span<const double> series, const ArimaGrid& grid = {},
                                     const ArimaFitOptions& opts = {}) {
    if (series.size() < 50)
        throw Error(ErrorCode::TooShort, "ARIMA needs at least 50 observations, got " + std::to_string(series.size()));
    ArimaSearch out;
    std::optional<ArimaModel> best;
    for (int p : grid.p)
        for (int d : grid.d)
            for (int q : grid.q) {
                ArimaOrder order{p, d, q};
                if (p < 0 || d < 0 || q < 0) throw Error(ErrorCode::InvalidConfig, "negative ARIMA order");
                const auto w_len = series.size() > static_cast<std::size_t>(d) ? series.size() - static_cast<std::size_t>(d) : 0;
                if (w_len < static_cast<std::size_t>(10 * (p + q + 1))) {
                    out.candidates.push_back({order, "too_short"});
                    continue;
                }
                auto fit = fit_arima_order(series, order, opts);
                if (!fit) {
                    out.candidates.push_back({order, "non_convergence"});
                    continue;
                }
                out.candidates.push_back({order, "ok", fit->aic});
                auto rank = [](const ArimaModel& m) {
                    return std::tuple{m.aic, m.order.p + m.order.q, m.order};
                };
                if (!best || rank(*fit) < rank(*best)) best = std::move(fit);
            }
    if (!best) {
        std::string msg = "no ARIMA candidate converged:";
        for (const auto& c : out.candidates) msg += " " + to_string(c.order) + "=" + c.status;
        throw Error(ErrorCode::NonConvergence, msg);
    }
    out.best = std::move(*best);
    return out;
}

inline ArimaModel fit_arima(std::span<const double> series, const ArimaGrid& grid = {}, const ArimaFitOptions& opts = {}) {
    return arima_grid_search(series, grid, opts).best;
}

/// Forecast `horizon` steps past the training data (future shocks set to 0).
inline double arima_forecast(const ArimaModel& m, std::size_t horizon = 1) {
    const int p = m.order.p, q = m.order.q, d = m.order.d;
    std::vector<double> y = m.tail_values;  // oldest first
    std::vector<double> e = m.tail_residuals;
    double y_next = 0.0;
    for (std::size_t h = 0; h < std::max<std::size_t>(1, horizon); ++h) {
        const auto w = detail::difference(y, d);
        double w_next = m.intercept;
        for (int i = 1; i <= p; ++i) w_next += m.ar_coeffs[static_cast<std::size_t>(i - 1)] * w[w.size() - static_cast<std::size_t>(i)];
        for (int j = 1; j <= q; ++j)
            if (e.size() >= static_cast<std::size_t>(j)) w_next += m.ma_coeffs[static_cast<std::size_t>(j - 1)] * e[e.size() - static_cast<std::size_t>(j)];
        std::vector<double> prev(y.rbegin(), y.rend());
        y_next = detail::integrate(w_next, d, prev);
        y.push_back(y_next);
        e.push_back(0.0);
    }
    return y_next;
}

/// One-step forecasts with the fitted parameters held fixed: element k is the
/// forecast of series[first + k] from series[0 .. first + k - 1].
inline std::vector<double> arima_one_step_forecasts(const ArimaModel& m, std::span<const double> series, std::size_t first) {
    const int p = m.order.p, q = m.order.q, d = m.order.d;
    if (first < static_cast<std::size_t>(p + d) || first > series.size())
        throw Error(ErrorCode::TooShort, "not enough history before the first forecast index");
    const auto w = detail::difference(series, d);  // w[s] belongs to series[s + d]
    const auto e = detail::css_residuals(w, p, q, m.intercept, m.ar_coeffs, m.ma_coeffs);
    std::vector<double> out;
    for (std::size_t t = first; t < series.size(); ++t) {
        const std::size_t s = t - static_cast<std::size_t>(d);
        double w_hat = m.intercept;
        for (int i = 1; i <= p; ++i) w_hat += m.ar_coeffs[static_cast<std::size_t>(i - 1)] * w[s - static_cast<std::size_t>(i)];
        for (int j = 1; j <= q; ++j)
            if (s >= static_cast<std::size_t>(j)) w_hat += m.ma_coeffs[static_cast<std::size_t>(j - 1)] * e[s - static_cast<std::size_t>(j)];
        std::vector<double> prev;
        for (int k = 1; k <= d; ++k) prev.push_back(series[t - static_cast<std::size_t>(k)]);
        out.push_back(detail::integrate(w_hat, d, prev));
    }
    return out;
}

} // namespace cdbn::baselines
