#pragma once

#include "cdbn/baselines/arima.hpp"
#include "cdbn/baselines/svr.hpp"
#include "cdbn/direction.hpp"
#include "cdbn/error.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <vector>

/// Close-price reference models whose continuous forecasts are turned into
/// directions with the same rule used to label the data.
namespace cdbn::baselines {

/// Down when the forecast falls below the previous close, Up otherwise.
inline Direction forecast_direction(double forecast, double previous_close) {
    return forecast < previous_close ? Direction::Down : Direction::Up;
}

inline std::vector<Direction> baseline_directions(std::span<const double> forecasts, std::span<const double> previous_closes) {
    if (forecasts.size() != previous_closes.size())
        throw Error(ErrorCode::DimensionMismatch, "forecast and previous-close series differ in length");
    std::vector<Direction> out;
    out.reserve(forecasts.size());
    for (std::size_t i = 0; i < forecasts.size(); ++i) out.push_back(forecast_direction(forecasts[i], previous_closes[i]));
    return out;
}

struct BaselineConfig {
    ArimaGrid arima_grid;
    SvrGrid svr_grid;
    std::size_t svr_lags = 5;
};

struct BaselineForecasts {
    std::string description;
    /// Forecast for each requested index.
    std::vector<double> forecasts;
    std::vector<Direction> directions;
};

namespace detail {

inline void check_targets(std::span<const double> close, std::size_t train_end, std::span<const std::size_t> targets) {
    for (auto t : targets)
        if (t <= train_end || t >= close.size())
            throw Error(ErrorCode::InvalidConfig, "baseline target index outside the test segment");
}

inline std::vector<double> previous_closes(std::span<const double> close, std::span<const std::size_t> targets) {
    std::vector<double> out;
    for (auto t : targets) out.push_back(close[t - 1]);
    return out;
}

} // namespace detail

/// Fits ARIMA on close[0..train_end] and forecasts each target index one step
/// ahead from the observations before it.
inline BaselineForecasts arima_baseline(std::span<const double> close, std::size_t train_end,
                                        std::span<const std::size_t> targets, const ArimaGrid& grid = {}) {
    detail::check_targets(close, train_end, targets);
    const auto model = fit_arima(close.subspan(0, train_end + 1), grid);
    BaselineForecasts out;
    out.description = to_string(model.order);
    if (!targets.empty()) {
        const auto first = *std::min_element(targets.begin(), targets.end());
        const auto all = arima_one_step_forecasts(model, close, first);
        for (auto t : targets) out.forecasts.push_back(all[t - first]);
    }
    out.directions = baseline_directions(out.forecasts, detail::previous_closes(close, targets));
    return out;
}

/// Lagged, min-max scaled closes: features of index t are the scaled closes
/// at t-1, ..., t-lags.
inline std::vector<double> lag_features(std::span<const double> scaled, std::size_t t, std::size_t lags) {
    std::vector<double> f;
    for (std::size_t k = 1; k <= lags; ++k) f.push_back(scaled[t - k]);
    return f;
}

/// SVR on lagged closes, scaled with training-segment min/max. Samples for
/// fitting are the indices lags..train_end.
inline BaselineForecasts svr_baseline(std::span<const double> close, std::size_t train_end,
                                      std::span<const std::size_t> targets, const SvrGrid& grid = {},
                                      std::size_t lags = 5) {
    detail::check_targets(close, train_end, targets);
    auto [lo, hi] = std::minmax_element(close.begin(), close.begin() + static_cast<std::ptrdiff_t>(train_end + 1));
    const double mn = *lo, span = *hi > *lo ? *hi - *lo : 1.0;
    std::vector<double> scaled;
    for (double v : close) scaled.push_back((v - mn) / span);

    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (std::size_t t = lags; t <= train_end; ++t) {
        x.push_back(lag_features(scaled, t, lags));
        y.push_back(scaled[t]);
    }
    const auto search = fit_svr(x, y, grid);
    BaselineForecasts out;
    const auto& p = search.best.params;
    out.description = describe(p);
    for (auto t : targets) out.forecasts.push_back(svr_predict(search.best, lag_features(scaled, t, lags)) * span + mn);
    out.directions = baseline_directions(out.forecasts, detail::previous_closes(close, targets));
    return out;
}

} // namespace cdbn::baselines
