#pragma once

#include "cdbn/error.hpp"
#include "cdbn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

/// Technical indicators over daily OHLCV series.
///
/// Every function returns a full-length series; leading entries that the
/// indicator cannot define yet hold NaN and are counted in `warm_up`.
namespace cdbn::indicators {

using Series = std::span<const double>;

struct IndicatorSeries {
    std::vector<double> values;
    std::size_t warm_up = 0;

    std::size_t size() const noexcept { return values.size(); }
    bool defined(std::size_t i) const noexcept { return i >= warm_up && i < values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

struct IndicatorConfig {
    std::size_t sma_window = 10;
    std::size_t ema_window = 10;
    std::size_t rsi_window = 14;
    std::size_t bband_window = 5;
    double bband_k = 2.0;
    std::size_t macd_fast = 12;
    std::size_t macd_slow = 26;
    std::size_t macd_signal = 9;
    std::size_t natr_window = 14;
    std::size_t stoch_window = 14;
    std::size_t stoch_smooth = 3;

    void validate() const {
        for (auto w : {sma_window, ema_window, rsi_window, bband_window, macd_fast, macd_slow, macd_signal,
                       natr_window, stoch_window, stoch_smooth})
            if (w < 1) throw Error(ErrorCode::InvalidConfig, "indicator windows must be >= 1");
        if (macd_fast >= macd_slow) throw Error(ErrorCode::InvalidConfig, "macd_fast must be < macd_slow");
        if (!(bband_k >= 0.0)) throw Error(ErrorCode::InvalidConfig, "bband_k must be >= 0");
    }
};

namespace detail {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline void require_window(std::size_t window) {
    if (window < 1) throw Error(ErrorCode::InvalidConfig, "window must be >= 1");
}

inline void require_length(std::size_t have, std::size_t need, const char* what) {
    if (have < need)
        throw Error(ErrorCode::TooShort, std::string(what) + " needs " + std::to_string(need) + " points, got " +
                                             std::to_string(have));
}

inline void require_same_length(std::initializer_list<std::size_t> sizes) {
    if (std::adjacent_find(sizes.begin(), sizes.end(), std::not_equal_to<>()) != sizes.end())
        throw Error(ErrorCode::DimensionMismatch, "input series differ in length");
}

/// EMA over values[start..], seeded with the mean of its first `window` entries.
inline IndicatorSeries ema_from(Series values, std::size_t start, std::size_t window) {
    IndicatorSeries out{std::vector<double>(values.size(), kUndefined), start + window - 1};
    if (out.warm_up >= values.size()) {
        out.warm_up = values.size();
        return out;
    }
    double seed = 0.0;
    for (std::size_t i = start; i < start + window; ++i) seed += values[i];
    out.values[out.warm_up] = seed / static_cast<double>(window);
    const double alpha = 2.0 / (static_cast<double>(window) + 1.0);
    for (std::size_t t = out.warm_up + 1; t < values.size(); ++t)
        out.values[t] = alpha * values[t] + (1.0 - alpha) * out.values[t - 1];
    return out;
}

/// Wilder smoothing of values[first..]: plain mean over the first `window`
/// entries, then avg = (prev * (window - 1) + current) / window.
inline std::vector<double> wilder(Series values, std::size_t first, std::size_t window) {
    std::vector<double> out(values.size(), kUndefined);
    const std::size_t seed_at = first + window - 1;
    if (seed_at >= values.size()) return out;
    double sum = 0.0;
    for (std::size_t i = first; i <= seed_at; ++i) sum += values[i];
    const double w = static_cast<double>(window);
    out[seed_at] = sum / w;
    for (std::size_t t = seed_at + 1; t < values.size(); ++t) out[t] = (out[t - 1] * (w - 1.0) + values[t]) / w;
    return out;
}

} // namespace detail

inline double ema_alpha(std::size_t window) { return 2.0 / (static_cast<double>(window) + 1.0); }

inline IndicatorSeries sma(Series close, std::size_t window) {
    detail::require_window(window);
    detail::require_length(close.size(), window, "sma");
    IndicatorSeries out{std::vector<double>(close.size(), detail::kUndefined), window - 1};
    for (std::size_t t = window - 1; t < close.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = t + 1 - window; i <= t; ++i) sum += close[i];
        out.values[t] = sum / static_cast<double>(window);
    }
    return out;
}

inline IndicatorSeries ema(Series close, std::size_t window) {
    detail::require_window(window);
    detail::require_length(close.size(), window, "ema");
    return detail::ema_from(close, 0, window);
}

/// Wilder RSI. Flat stretches (no gains, no losses) read 50.
inline IndicatorSeries rsi(Series close, std::size_t window = 14) {
    detail::require_window(window);
    detail::require_length(close.size(), window + 1, "rsi");
    std::vector<double> gains(close.size(), 0.0), losses(close.size(), 0.0);
    for (std::size_t t = 1; t < close.size(); ++t) {
        const double d = close[t] - close[t - 1];
        gains[t] = d > 0 ? d : 0.0;
        losses[t] = d < 0 ? -d : 0.0;
    }
    const auto avg_gain = detail::wilder(gains, 1, window);
    const auto avg_loss = detail::wilder(losses, 1, window);
    IndicatorSeries out{std::vector<double>(close.size(), detail::kUndefined), window};
    for (std::size_t t = window; t < close.size(); ++t) {
        const double g = avg_gain[t], l = avg_loss[t];
        if (l == 0.0) out.values[t] = g > 0.0 ? 100.0 : 50.0;
        else if (g == 0.0) out.values[t] = 0.0;
        else out.values[t] = 100.0 - 100.0 / (1.0 + g / l);
    }
    return out;
}

struct Macd {
    IndicatorSeries line;
    IndicatorSeries signal;
};

inline Macd macd(Series close, std::size_t fast = 12, std::size_t slow = 26, std::size_t signal = 9) {
    detail::require_window(fast);
    detail::require_window(signal);
    if (fast >= slow) throw Error(ErrorCode::InvalidConfig, "macd fast period must be below slow period");
    detail::require_length(close.size(), slow + signal, "macd");
    const auto fast_ema = detail::ema_from(close, 0, fast);
    const auto slow_ema = detail::ema_from(close, 0, slow);
    Macd out;
    out.line = {std::vector<double>(close.size(), detail::kUndefined), slow - 1};
    for (std::size_t t = slow - 1; t < close.size(); ++t) out.line.values[t] = fast_ema[t] - slow_ema[t];
    out.signal = detail::ema_from(out.line.values, out.line.warm_up, signal);
    return out;
}

struct BollingerBands {
    IndicatorSeries upper;
    IndicatorSeries mid;
    IndicatorSeries lower;
};

/// SMA middle band with bands k population standard deviations away.
inline BollingerBands bbands(Series close, std::size_t window = 5, double k = 2.0) {
    BollingerBands out;
    out.mid = sma(close, window);
    out.upper = out.lower = {std::vector<double>(close.size(), detail::kUndefined), window - 1};
    for (std::size_t t = window - 1; t < close.size(); ++t) {
        const double mean = out.mid[t];
        double ss = 0.0;
        for (std::size_t i = t + 1 - window; i <= t; ++i) ss += (close[i] - mean) * (close[i] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(window));
        out.upper.values[t] = mean + k * sd;
        out.lower.values[t] = mean - k * sd;
    }
    return out;
}

inline double true_range(double high, double low, double prev_close) {
    return std::max({high - low, std::abs(high - prev_close), std::abs(low - prev_close)});
}

/// Normalized ATR in percent of close; ATR is Wilder-smoothed true range.
inline IndicatorSeries natr(Series high, Series low, Series close, std::size_t window = 14) {
    detail::require_window(window);
    detail::require_same_length({high.size(), low.size(), close.size()});
    detail::require_length(close.size(), window + 1, "natr");
    std::vector<double> tr(close.size(), 0.0);
    for (std::size_t t = 1; t < close.size(); ++t) tr[t] = true_range(high[t], low[t], close[t - 1]);
    const auto atr = detail::wilder(tr, 1, window);
    IndicatorSeries out{std::vector<double>(close.size(), detail::kUndefined), window};
    for (std::size_t t = window; t < close.size(); ++t) {
        if (close[t] == 0.0) throw Error(ErrorCode::ZeroClose, "close is zero at index " + std::to_string(t));
        out.values[t] = 100.0 * atr[t] / close[t];
    }
    return out;
}

inline IndicatorSeries obv(Series close, Series volume) {
    detail::require_same_length({close.size(), volume.size()});
    detail::require_length(close.size(), 2, "obv");
    IndicatorSeries out{std::vector<double>(close.size(), 0.0), 0};
    for (std::size_t t = 1; t < close.size(); ++t) {
        double step = 0.0;
        if (close[t] > close[t - 1]) step = volume[t];
        else if (close[t] < close[t - 1]) step = -volume[t];
        out.values[t] = out.values[t - 1] + step;
    }
    return out;
}

/// Accumulation/distribution line. A bar with high == low contributes nothing.
inline IndicatorSeries ad(Series high, Series low, Series close, Series volume) {
    detail::require_same_length({high.size(), low.size(), close.size(), volume.size()});
    detail::require_length(close.size(), 1, "ad");
    IndicatorSeries out{std::vector<double>(close.size(), 0.0), 0};
    double acc = 0.0;
    for (std::size_t t = 0; t < close.size(); ++t) {
        const double range = high[t] - low[t];
        const double clv = range == 0.0 ? 0.0 : ((close[t] - low[t]) - (high[t] - close[t])) / range;
        acc += clv * volume[t];
        out.values[t] = acc;
    }
    return out;
}

/// Raw %K over `window` bars; 50 when the window's range is zero.
inline IndicatorSeries stoch_raw_k(Series high, Series low, Series close, std::size_t window = 14) {
    detail::require_window(window);
    detail::require_same_length({high.size(), low.size(), close.size()});
    detail::require_length(close.size(), window, "stoch");
    IndicatorSeries out{std::vector<double>(close.size(), detail::kUndefined), window - 1};
    for (std::size_t t = window - 1; t < close.size(); ++t) {
        const auto first = t + 1 - window;
        const double hh = *std::max_element(high.begin() + static_cast<std::ptrdiff_t>(first), high.begin() + static_cast<std::ptrdiff_t>(t + 1));
        const double ll = *std::min_element(low.begin() + static_cast<std::ptrdiff_t>(first), low.begin() + static_cast<std::ptrdiff_t>(t + 1));
        out.values[t] = hh == ll ? 50.0 : 100.0 * (close[t] - ll) / (hh - ll);
    }
    return out;
}

/// Slow %K: `smooth`-bar SMA of raw %K.
inline IndicatorSeries stoch(Series high, Series low, Series close, std::size_t window = 14, std::size_t smooth = 3) {
    detail::require_window(smooth);
    const auto raw = stoch_raw_k(high, low, close, window);
    IndicatorSeries out{std::vector<double>(close.size(), detail::kUndefined), raw.warm_up + smooth - 1};
    for (std::size_t t = out.warm_up; t < close.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = t + 1 - smooth; i <= t; ++i) sum += raw[i];
        out.values[t] = sum / static_cast<double>(smooth);
    }
    out.warm_up = std::min(out.warm_up, close.size());
    return out;
}

struct NamedIndicator {
    std::string name;
    IndicatorSeries series;
};

/// The eleven indicator columns used as features, in a fixed order.
inline std::vector<NamedIndicator> compute_panel(Series open, Series high, Series low, Series close, Series volume,
                                                 const IndicatorConfig& cfg = {}) {
    cfg.validate();
    detail::require_same_length({open.size(), high.size(), low.size(), close.size(), volume.size()});
    auto bb = bbands(close, cfg.bband_window, cfg.bband_k);
    std::vector<NamedIndicator> panel;
    panel.push_back({"ad", ad(high, low, close, volume)});
    panel.push_back({"obv", obv(close, volume)});
    panel.push_back({"sma", sma(close, cfg.sma_window)});
    panel.push_back({"ema", ema(close, cfg.ema_window)});
    panel.push_back({"rsi", rsi(close, cfg.rsi_window)});
    panel.push_back({"macd", macd(close, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal).line});
    panel.push_back({"bband_upper", std::move(bb.upper)});
    panel.push_back({"bband_mid", std::move(bb.mid)});
    panel.push_back({"bband_lower", std::move(bb.lower)});
    panel.push_back({"natr", natr(high, low, close, cfg.natr_window)});
    panel.push_back({"stoch", stoch(high, low, close, cfg.stoch_window, cfg.stoch_smooth)});
    return panel;
}

/// OHLCV columns (`price.*`) plus indicator columns (`ti.*`), keeping only
/// rows on which every indicator is defined.
inline AlignedTable with_indicators(const TimeSeriesTable& ohlcv, const IndicatorConfig& cfg = {}) {
    auto base = as_aligned(ohlcv);
    auto panel = compute_panel(ohlcv.column("open").values, ohlcv.column("high").values, ohlcv.column("low").values,
                               ohlcv.column("close").values, ohlcv.column("volume").values, cfg);
    std::size_t warm_up = 0;
    for (auto& ind : panel) {
        warm_up = std::max(warm_up, ind.series.warm_up);
        base.columns.push_back({"ti." + ind.name, std::move(ind.series.values)});
    }
    if (warm_up >= base.rows())
        throw Error(ErrorCode::TooShort, "indicator warm-up consumes every row");
    std::vector<bool> keep(base.rows());
    for (std::size_t r = 0; r < keep.size(); ++r) keep[r] = r >= warm_up;
    base.retain_rows(keep);
    return base;
}

} // namespace cdbn::indicators
