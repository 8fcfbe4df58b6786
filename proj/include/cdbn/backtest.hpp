#pragma once

#include "cdbn/baselines.hpp"
#include "cdbn/dbn.hpp"
#include "cdbn/direction.hpp"
#include "cdbn/error.hpp"
#include "cdbn/indicators.hpp"
#include "cdbn/ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cdbn {

// ---------------------------------------------------------------------------
// Feature groups

struct FeatureGroup {
    int id = 1;
    bool include_external = false;
    bool include_indicators = false;
    /// Size of the group as commonly tabulated; BBands counts once there.
    std::size_t nominal_feature_count = 5;
};

inline FeatureGroup feature_group(int id) {
    switch (id) {
    case 1: return {1, false, false, 5};
    case 2: return {2, true, false, 11};
    case 3: return {3, false, true, 15};
    case 4: return {4, true, true, 23};
    }
    throw Error(ErrorCode::InvalidConfig, "feature group must be 1..4, got " + std::to_string(id));
}

inline bool has_prefix(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

/// Columns of `data` that belong to the group, in data order.
inline std::vector<std::string> group_variables(const DirectionMatrix& data, const FeatureGroup& g) {
    std::vector<std::string> out;
    for (const auto& v : data.variables) {
        const bool price = has_prefix(v, "price.");
        const bool external = has_prefix(v, "macro.") || has_prefix(v, "social.");
        const bool indicator = has_prefix(v, "ti.");
        if (price || (external && g.include_external) || (indicator && g.include_indicators)) out.push_back(v);
    }
    if (std::find(out.begin(), out.end(), data.target_name) == out.end())
        throw Error(ErrorCode::VariableMissing, "target '" + data.target_name + "' not in feature group " + std::to_string(g.id));
    return out;
}

// ---------------------------------------------------------------------------
// Protocol pieces

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }

    /// Up is the positive class.
    void add(Direction predicted, Direction actual) {
        if (predicted == Direction::Up) (actual == Direction::Up ? tp : fp)++;
        else (actual == Direction::Down ? tn : fn)++;
    }

    bool operator==(const ConfusionCounts&) const = default;
};

/// 100 * tp / (tp + fp).
inline double precision(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) throw Error(ErrorCode::NoPositivePredictions, "no Up predictions; precision is undefined");
    return 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline std::optional<double> precision_or_na(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return std::nullopt;
    return precision(c);
}

inline std::size_t split_point(std::size_t rows, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "train fraction must lie in (0, 1)");
    // The small offset keeps products like 0.67 * 100 from flooring to 66.
    return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows) + 1e-9));
}

struct Split {
    DirectionMatrix train;
    DirectionMatrix test;
};

inline Split split(const DirectionMatrix& data, double train_fraction = 0.67) {
    if (data.rows() < 10)
        throw Error(ErrorCode::TooFewRows, "split needs at least 10 rows, got " + std::to_string(data.rows()));
    const auto cut = split_point(data.rows(), train_fraction);
    if (cut == 0 || cut == data.rows()) throw Error(ErrorCode::InvalidConfig, "train fraction leaves an empty segment");
    return {data.slice_rows(0, cut), data.slice_rows(cut, data.rows())};
}

inline std::size_t window_count(std::size_t test_rows, std::size_t slices) {
    if (slices == 0 || test_rows < slices)
        throw Error(ErrorCode::TooShort, "test segment has " + std::to_string(test_rows) + " rows, windows need " +
                                             std::to_string(slices));
    return test_rows - slices + 1;
}

struct Window {
    /// First test row covered.
    std::size_t start = 0;
    DirectionMatrix rows;
    Direction actual = Direction::Up;
};

/// Overlapping stride-1 windows; `actual` is the target on the last row.
inline std::vector<Window> windows(const DirectionMatrix& test, std::size_t slices = 5) {
    const auto count = window_count(test.rows(), slices);
    const auto target = test.require_index(test.target_name);
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) out.push_back({w, test.slice_rows(w, w + slices), test.at(w + slices - 1, target)});
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct CoinConfig {
    std::string name;
    std::string ohlcv_path;
    std::vector<std::string> macro_paths;
    std::optional<std::string> tweets_path;
};

struct BacktestConfig {
    std::vector<int> groups{1, 2, 3, 4};
    std::size_t slices = 5;
    double train_fraction = 0.67;
    std::uint64_t seed = 0;
    std::size_t max_parents = 3;
    std::size_t restarts = 8;
    double alpha = 1.0;
    indicators::IndicatorConfig indicator_config;
    baselines::BaselineConfig baseline_config;
    bool run_baselines = true;

    void validate() const {
        if (slices < 2) throw Error(ErrorCode::InvalidConfig, "T must be >= 2");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw Error(ErrorCode::InvalidConfig, "train fraction must lie in (0, 1)");
        if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "smoothing alpha must be > 0");
        if (groups.empty()) throw Error(ErrorCode::InvalidConfig, "no feature groups selected");
        for (int g : groups) feature_group(g);
        indicator_config.validate();
    }

    dbn::LearnConfig learn_config(int group) const {
        dbn::LearnConfig c;
        c.max_parents = max_parents;
        c.restarts = restarts;
        c.seed = seed;
        c.alpha = alpha;
        c.slices = slices;
        c.feature_group = group;
        return c;
    }
};

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedCoin {
    /// Aligned raw values; row r + 1 is the day labeled by matrix row r.
    AlignedTable raw;
    DirectionMatrix directions;
    /// Matrix rows in the training segment.
    std::size_t train_rows = 0;
    std::vector<std::string> constant_columns;
    bool has_tweets = false;
    std::vector<std::string> notes;
};

inline void require_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, "file not found: " + path);
}

/// Loads, aligns, normalizes (training statistics only) and labels one coin.
inline PreparedCoin prepare_coin(const CoinConfig& coin, const BacktestConfig& cfg, Diagnostics& diag) {
    require_file(coin.ohlcv_path);
    for (const auto& p : coin.macro_paths) require_file(p);
    if (coin.tweets_path) require_file(*coin.tweets_path);

    std::vector<AlignedTable> parts;
    parts.push_back(indicators::with_indicators(load_csv(coin.ohlcv_path, SourceKind::Ohlcv, diag), cfg.indicator_config));
    for (const auto& p : coin.macro_paths) parts.push_back(as_aligned(load_csv(p, SourceKind::Macro, diag)));
    PreparedCoin out;
    if (coin.tweets_path) {
        parts.push_back(as_aligned(load_csv(*coin.tweets_path, SourceKind::Tweets, diag)));
        out.has_tweets = true;
    }
    out.raw = parts.size() == 1 ? parts.front() : align(parts);
    if (out.raw.rows() < 11)
        throw Error(ErrorCode::TooFewRows, "only " + std::to_string(out.raw.rows()) + " aligned rows for " + coin.name);

    out.train_rows = split_point(out.raw.rows() - 1, cfg.train_fraction);
    auto norm = min_max_normalize(out.raw, out.train_rows + 1, &diag);
    out.constant_columns = norm.constant_columns;
    out.directions = label_directions(norm.table);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct GroupResult {
    int id = 1;
    std::size_t nominal_feature_count = 0;
    std::vector<std::string> variables;
    ConfusionCounts counts;
    std::optional<double> precision;
    std::size_t windows = 0;
    std::string model_path;
    dbn::TwoSliceBn model;
    std::vector<Date> window_dates;
    std::vector<std::string> notes;
};

/// Learns on the training rows of `data` (already restricted to the group's
/// columns) and scores every test window.
inline GroupResult evaluate_group(const DirectionMatrix& data, const FeatureGroup& group, const BacktestConfig& cfg) {
    auto [train, test] = split(data, cfg.train_fraction);
    GroupResult out;
    out.id = group.id;
    out.nominal_feature_count = group.nominal_feature_count;
    out.variables = data.variables;
    out.model = dbn::learn_2tbn(train, cfg.learn_config(group.id));
    const auto net = dbn::unroll(out.model, cfg.slices);
    for (const auto& w : windows(test, cfg.slices)) {
        out.counts.add(dbn::predict_direction(net, data.target_name, w.rows).direction, w.actual);
        out.window_dates.push_back(w.rows.dates.back());
    }
    out.windows = out.counts.total();
    out.precision = precision_or_na(out.counts);
    out.model_path = "model_g" + std::to_string(group.id) + ".json";
    return out;
}

struct BaselineResult {
    std::string params;
    ConfusionCounts counts;
    std::optional<double> precision;
};

struct BacktestReport {
    std::string coin;
    std::size_t rows = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::vector<GroupResult> groups;
    std::optional<BaselineResult> arima;
    std::optional<BaselineResult> svr;
    std::optional<int> best_performing;
    std::vector<std::string> notes;
};

/// Highest precision; ties go to the smaller group id. Empty if every group
/// is N/A.
inline std::optional<int> best_group(const std::vector<GroupResult>& groups) {
    std::optional<int> best;
    double top = -1.0;
    for (const auto& g : groups)
        if (g.precision && (*g.precision > top || (*g.precision == top && g.id < *best))) {
            top = *g.precision;
            best = g.id;
        }
    return best;
}

namespace detail {

inline BaselineResult tally(const baselines::BaselineForecasts& f, std::span<const Direction> actual) {
    BaselineResult r;
    r.params = f.description;
    for (std::size_t i = 0; i < actual.size(); ++i) r.counts.add(f.directions[i], actual[i]);
    r.precision = precision_or_na(r.counts);
    return r;
}

} // namespace detail

/// Runs every selected group plus both baselines on one coin.
inline BacktestReport run_backtest(const CoinConfig& coin, const BacktestConfig& cfg, Diagnostics& diag) {
    cfg.validate();
    PreparedCoin data;
    try {
        data = prepare_coin(coin, cfg, diag);
    } catch (const Error& e) {
        rethrow_with_context(e, "coin " + coin.name);
    }

    BacktestReport report;
    report.coin = coin.name;
    report.rows = data.directions.rows();
    report.train_rows = data.train_rows;
    report.test_rows = report.rows - report.train_rows;
    for (const auto& c : data.constant_columns) report.notes.push_back("column " + c + " is constant over training rows");

    auto groups = cfg.groups;
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    for (int id : groups) {
        const auto def = feature_group(id);
        try {
            auto result = evaluate_group(data.directions.select(group_variables(data.directions, def)), def, cfg);
            if (def.include_external && !data.has_tweets) {
                result.notes.push_back("social.tweets excluded: no tweet data for " + coin.name);
                diag.warn("group " + std::to_string(id) + ": social.tweets excluded, no tweet data for " + coin.name);
            }
            report.groups.push_back(std::move(result));
        } catch (const Error& e) {
            rethrow_with_context(e, "coin " + coin.name + ", group " + std::to_string(id));
        }
    }
    report.best_performing = best_group(report.groups);

    if (cfg.run_baselines && !report.groups.empty()) {
        const auto& close = data.raw.column("price.close").values;
        const auto target = data.directions.require_index(data.directions.target_name);
        // Matrix row r labels raw row r + 1; baselines forecast the last day
        // of each DBN window.
        std::vector<std::size_t> idx;
        std::vector<Direction> actual;
        for (std::size_t r = data.train_rows + cfg.slices - 1; r < report.rows; ++r) {
            idx.push_back(r + 1);
            actual.push_back(data.directions.at(r, target));
        }
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (data.raw.dates[idx[i]] != report.groups.front().window_dates[i])
                throw Error(ErrorCode::DimensionMismatch, "baseline and DBN test days differ");
        const auto& bc = cfg.baseline_config;
        try {
            report.arima = detail::tally(baselines::arima_baseline(close, data.train_rows, idx, bc.arima_grid), actual);
        } catch (const Error& e) {
            rethrow_with_context(e, "coin " + coin.name + ", ARIMA");
        }
        try {
            report.svr = detail::tally(baselines::svr_baseline(close, data.train_rows, idx, bc.svr_grid, bc.svr_lags), actual);
        } catch (const Error& e) {
            rethrow_with_context(e, "coin " + coin.name + ", SVR");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline nlohmann::json precision_json(const std::optional<double>& p) { return p ? nlohmann::json(*p) : nlohmann::json(); }

inline std::string precision_text(const std::optional<double>& p) {
    if (!p) return "N/A";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *p);
    return buf;
}

} // namespace detail

inline nlohmann::json to_json(const BacktestReport& r) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.groups) {
        nlohmann::json j{{"id", g.id},
                         {"features", g.variables.size()},
                         {"nominal_features", g.nominal_feature_count},
                         {"variables", g.variables},
                         {"precision", detail::precision_json(g.precision)},
                         {"tp", g.counts.tp},
                         {"fp", g.counts.fp},
                         {"tn", g.counts.tn},
                         {"fn", g.counts.fn},
                         {"windows", g.windows},
                         {"model_path", g.model_path}};
        if (!g.notes.empty()) j["notes"] = g.notes;
        groups.push_back(std::move(j));
    }
    auto baseline = [](const std::optional<BaselineResult>& b, const char* key) {
        if (!b) return nlohmann::json();
        return nlohmann::json{{key, b->params},
                              {"precision", detail::precision_json(b->precision)},
                              {"tp", b->counts.tp},
                              {"fp", b->counts.fp},
                              {"tn", b->counts.tn},
                              {"fn", b->counts.fn}};
    };
    nlohmann::json out{{"coin", r.coin},
                       {"rows", r.rows},
                       {"train_rows", r.train_rows},
                       {"test_rows", r.test_rows},
                       {"groups", std::move(groups)},
                       {"baselines", {{"arima", baseline(r.arima, "order")}, {"svr", baseline(r.svr, "params")}}},
                       {"best_performing", r.best_performing ? nlohmann::json(*r.best_performing) : nlohmann::json()}};
    if (!r.notes.empty()) out["notes"] = r.notes;
    return out;
}

/// One row per coin in the column order DBN(1)..DBN(4), best, ARIMA, SVR.
inline std::string render_text(const std::vector<BacktestReport>& reports) {
    const std::vector<std::string> header{"Coin", "DBN(1)", "DBN(2)", "DBN(3)", "DBN(4)", "Best", "ARIMA", "SVR"};
    std::vector<std::vector<std::string>> rows{header};
    for (const auto& r : reports) {
        std::vector<std::string> row{r.coin};
        for (int id = 1; id <= 4; ++id) {
            auto it = std::find_if(r.groups.begin(), r.groups.end(), [&](const GroupResult& g) { return g.id == id; });
            row.push_back(it == r.groups.end() ? "-" : detail::precision_text(it->precision));
        }
        row.push_back(r.best_performing ? "DBN(" + std::to_string(*r.best_performing) + ")" : "N/A");
        row.push_back(r.arima ? detail::precision_text(r.arima->precision) : "-");
        row.push_back(r.svr ? detail::precision_text(r.svr->precision) : "-");
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            const auto pad = std::string(width[c] - row[c].size(), ' ');
            out += c == 0 ? row[c] + pad : "  " + pad + row[c];
        }
        out += '\n';
    }
    for (const auto& r : reports) {
        for (const auto& g : r.groups)
            for (const auto& n : g.notes) out += r.coin + " DBN(" + std::to_string(g.id) + "): " + n + '\n';
        for (const auto& n : r.notes) out += r.coin + ": " + n + '\n';
        if (r.arima) out += r.coin + " ARIMA order " + r.arima->params + '\n';
        if (r.svr) out += r.coin + " SVR " + r.svr->params + '\n';
    }
    return out;
}

inline std::string render_text(const BacktestReport& r) { return render_text(std::vector<BacktestReport>{r}); }

} // namespace cdbn
