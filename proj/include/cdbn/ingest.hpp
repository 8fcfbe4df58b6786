#pragma once

#include "cdbn/date.hpp"
#include "cdbn/direction.hpp"
#include "cdbn/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cdbn {

enum class SourceKind { Ohlcv, Macro, Tweets };

inline std::string_view to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::Ohlcv: return "ohlcv";
    case SourceKind::Macro: return "macro";
    case SourceKind::Tweets: return "tweets";
    }
    return "?";
}

/// Column-name prefix each source receives once aligned.
inline std::string_view source_prefix(SourceKind kind) {
    switch (kind) {
    case SourceKind::Ohlcv: return "price.";
    case SourceKind::Macro: return "macro.";
    case SourceKind::Tweets: return "social.";
    }
    return "";
}

struct Column {
    std::string name;
    std::vector<double> values;

    bool operator==(const Column&) const = default;
};

/// Date-indexed real-valued columns of equal length.
struct Table {
    std::vector<Date> dates;
    std::vector<Column> columns;

    std::size_t rows() const noexcept { return dates.size(); }

    const Column* find(std::string_view name) const {
        for (const auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }

    const Column& column(std::string_view name) const {
        if (const auto* c = find(name)) return *c;
        throw Error(ErrorCode::MissingColumn, "column '" + std::string(name) + "' not present");
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> out;
        for (const auto& c : columns) out.push_back(c.name);
        return out;
    }

    /// Keeps rows whose mask entry is true.
    void retain_rows(const std::vector<bool>& keep) {
        auto filter = [&](auto& vec) {
            std::size_t w = 0;
            for (std::size_t r = 0; r < vec.size(); ++r)
                if (keep[r]) vec[w++] = vec[r];
            vec.resize(w);
        };
        filter(dates);
        for (auto& c : columns) filter(c.values);
    }

    bool operator==(const Table&) const = default;
};

struct TimeSeriesTable : Table {
    SourceKind kind = SourceKind::Ohlcv;

    bool operator==(const TimeSeriesTable&) const = default;
};

/// Inner join of several sources; column names carry a source prefix.
struct AlignedTable : Table {
    /// Set when a macro source took part; weekends are then excluded.
    bool weekdays_only = false;

    bool operator==(const AlignedTable&) const = default;
};

/// Collects `WARN <file>:<line_no> <reason>` lines, echoing them to a sink
/// (stderr by default, nothing when the sink is null).
class Diagnostics {
public:
    explicit Diagnostics(std::ostream* sink = &std::cerr) : sink_(sink) {}

    void warn(const std::string& file, std::size_t line, const std::string& reason) {
        emit("WARN " + file + ":" + std::to_string(line) + " " + reason);
    }

    void warn(const std::string& message) { emit("WARN " + message); }

    const std::vector<std::string>& lines() const noexcept { return lines_; }
    std::size_t count() const noexcept { return lines_.size(); }

private:
    void emit(std::string line) {
        if (sink_) *sink_ << line << '\n';
        lines_.push_back(std::move(line));
    }

    std::ostream* sink_;
    std::vector<std::string> lines_;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

inline std::string lower(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool is_missing_token(const std::string& field) {
    auto l = lower(field);
    return l.empty() || l == "na" || l == "nan" || l == "null" || l == "n/a";
}

enum class CellStatus { Ok, Missing, Invalid };

inline CellStatus parse_number(const std::string& field, double& out) {
    if (is_missing_token(field)) return CellStatus::Missing;
    char* end = nullptr;
    out = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || !std::isfinite(out)) return CellStatus::Invalid;
    return CellStatus::Ok;
}

} // namespace detail

/// Longest run of consecutive missing cells that forward-fill will bridge.
inline constexpr std::size_t kMaxForwardFill = 3;

/// Reads a UTF-8 CSV with a header row and an ISO `date` column.
///
/// OHLCV files must provide open/high/low/close/volume (extra columns are
/// ignored); macro files contribute every non-date column; tweet files must
/// provide `tweet_count`, stored as `tweets`. Header matching is
/// case-insensitive. Rows with a bad date or unparseable numbers are dropped,
/// interior gaps of up to three cells are forward-filled, and OHLCV rows whose
/// high/low do not bracket open and close are rejected. Every dropped row
/// leaves one diagnostic line.
inline TimeSeriesTable load_csv(const std::string& path, SourceKind kind, Diagnostics& diag) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyTable, "'" + path + "' has no header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::lower(h);

    auto find_col = [&](std::string_view name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    auto require_col = [&](std::string_view name) {
        auto idx = find_col(name);
        if (!idx)
            throw Error(ErrorCode::MissingColumn,
                        "'" + path + "' lacks required column '" + std::string(name) + "'");
        return *idx;
    };

    const std::size_t date_col = require_col("date");
    std::vector<std::pair<std::string, std::size_t>> wanted; // stored name, csv index
    switch (kind) {
    case SourceKind::Ohlcv:
        for (const char* n : {"open", "high", "low", "close", "volume"}) wanted.emplace_back(n, require_col(n));
        break;
    case SourceKind::Tweets:
        wanted.emplace_back("tweets", require_col("tweet_count"));
        break;
    case SourceKind::Macro:
        for (std::size_t i = 0; i < header.size(); ++i)
            if (i != date_col) wanted.emplace_back(header[i], i);
        if (wanted.empty())
            throw Error(ErrorCode::MissingColumn, "'" + path + "' has no asset column");
        break;
    }

    struct RawRow {
        Date date;
        std::size_t line_no;
        std::vector<std::optional<double>> cells;
    };
    std::vector<RawRow> raw;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            diag.warn(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
            continue;
        }
        auto date = parse_iso_date(fields[date_col]);
        if (!date) {
            diag.warn(path, line_no, "unparseable date '" + fields[date_col] + "'");
            continue;
        }
        RawRow row{*date, line_no, {}};
        bool bad = false;
        for (const auto& [name, idx] : wanted) {
            double v = 0.0;
            switch (detail::parse_number(fields[idx], v)) {
            case detail::CellStatus::Ok: row.cells.emplace_back(v); break;
            case detail::CellStatus::Missing: row.cells.emplace_back(std::nullopt); break;
            case detail::CellStatus::Invalid:
                diag.warn(path, line_no, "unparseable value '" + fields[idx] + "' in column " + name);
                bad = true;
                break;
            }
            if (bad) break;
        }
        if (!bad) raw.push_back(std::move(row));
    }

    std::stable_sort(raw.begin(), raw.end(), [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < raw.size(); ++i)
        if (raw[i].date == raw[i - 1].date)
            throw Error(ErrorCode::DuplicateDate, "'" + path + "' repeats date " + format_iso_date(raw[i].date) +
                                                      " (line " + std::to_string(raw[i].line_no) + ")");

    // Forward-fill short interior gaps column by column; anything left
    // missing afterwards condemns its row.
    std::vector<bool> keep(raw.size(), true);
    for (std::size_t c = 0; c < wanted.size(); ++c) {
        std::size_t r = 0;
        while (r < raw.size()) {
            if (raw[r].cells[c]) {
                ++r;
                continue;
            }
            std::size_t end = r;
            while (end < raw.size() && !raw[end].cells[c]) ++end;
            const bool fillable = r > 0 && end < raw.size() && end - r <= kMaxForwardFill;
            for (std::size_t k = r; k < end; ++k) {
                if (fillable) {
                    raw[k].cells[c] = raw[r - 1].cells[c];
                } else if (keep[k]) {
                    keep[k] = false;
                    diag.warn(path, raw[k].line_no, "missing value in column " + wanted[c].first +
                                                        " not bridged by forward-fill");
                }
            }
            r = end;
        }
    }

    TimeSeriesTable table;
    table.kind = kind;
    for (const auto& w : wanted) table.columns.push_back({w.first, {}});
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (!keep[r]) continue;
        const auto& cells = raw[r].cells;
        if (kind == SourceKind::Ohlcv) {
            const double open = *cells[0], high = *cells[1], low = *cells[2], close = *cells[3];
            if (low > std::min(open, close) || high < std::max(open, close)) {
                diag.warn(path, raw[r].line_no, "high/low do not bracket open/close");
                continue;
            }
        }
        table.dates.push_back(raw[r].date);
        for (std::size_t c = 0; c < cells.size(); ++c) table.columns[c].values.push_back(*cells[c]);
    }
    if (table.rows() == 0) throw Error(ErrorCode::EmptyTable, "'" + path + "' has no valid rows");
    return table;
}

/// Prefixes a source table's columns (`price.close`, `macro.gold`, ...).
inline AlignedTable as_aligned(const TimeSeriesTable& table) {
    AlignedTable out;
    out.dates = table.dates;
    out.weekdays_only = table.kind == SourceKind::Macro;
    for (const auto& c : table.columns) out.columns.push_back({std::string(source_prefix(table.kind)) + c.name, c.values});
    if (out.weekdays_only) {
        std::vector<bool> keep(out.rows());
        for (std::size_t r = 0; r < out.rows(); ++r) keep[r] = !is_weekend(out.dates[r]);
        out.retain_rows(keep);
    }
    return out;
}

/// Inner join on dates. Column order follows the input order.
inline AlignedTable align(const std::vector<AlignedTable>& tables) {
    if (tables.empty()) throw Error(ErrorCode::EmptyTable, "align needs at least one table");
    for (const auto& t : tables)
        if (t.rows() == 0) throw Error(ErrorCode::EmptyTable, "align received an empty table");

    bool weekdays_only = false;
    std::set<std::string> names;
    for (const auto& t : tables) {
        weekdays_only = weekdays_only || t.weekdays_only;
        for (const auto& c : t.columns)
            if (!names.insert(c.name).second)
                throw Error(ErrorCode::InvalidConfig, "column '" + c.name + "' appears in two sources");
    }

    std::vector<Date> common = tables.front().dates;
    for (std::size_t i = 1; i < tables.size(); ++i) {
        std::vector<Date> next;
        std::set_intersection(common.begin(), common.end(), tables[i].dates.begin(), tables[i].dates.end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (weekdays_only) std::erase_if(common, is_weekend);
    if (common.empty()) throw Error(ErrorCode::EmptyIntersection, "sources share no dates");

    AlignedTable out;
    out.dates = common;
    out.weekdays_only = weekdays_only;
    for (const auto& t : tables) {
        std::vector<std::size_t> rows;
        rows.reserve(common.size());
        std::size_t j = 0;
        for (auto d : common) {
            while (t.dates[j] < d) ++j;
            rows.push_back(j);
        }
        for (const auto& c : t.columns) {
            Column col{c.name, {}};
            col.values.reserve(rows.size());
            for (auto r : rows) col.values.push_back(c.values[r]);
            out.columns.push_back(std::move(col));
        }
    }
    return out;
}

inline AlignedTable align(const std::vector<TimeSeriesTable>& tables) {
    std::vector<AlignedTable> prefixed;
    prefixed.reserve(tables.size());
    for (const auto& t : tables) prefixed.push_back(as_aligned(t));
    return align(prefixed);
}

struct NormalizedTable {
    AlignedTable table;
    /// Per column (min, max) taken from the training rows.
    std::vector<std::pair<double, double>> ranges;
    std::vector<std::string> constant_columns;
};

/// Min-max scaling with statistics from the first `train_rows` rows only;
/// later rows reuse them and may leave [0, 1]. Columns that are constant
/// over the training rows become 0.5 everywhere and are reported.
inline NormalizedTable min_max_normalize(const AlignedTable& table, std::size_t train_rows,
                                         Diagnostics* diag = nullptr) {
    if (train_rows == 0 || train_rows > table.rows()) train_rows = table.rows();
    NormalizedTable out;
    out.table = table;
    for (auto& col : out.table.columns) {
        auto [lo, hi] = std::minmax_element(col.values.begin(), col.values.begin() + static_cast<std::ptrdiff_t>(train_rows));
        const double mn = *lo, mx = *hi;
        out.ranges.emplace_back(mn, mx);
        if (!(mx > mn)) {
            std::fill(col.values.begin(), col.values.end(), 0.5);
            out.constant_columns.push_back(col.name);
            if (diag) diag->warn("normalize: column " + col.name + " is constant, mapped to 0.5");
            continue;
        }
        const double span = mx - mn;
        for (auto& v : col.values) v = (v - mn) / span;
    }
    return out;
}

inline NormalizedTable min_max_normalize(const AlignedTable& table) { return min_max_normalize(table, table.rows()); }

/// Day-over-day direction of every column: Down when today's value is lower
/// than yesterday's, Up otherwise (ties included). The first row is consumed.
inline DirectionMatrix label_directions(const AlignedTable& table, const std::string& target_name = "price.close") {
    if (table.rows() < 2) throw Error(ErrorCode::TooFewRows, "labeling needs at least 2 rows");
    if (!table.find(target_name))
        throw Error(ErrorCode::MissingColumn, "target column '" + target_name + "' not present");

    DirectionMatrix m;
    m.dates.assign(table.dates.begin() + 1, table.dates.end());
    m.variables = table.column_names();
    m.target_name = target_name;
    const std::size_t cols = table.columns.size();
    m.states.resize(m.rows() * cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const auto& v = table.columns[c].values;
        for (std::size_t r = 1; r < v.size(); ++r)
            m.states[(r - 1) * cols + c] = static_cast<std::uint8_t>(v[r] < v[r - 1] ? Direction::Down : Direction::Up);
    }
    return m;
}

} // namespace cdbn
