#pragma once

// Synthetic market data for tests: coins with a known direction process,
// macro series and tweet counts, written as CSV.

#include "cdbn/date.hpp"
#include "cdbn/direction.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

namespace cdbn::testing {

struct OhlcvRow {
    Date date;
    double open, high, low, close, volume;
};

inline Date day(int offset) { return Date{std::chrono::year{2018} / 1 / 1} + std::chrono::days{offset}; }

/// Close direction follows a Markov chain that keeps yesterday's direction
/// with probability `persistence`. Open is yesterday's close; high/low add
/// independent excursions of up to `wick` (relative) so they carry little
/// same-day information about the close.
inline std::vector<OhlcvRow> persistent_coin(std::size_t rows, double persistence, std::uint64_t seed, double wick = 0.05) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<OhlcvRow> out;
    double close = 100.0;
    bool up = true;
    for (std::size_t i = 0; i < rows; ++i) {
        const double open = close;
        if (i > 0) {
            if (u(rng) >= persistence) up = !up;
            const double move = 0.005 + 0.025 * u(rng);
            close = open * (up ? 1.0 + move : 1.0 - move);
        }
        const double high = std::max(open, close) * (1.0 + wick * u(rng));
        const double low = std::min(open, close) * (1.0 - wick * u(rng));
        out.push_back({day(static_cast<int>(i)), open, high, low, close, 1e6 * (1.0 + u(rng))});
    }
    return out;
}

/// Geometric random walk with fair-coin directions.
inline std::vector<OhlcvRow> coin_flip_coin(std::size_t rows, std::uint64_t seed) { return persistent_coin(rows, 0.5, seed); }

inline void write_ohlcv(const std::string& path, const std::vector<OhlcvRow>& rows) {
    std::ofstream out(path);
    out << "date,open,high,low,close,volume\n" << std::setprecision(17);
    for (const auto& r : rows)
        out << format_iso_date(r.date) << ',' << r.open << ',' << r.high << ',' << r.low << ',' << r.close << ',' << r.volume
            << '\n';
}

/// Random-walk columns named `names`, one row per calendar day.
inline void write_macro(const std::string& path, const std::vector<std::string>& names, std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 1.0);
    std::vector<double> level(names.size(), 100.0);
    std::ofstream out(path);
    out << "date";
    for (const auto& n : names) out << ',' << n;
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < rows; ++i) {
        out << format_iso_date(day(static_cast<int>(i)));
        for (auto& v : level) out << ',' << (v += step(rng));
        out << '\n';
    }
}

inline void write_tweets(const std::string& path, std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::poisson_distribution<int> count(500);
    std::ofstream out(path);
    out << "date,tweet_count\n";
    for (std::size_t i = 0; i < rows; ++i) out << format_iso_date(day(static_cast<int>(i))) << ',' << count(rng) << '\n';
}

/// Independent fair-coin states for every cell.
inline DirectionMatrix iid_directions(std::size_t rows, const std::vector<std::string>& vars, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DirectionMatrix m;
    m.variables = vars;
    m.target_name = vars.front();
    for (std::size_t r = 0; r < rows; ++r) {
        m.dates.push_back(day(static_cast<int>(r)));
        for (std::size_t c = 0; c < vars.size(); ++c) m.states.push_back(static_cast<std::uint8_t>(rng() & 1U));
    }
    return m;
}

} // namespace cdbn::testing
