#pragma once

#include "cdbn/date.hpp"
#include "cdbn/error.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdbn {

/// The two market states every variable takes. The numeric value doubles as
/// the state index inside CPTs and factors.
enum class Direction : std::uint8_t { Down = 0, Up = 1 };

inline constexpr std::size_t kStateCount = 2;

inline std::string_view to_string(Direction d) { return d == Direction::Up ? "Up" : "Down"; }

inline std::optional<Direction> parse_direction(std::string_view text) {
    if (text == "Up" || text == "up" || text == "UP") return Direction::Up;
    if (text == "Down" || text == "down" || text == "DOWN") return Direction::Down;
    return std::nullopt;
}

/// Fully discretized feature matrix aligned to trading days (row-major).
struct DirectionMatrix {
    std::vector<Date> dates;
    std::vector<std::string> variables;
    std::vector<std::uint8_t> states;
    std::string target_name;

    std::size_t rows() const noexcept { return dates.size(); }
    std::size_t cols() const noexcept { return variables.size(); }

    std::uint8_t state(std::size_t row, std::size_t var) const { return states[row * cols() + var]; }
    Direction at(std::size_t row, std::size_t var) const { return static_cast<Direction>(state(row, var)); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = std::find(variables.begin(), variables.end(), name);
        if (it == variables.end()) return std::nullopt;
        return static_cast<std::size_t>(it - variables.begin());
    }

    std::size_t require_index(std::string_view name) const {
        auto idx = index_of(name);
        if (!idx) throw Error(ErrorCode::VariableMissing, "variable '" + std::string(name) + "' not in data");
        return *idx;
    }

    /// Rows [begin, end).
    DirectionMatrix slice_rows(std::size_t begin, std::size_t end) const {
        DirectionMatrix out;
        out.variables = variables;
        out.target_name = target_name;
        out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(begin),
                         dates.begin() + static_cast<std::ptrdiff_t>(end));
        out.states.assign(states.begin() + static_cast<std::ptrdiff_t>(begin * cols()),
                          states.begin() + static_cast<std::ptrdiff_t>(end * cols()));
        return out;
    }

    /// Column subset in the given order.
    DirectionMatrix select(const std::vector<std::string>& names) const {
        std::vector<std::size_t> idx;
        idx.reserve(names.size());
        for (const auto& n : names) idx.push_back(require_index(n));
        DirectionMatrix out;
        out.dates = dates;
        out.variables = names;
        out.target_name = target_name;
        out.states.reserve(rows() * names.size());
        for (std::size_t r = 0; r < rows(); ++r)
            for (auto c : idx) out.states.push_back(state(r, c));
        return out;
    }

    bool operator==(const DirectionMatrix&) const = default;
};

} // namespace cdbn
