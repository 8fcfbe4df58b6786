// Learns a 2TBN from a small simulated direction table, then asks the
// unrolled network what tomorrow's close looks like under a five-day
// scenario in which every observed feature moves down.

#include "cdbn/cli.hpp"
#include "cdbn/dbn.hpp"

#include <iomanip>
#include <iostream>
#include <random>

using namespace cdbn;

int main() {
    std::mt19937_64 rng(7);
    std::bernoulli_distribution flip(0.2), noisy(0.1);

    DirectionMatrix data;
    data.variables = {"price.close", "price.open", "price.volume"};
    data.target_name = "price.close";
    Direction close = Direction::Up;
    for (int day = 0; day < 800; ++day) {
        if (flip(rng)) close = close == Direction::Up ? Direction::Down : Direction::Up;
        const Direction open = noisy(rng) ? Direction::Down : close;
        data.dates.push_back(Date{std::chrono::year{2019} / 1 / 1} + std::chrono::days{day});
        data.states.push_back(static_cast<std::uint8_t>(close));
        data.states.push_back(static_cast<std::uint8_t>(open));
        data.states.push_back(static_cast<std::uint8_t>(rng() & 1U));
    }

    const auto model = dbn::learn_2tbn(data);
    std::cout << cli::describe_model(model);

    std::vector<std::pair<dbn::SliceVariable, Direction>> scenario;
    for (std::size_t t = 0; t < model.slices; ++t)
        for (const auto& v : model.variable_names)
            if (!(t + 1 == model.slices && v == model.target_name)) scenario.push_back({{t, v}, Direction::Down});
    const auto p = cli::whatif(model, scenario);
    std::cout << std::fixed << std::setprecision(4) << "all-down scenario: P(close Down) = " << p.down
              << ", P(close Up) = " << p.up << "\n";
}
