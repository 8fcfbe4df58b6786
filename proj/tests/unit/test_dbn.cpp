#include "cdbn/dbn.hpp"

#include "../support/bn_oracles.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace cdbn;
using namespace cdbn::dbn;

namespace {

/// Single-variable model "x": prior P(Up) = prior_up, transition
/// P(Up | prev Down) = a, P(Up | prev Up) = b.
TwoSliceBn one_variable(double prior_up, double a, double b, bool persistence = true, std::size_t slices = 5) {
    TwoSliceBn m;
    m.variable_names = {"x"};
    m.target_name = "x";
    m.slices = slices;
    m.prior = bn::make_network(bn::DagStructure({"x"}), {{{1 - prior_up, prior_up}}});
    bn::DagStructure dag({"x[t-1]", "x[t]"});
    if (persistence) {
        dag.add_edge(0, 1);
        m.transition = bn::make_network(dag, {{{0.5, 0.5}}, {{1 - a, a}, {1 - b, b}}});
    } else {
        m.transition = bn::make_network(dag, {{{0.5, 0.5}}, {{1 - a, a}}});
    }
    return m;
}

DirectionMatrix window_of(const std::vector<std::string>& vars, const std::vector<std::vector<int>>& rows) {
    DirectionMatrix w;
    w.variables = vars;
    w.target_name = vars.front();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        w.dates.push_back(Date{std::chrono::days{static_cast<int>(r)}});
        for (int s : rows[r]) w.states.push_back(static_cast<std::uint8_t>(s));
    }
    return w;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::BadModel;
}

} // namespace

TEST(LaggedPairs, LayoutAndNames) {
    auto d = window_of({"a", "b"}, {{0, 1}, {1, 1}, {1, 0}});
    auto p = lagged_pairs(d);
    EXPECT_EQ(p.variables, (std::vector<std::string>{"a[t-1]", "b[t-1]", "a[t]", "b[t]"}));
    ASSERT_EQ(p.rows(), 2u);
    EXPECT_EQ(p.states, (std::vector<std::uint8_t>{0, 1, 1, 1, 1, 1, 1, 0}));
    EXPECT_EQ(p.target_name, "a[t]");
}

TEST(TransitionConstraints, OnlyPersistenceArcsCrossSlices) {
    auto c = transition_constraints(3);
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t v = 0; v < 6; ++v) {
            bool expect = u != v && v >= 3 && (u >= 3 || u + 3 == v);
            EXPECT_EQ(c.allowed(u, v), expect) << u << "->" << v;
        }
}

TEST(Learn2tbn, RecoversPersistenceArcs) {
    std::mt19937_64 rng(1);
    TwoSliceBn truth;
    truth.variable_names = {"a", "b", "c"};
    truth.target_name = "a";
    truth.prior = bn::make_network(bn::DagStructure(truth.variable_names), {{{0.5, 0.5}}, {{0.5, 0.5}}, {{0.5, 0.5}}});
    bn::DagStructure dag({"a[t-1]", "b[t-1]", "c[t-1]", "a[t]", "b[t]", "c[t]"});
    for (std::size_t i = 0; i < 3; ++i) dag.add_edge(i, 3 + i);
    std::vector<std::vector<std::array<double, 2>>> rows(3, {{0.5, 0.5}});
    for (int i = 0; i < 3; ++i) rows.push_back({{0.95, 0.05}, {0.05, 0.95}});
    truth.transition = bn::make_network(dag, rows);
    auto data = oracle::sample_sequence(truth, 1000, rng);

    auto learned = learn_2tbn(data);
    EXPECT_EQ(persistence_arcs(learned), (std::vector<std::size_t>{0, 1, 2}));
    for (std::size_t v = 0; v < 3; ++v) EXPECT_TRUE(learned.transition.dag.parents[v].empty());
    for (const auto& [u, v] : learned.transition.dag.edges()) EXPECT_TRUE(transition_constraints(3).allowed(u, v));
}

TEST(Learn2tbn, IidDataHasNoInterSliceArcs) {
    std::mt19937_64 rng(2);
    DirectionMatrix d;
    d.variables = {"a", "b", "c"};
    d.target_name = "a";
    for (int r = 0; r < 2000; ++r) {
        d.dates.push_back(Date{std::chrono::days{r}});
        for (int c = 0; c < 3; ++c) d.states.push_back(static_cast<std::uint8_t>(rng() & 1U));
    }
    auto m = learn_2tbn(d);
    EXPECT_TRUE(persistence_arcs(m).empty());
}

TEST(Learn2tbn, SingleVariableAndGuards) {
    std::mt19937_64 rng(3);
    auto truth = one_variable(0.5, 0.1, 0.9);
    auto data = oracle::sample_sequence(truth, 400, rng);
    auto m = learn_2tbn(data);
    EXPECT_TRUE(m.prior.dag.parents[0].empty());
    EXPECT_EQ(persistence_arcs(m), (std::vector<std::size_t>{0}));

    EXPECT_EQ(code_of([&] { learn_2tbn(data.slice_rows(0, 49)); }), ErrorCode::TooFewRows);
    LearnConfig cfg;
    cfg.slices = 0;
    EXPECT_EQ(code_of([&] { learn_2tbn(data, cfg); }), ErrorCode::InvalidConfig);
}

TEST(Learn2tbn, DeterministicForSeed) {
    std::mt19937_64 rng(4);
    auto data = oracle::sample_sequence(oracle::random_2tbn(4, rng), 500, rng);
    LearnConfig cfg;
    cfg.seed = 9;
    EXPECT_EQ(to_json(learn_2tbn(data, cfg)).dump(), to_json(learn_2tbn(data, cfg)).dump());
}

TEST(Unroll, SingleSliceIsThePrior) {
    std::mt19937_64 rng(5);
    auto m = oracle::random_2tbn(3, rng);
    auto u = unroll(m, 1);
    EXPECT_EQ(u.network.dag.parents, m.prior.dag.parents);
    EXPECT_EQ(u.network.cpts, m.prior.cpts);
    EXPECT_EQ(u.network.dag.nodes, (std::vector<std::string>{"0:v0", "0:v1", "0:v2"}));
}

TEST(Unroll, SizeAndTimeHomogeneity) {
    std::mt19937_64 rng(6);
    auto m = oracle::random_2tbn(4, rng);
    auto u = unroll(m, 5);
    ASSERT_EQ(u.network.dag.size(), 20u);
    EXPECT_TRUE(u.network.dag.is_acyclic());
    EXPECT_EQ(u.node(3, 2), 14u);
    for (std::size_t t = 2; t < 5; ++t)
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(u.network.cpts[t * 4 + i].probabilities, u.network.cpts[4 + i].probabilities);
            std::vector<std::size_t> shifted;
            for (auto p : u.network.dag.parents[4 + i]) shifted.push_back(p + (t - 1) * 4);
            EXPECT_EQ(u.network.dag.parents[t * 4 + i], shifted);
        }
}

TEST(Unroll, TwoSlicesMatchTheFactorization) {
    std::mt19937_64 rng(7);
    auto m = oracle::random_2tbn(3, rng);
    auto u = unroll(m, 2);
    std::vector<Direction> x(6);
    std::vector<std::uint8_t> raw(6);
    double total = 0;
    for (std::size_t a = 0; a < 64; ++a) {
        for (std::size_t k = 0; k < 6; ++k) {
            raw[k] = static_cast<std::uint8_t>((a >> k) & 1U);
            x[k] = static_cast<Direction>(raw[k]);
        }
        const double p = bn::joint_probability(u.network, x);
        EXPECT_NEAR(p, oracle::joint_2tbn(m, 2, raw), 1e-15);
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Posterior, MatchesEnumeration) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 3);
        auto m = oracle::random_2tbn(n, rng);
        auto u = unroll(m, 4);
        Evidence ev;
        ev.query = {rng() % 4, "v" + std::to_string(rng() % n)};
        const auto q = resolve(u, ev.query);
        std::vector<std::optional<std::uint8_t>> obs(4 * n);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                const auto node = u.node(t, i);
                if (node == q || rng() % 2 == 0) continue;
                obs[node] = static_cast<std::uint8_t>(rng() & 1U);
                ev.observed[{t, "v" + std::to_string(i)}] = static_cast<Direction>(*obs[node]);
            }
        auto p = posterior(u, ev);
        EXPECT_NEAR(p.up, oracle::enumerate_2tbn_up(m, 4, q, obs), 1e-9);
        EXPECT_NEAR(p.up + p.down, 1.0, 1e-12);
        EXPECT_GE(p.down, 0.0);
        EXPECT_GE(p.up, 0.0);
    }
}

TEST(Posterior, ErrorCodes) {
    auto u = unroll(one_variable(0.5, 0.2, 0.8), 5);
    Evidence ev;
    ev.query = {5, "x"};
    EXPECT_EQ(code_of([&] { posterior(u, ev); }), ErrorCode::SliceOutOfRange);
    ev.query = {4, "nope"};
    EXPECT_EQ(code_of([&] { posterior(u, ev); }), ErrorCode::UnknownVariable);
    ev.query = {4, "x"};
    ev.observed[{4, "x"}] = Direction::Up;
    EXPECT_EQ(code_of([&] { posterior(u, ev); }), ErrorCode::EvidenceOnQuery);
    ev.observed.clear();
    ev.observed[{7, "x"}] = Direction::Up;
    EXPECT_EQ(code_of([&] { posterior(u, ev); }), ErrorCode::SliceOutOfRange);
}

TEST(Posterior, MarkovPropertyGivenFullPreviousSlice) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3;
        auto m = oracle::random_2tbn(n, rng);
        auto u = unroll(m, 5);
        Evidence full, last_only;
        full.query = last_only.query = {4, "v0"};
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t i = 0; i < n; ++i) {
                if (t == 4 && i == 0) continue;
                const auto s = static_cast<Direction>(rng() & 1U);
                full.observed[{t, "v" + std::to_string(i)}] = s;
                if (t >= 3) last_only.observed[{t, "v" + std::to_string(i)}] = s;
            }
        EXPECT_NEAR(posterior(u, full).up, posterior(u, last_only).up, 1e-12);
    }
}

TEST(Posterior, NormalizedUnderRandomEvidence) {
    std::mt19937_64 rng(10);
    auto m = oracle::random_2tbn(4, rng);
    auto u = unroll(m, 5);
    for (int trial = 0; trial < 100; ++trial) {
        Evidence ev;
        ev.query = {rng() % 5, "v" + std::to_string(rng() % 4)};
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t i = 0; i < 4; ++i) {
                SliceVariable sv{t, "v" + std::to_string(i)};
                if (sv != ev.query && rng() % 3 == 0) ev.observed[sv] = static_cast<Direction>(rng() & 1U);
            }
        auto p = posterior(u, ev);
        EXPECT_NEAR(p.up + p.down, 1.0, 1e-12);
        EXPECT_GE(p.up, 0.0);
        EXPECT_LE(p.up, 1.0);
    }
}

TEST(Predict, ConstantTransitionProbability) {
    auto m = one_variable(0.9, 0.9, 0.9, false);
    auto w = window_of({"x"}, {{0}, {1}, {0}, {0}, {1}});
    auto p = predict_direction(m, w);
    EXPECT_EQ(p.direction, Direction::Up);
    EXPECT_NEAR(p.probability, 0.9, 1e-12);
    EXPECT_FALSE(p.tie);
}

TEST(Predict, CopiesPreviousState) {
    auto m = one_variable(0.5, 0.01, 0.99);
    auto p = predict_direction(m, window_of({"x"}, {{1}, {1}, {1}, {0}, {1}}));
    EXPECT_EQ(p.direction, Direction::Down);
    EXPECT_GT(p.posterior.down, 0.95);
}

TEST(Predict, TieResolvesToUp) {
    auto m = one_variable(0.5, 0.5, 0.5);
    auto p = predict_direction(m, window_of({"x"}, {{1}, {0}, {1}, {0}, {0}}));
    EXPECT_EQ(p.direction, Direction::Up);
    EXPECT_TRUE(p.tie);
    EXPECT_DOUBLE_EQ(p.probability, 0.5);
}

TEST(Predict, WindowEvidenceLayout) {
    std::mt19937_64 rng(11);
    auto m = oracle::random_2tbn(3, rng);
    auto u = unroll(m, 5);
    auto w = window_of({"v0", "v1", "v2"}, {{1, 0, 0}, {0, 1, 0}, {1, 1, 1}, {0, 0, 1}, {1, 0, 1}});
    auto ev = window_evidence(u, "v0", w);
    EXPECT_EQ(ev.observed.size(), 14u);
    EXPECT_EQ(ev.observed.count({4, "v0"}), 0u);
    EXPECT_EQ(ev.observed.at({4, "v2"}), Direction::Up);
    EXPECT_EQ(ev.query, (SliceVariable{4, "v0"}));
}

TEST(Predict, WindowGuards) {
    auto m = one_variable(0.5, 0.2, 0.8);
    EXPECT_EQ(code_of([&] { predict_direction(m, window_of({"x"}, {{1}, {0}, {1}, {0}})); }),
              ErrorCode::WindowLengthMismatch);
    auto w = window_of({"x"}, {{1}, {0}, {1}, {0}, {1}});
    std::swap(w.dates[1], w.dates[2]);
    EXPECT_EQ(code_of([&] { predict_direction(m, w); }), ErrorCode::WindowLengthMismatch);
    EXPECT_EQ(code_of([&] { predict_direction(m, window_of({"y"}, {{1}, {0}, {1}, {0}, {1}})); }),
              ErrorCode::VariableMissing);
}

TEST(ModelJson, RoundTripAndValidation) {
    std::mt19937_64 rng(12);
    auto data = oracle::sample_sequence(oracle::random_2tbn(3, rng), 300, rng);
    LearnConfig cfg;
    cfg.feature_group = 2;
    auto m = learn_2tbn(data, cfg);
    auto j = to_json(m);
    auto back = model_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back, m);
    EXPECT_EQ(to_json(back).dump(), j.dump());

    auto bad_target = j;
    bad_target["target"] = "zzz";
    EXPECT_EQ(code_of([&] { model_from_json(bad_target); }), ErrorCode::BadModel);
    auto cross = j;
    cross["transition"]["parents"]["v1[t]"] = {"v0[t-1]"};
    cross["transition"]["cpts"]["v1[t]"] = {{0.5, 0.5}, {0.5, 0.5}};
    EXPECT_EQ(code_of([&] { model_from_json(cross); }), ErrorCode::BadModel);
    auto missing = j;
    missing.erase("T");
    EXPECT_EQ(code_of([&] { model_from_json(missing); }), ErrorCode::BadModel);
}
