#pragma once

#include "cdbn/bn.hpp"
#include "cdbn/direction.hpp"
#include "cdbn/error.hpp"
#include "cdbn/inference.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/// Two-slice temporal Bayesian networks: learning, unrolling, inference.
namespace cdbn::dbn {

inline std::string previous_slice_name(const std::string& var) { return var + "[t-1]"; }
inline std::string current_slice_name(const std::string& var) { return var + "[t]"; }

/// The pair (prior network, transition network). The transition network has
/// 2N nodes: indices [0, N) are the previous slice, [N, 2N) the current one.
/// A current-slice node may have current-slice parents plus its own
/// previous-slice copy; previous-slice nodes have no parents.
struct TwoSliceBn {
    bn::ScoredNetwork prior;
    bn::ScoredNetwork transition;
    std::vector<std::string> variable_names;
    std::string target_name;
    int feature_group = 1;
    std::size_t slices = 5;

    std::size_t per_slice() const noexcept { return variable_names.size(); }

    bool operator==(const TwoSliceBn&) const = default;
};

struct LearnConfig {
    std::size_t max_parents = 3;
    std::size_t restarts = 8;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    std::size_t slices = 5;
    int feature_group = 1;
    /// Training rows required: max(min_rows, rows_per_variable * N).
    std::size_t min_rows = 50;
    std::size_t rows_per_variable = 10;
};

/// Rows (t-1 ‖ t) for t = 1..n-1, with previous/current slice names.
inline DirectionMatrix lagged_pairs(const DirectionMatrix& data) {
    DirectionMatrix out;
    const std::size_t n = data.cols();
    for (const auto& v : data.variables) out.variables.push_back(previous_slice_name(v));
    for (const auto& v : data.variables) out.variables.push_back(current_slice_name(v));
    out.target_name = current_slice_name(data.target_name);
    if (data.rows() < 2) return out;
    out.dates.assign(data.dates.begin() + 1, data.dates.end());
    out.states.reserve((data.rows() - 1) * 2 * n);
    for (std::size_t r = 1; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) out.states.push_back(data.state(r - 1, c));
        for (std::size_t c = 0; c < n; ++c) out.states.push_back(data.state(r, c));
    }
    return out;
}

/// Constraints for the transition search over `lagged_pairs` columns.
inline bn::EdgeConstraints transition_constraints(std::size_t per_slice) {
    bn::EdgeConstraints c(2 * per_slice);
    for (std::size_t u = 0; u < 2 * per_slice; ++u)
        for (std::size_t v = 0; v < 2 * per_slice; ++v) {
            const bool into_previous = v < per_slice;
            const bool inter_slice = u < per_slice && v >= per_slice;
            if (into_previous || (inter_slice && v - per_slice != u)) c.forbid(u, v);
        }
    return c;
}

/// Learns the prior network from single rows and the transition network
/// from consecutive row pairs, both by BIC hill climbing.
inline TwoSliceBn learn_2tbn(const DirectionMatrix& train, const LearnConfig& cfg = {}) {
    const std::size_t n = train.cols();
    if (n == 0) throw Error(ErrorCode::VariableMissing, "training data has no variables");
    const std::size_t need = std::max(cfg.min_rows, cfg.rows_per_variable * n);
    if (train.rows() < need)
        throw Error(ErrorCode::TooFewRows, "2TBN learning needs " + std::to_string(need) + " rows, got " +
                                               std::to_string(train.rows()));
    if (cfg.slices < 1) throw Error(ErrorCode::InvalidConfig, "slice count must be >= 1");

    bn::HillClimbOptions opts;
    opts.max_parents = cfg.max_parents;
    opts.restarts = cfg.restarts;
    opts.seed = cfg.seed;
    opts.alpha = cfg.alpha;

    TwoSliceBn model;
    model.variable_names = train.variables;
    model.target_name = train.target_name;
    model.feature_group = cfg.feature_group;
    model.slices = cfg.slices;

    if (n == 1) {
        model.prior.dag = bn::DagStructure(train.variables);
        model.prior.cpts = bn::fit_cpts(model.prior.dag, train, cfg.alpha);
        model.prior.score = bn::bic_score(model.prior.dag, train);
        model.prior.sample_count = train.rows();
        model.prior.seed = cfg.seed;
    } else {
        model.prior = bn::hill_climb(train, opts);
    }

    opts.constraints = transition_constraints(n);
    model.transition = bn::hill_climb(lagged_pairs(train), opts);
    return model;
}

/// Inter-slice arcs of the transition network, as variable indices.
inline std::vector<std::size_t> persistence_arcs(const TwoSliceBn& model) {
    std::vector<std::size_t> out;
    const auto n = model.per_slice();
    for (std::size_t i = 0; i < n; ++i)
        if (model.transition.dag.has_edge(i, n + i)) out.push_back(i);
    return out;
}

/// A T-slice expansion; node t*N + i is variable i at slice t and is named
/// "<t>:<variable>".
struct UnrolledNetwork {
    std::size_t slices = 0;
    std::vector<std::string> variable_names;
    bn::ScoredNetwork network;

    std::size_t per_slice() const noexcept { return variable_names.size(); }
    std::size_t node(std::size_t slice, std::size_t var) const { return slice * per_slice() + var; }
};

inline std::string unrolled_name(std::size_t slice, const std::string& var) { return std::to_string(slice) + ":" + var; }

/// Slice 0 copies the prior; every later slice stamps the transition
/// network's current-slice families onto (t-1, t).
inline UnrolledNetwork unroll(const TwoSliceBn& model, std::size_t slices) {
    if (slices < 1) throw Error(ErrorCode::InvalidConfig, "slice count must be >= 1");
    const std::size_t n = model.per_slice();
    UnrolledNetwork out;
    out.slices = slices;
    out.variable_names = model.variable_names;
    std::vector<std::string> names;
    for (std::size_t t = 0; t < slices; ++t)
        for (const auto& v : model.variable_names) names.push_back(unrolled_name(t, v));
    out.network.dag = bn::DagStructure(std::move(names));
    out.network.cpts.resize(n * slices);
    for (std::size_t i = 0; i < n; ++i) {
        out.network.dag.parents[i] = model.prior.dag.parents[i];
        out.network.cpts[i] = model.prior.cpts[i];
    }
    for (std::size_t t = 1; t < slices; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& src = model.transition.dag.parents[n + i];
            auto& dst = out.network.dag.parents[t * n + i];
            for (auto p : src) dst.push_back(p < n ? (t - 1) * n + p : t * n + (p - n));
            auto cpt = model.transition.cpts[n + i];
            cpt.node = t * n + i;
            out.network.cpts[t * n + i] = std::move(cpt);
        }
    }
    out.network.sample_count = model.transition.sample_count;
    out.network.seed = model.transition.seed;
    return out;
}

inline UnrolledNetwork unroll(const TwoSliceBn& model) { return unroll(model, model.slices); }

struct SliceVariable {
    std::size_t slice = 0;
    std::string variable;

    auto operator<=>(const SliceVariable&) const = default;
};

struct Evidence {
    std::map<SliceVariable, Direction> observed;
    SliceVariable query;
};

struct Posterior {
    double down = 0.5;
    double up = 0.5;

    double of(Direction d) const { return d == Direction::Up ? up : down; }
};

inline std::size_t resolve(const UnrolledNetwork& net, const SliceVariable& sv) {
    if (sv.slice >= net.slices)
        throw Error(ErrorCode::SliceOutOfRange,
                    "slice " + std::to_string(sv.slice) + " outside 0.." + std::to_string(net.slices - 1));
    auto it = std::find(net.variable_names.begin(), net.variable_names.end(), sv.variable);
    if (it == net.variable_names.end()) throw Error(ErrorCode::UnknownVariable, "unknown variable '" + sv.variable + "'");
    return net.node(sv.slice, static_cast<std::size_t>(it - net.variable_names.begin()));
}

/// Exact P(query | evidence) on the unrolled network.
inline Posterior posterior(const UnrolledNetwork& net, const Evidence& evidence) {
    const auto q = resolve(net, evidence.query);
    std::vector<std::optional<std::uint8_t>> obs(net.network.dag.size());
    for (const auto& [sv, state] : evidence.observed) {
        const auto v = resolve(net, sv);
        if (v == q) throw Error(ErrorCode::EvidenceOnQuery, "evidence set on the query node " + unrolled_name(sv.slice, sv.variable));
        obs[v] = static_cast<std::uint8_t>(state);
    }
    const auto p = bn::posterior(net.network, q, obs);
    return {p[0], p[1]};
}

struct Prediction {
    Direction direction = Direction::Up;
    double probability = 0.5;
    /// Set when both states were exactly equally likely (resolved to Up).
    bool tie = false;
    Posterior posterior;
};

/// Evidence for a T-row window: every variable on the first T-1 rows and all
/// but the target on the last row; the query is the target on the last row.
inline Evidence window_evidence(const UnrolledNetwork& net, const std::string& target, const DirectionMatrix& window) {
    if (window.rows() != net.slices)
        throw Error(ErrorCode::WindowLengthMismatch,
                    "window has " + std::to_string(window.rows()) + " rows, model expects " + std::to_string(net.slices));
    for (std::size_t r = 1; r < window.rows(); ++r)
        if (!(window.dates[r - 1] < window.dates[r]))
            throw Error(ErrorCode::WindowLengthMismatch, "window rows are not in date order");
    std::vector<std::size_t> cols;
    for (const auto& v : net.variable_names) cols.push_back(window.require_index(v));
    Evidence ev;
    ev.query = {net.slices - 1, target};
    for (std::size_t t = 0; t < net.slices; ++t)
        for (std::size_t i = 0; i < net.per_slice(); ++i) {
            if (t + 1 == net.slices && net.variable_names[i] == target) continue;
            ev.observed[{t, net.variable_names[i]}] = window.at(t, cols[i]);
        }
    return ev;
}

inline Prediction decide(const Posterior& p) {
    Prediction out;
    out.posterior = p;
    out.tie = p.up == p.down;
    out.direction = p.up >= p.down ? Direction::Up : Direction::Down;
    out.probability = out.posterior.of(out.direction);
    return out;
}

inline Prediction predict_direction(const UnrolledNetwork& net, const std::string& target, const DirectionMatrix& window) {
    return decide(posterior(net, window_evidence(net, target, window)));
}

inline Prediction predict_direction(const TwoSliceBn& model, const DirectionMatrix& window) {
    return predict_direction(unroll(model), model.target_name, window);
}

// ---------------------------------------------------------------------------
// JSON: {prior, transition, variable_names, target, feature_group, T}

inline nlohmann::json to_json(const TwoSliceBn& m) {
    return {{"prior", bn::to_json(m.prior)},
            {"transition", bn::to_json(m.transition)},
            {"variable_names", m.variable_names},
            {"target", m.target_name},
            {"feature_group", m.feature_group},
            {"T", m.slices}};
}

inline TwoSliceBn model_from_json(const nlohmann::json& j) {
    TwoSliceBn m;
    try {
        m.prior = bn::network_from_json(j.at("prior"));
        m.transition = bn::network_from_json(j.at("transition"));
        m.variable_names = j.at("variable_names").get<std::vector<std::string>>();
        m.target_name = j.value("target", std::string("price.close"));
        m.feature_group = j.at("feature_group").get<int>();
        m.slices = j.at("T").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadModel, std::string("malformed model JSON: ") + e.what());
    }
    const std::size_t n = m.variable_names.size();
    if (m.prior.dag.nodes != m.variable_names || m.transition.dag.size() != 2 * n)
        throw Error(ErrorCode::BadModel, "prior/transition nodes do not match variable_names");
    for (std::size_t v = 0; v < 2 * n; ++v)
        for (auto p : m.transition.dag.parents[v])
            if (v < n || (p < n && p + n != v))
                throw Error(ErrorCode::BadModel, "transition arc " + m.transition.dag.nodes[p] + " -> " +
                                                     m.transition.dag.nodes[v] + " breaks the slice rules");
    if (std::find(m.variable_names.begin(), m.variable_names.end(), m.target_name) == m.variable_names.end())
        throw Error(ErrorCode::BadModel, "target '" + m.target_name + "' is not a model variable");
    if (m.slices < 1) throw Error(ErrorCode::BadModel, "T must be >= 1");
    return m;
}

} // namespace cdbn::dbn
