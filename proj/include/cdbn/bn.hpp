#pragma once

#include "cdbn/direction.hpp"
#include "cdbn/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

/// Static discrete Bayesian networks over binary (Down/Up) variables.
namespace cdbn::bn {

/// Directed acyclic graph over named nodes. Parent lists are kept sorted by
/// node index; CPT rows are indexed by the parents' states in that order.
struct DagStructure {
    std::vector<std::string> nodes;
    std::vector<std::vector<std::size_t>> parents;

    DagStructure() = default;
    explicit DagStructure(std::vector<std::string> names)
        : nodes(std::move(names)), parents(nodes.size()) {}

    std::size_t size() const noexcept { return nodes.size(); }

    bool has_edge(std::size_t from, std::size_t to) const {
        return std::binary_search(parents[to].begin(), parents[to].end(), from);
    }

    /// True when a directed path from -> ... -> to exists (from == to counts).
    bool reaches(std::size_t from, std::size_t to) const {
        if (from == to) return true;
        // Walk parent links backwards from `to`.
        std::vector<char> seen(size(), 0);
        std::vector<std::size_t> stack{to};
        seen[to] = 1;
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            for (auto p : parents[v]) {
                if (p == from) return true;
                if (!seen[p]) {
                    seen[p] = 1;
                    stack.push_back(p);
                }
            }
        }
        return false;
    }

    void add_edge(std::size_t from, std::size_t to) {
        if (from == to || reaches(to, from))
            throw Error(ErrorCode::BadModel, "edge " + nodes[from] + " -> " + nodes[to] + " would close a cycle");
        auto& ps = parents[to];
        ps.insert(std::lower_bound(ps.begin(), ps.end(), from), from);
    }

    void remove_edge(std::size_t from, std::size_t to) {
        auto& ps = parents[to];
        ps.erase(std::lower_bound(ps.begin(), ps.end(), from));
    }

    /// Kahn's algorithm; empty when the graph has a cycle.
    std::vector<std::size_t> topological_order() const {
        std::vector<std::size_t> indeg(size(), 0);
        std::vector<std::vector<std::size_t>> children(size());
        for (std::size_t v = 0; v < size(); ++v) {
            indeg[v] = parents[v].size();
            for (auto p : parents[v]) children[p].push_back(v);
        }
        std::vector<std::size_t> order, ready;
        for (std::size_t v = size(); v-- > 0;)
            if (indeg[v] == 0) ready.push_back(v);
        while (!ready.empty()) {
            auto v = ready.back();
            ready.pop_back();
            order.push_back(v);
            for (auto c : children[v])
                if (--indeg[c] == 0) ready.push_back(c);
        }
        if (order.size() != size()) order.clear();
        return order;
    }

    bool is_acyclic() const { return size() == 0 || !topological_order().empty(); }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& ps : parents) n += ps.size();
        return n;
    }

    /// (from, to) pairs ordered by target, then source.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t v = 0; v < size(); ++v)
            for (auto p : parents[v]) out.emplace_back(p, v);
        return out;
    }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = std::find(nodes.begin(), nodes.end(), name);
        if (it == nodes.end()) return std::nullopt;
        return static_cast<std::size_t>(it - nodes.begin());
    }

    bool operator==(const DagStructure&) const = default;
};

/// Conditional probability table of one binary node.
struct Cpt {
    std::size_t node = 0;
    std::size_t parent_config_count = 1;
    /// One {P(Down), P(Up)} row per parent configuration.
    std::vector<std::array<double, kStateCount>> probabilities;

    double prob(std::uint8_t state, std::size_t config) const { return probabilities[config][state]; }

    bool operator==(const Cpt&) const = default;
};

/// Row index of a parent configuration: bit k holds the state of the k-th parent.
template <class StateOf>
std::size_t parent_config(const std::vector<std::size_t>& parents, StateOf&& state_of) {
    std::size_t cfg = 0;
    for (std::size_t k = 0; k < parents.size(); ++k) cfg |= static_cast<std::size_t>(state_of(parents[k])) << k;
    return cfg;
}

struct ScoredNetwork {
    DagStructure dag;
    std::vector<Cpt> cpts;
    double score = 0.0;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;

    bool operator==(const ScoredNetwork&) const = default;
};

namespace detail {

/// Column-major copy of the data restricted to the DAG's nodes, so that
/// family statistics can be gathered with contiguous scans.
class ColumnData {
public:
    ColumnData(const DagStructure& dag, const DirectionMatrix& data) : rows_(data.rows()) {
        cols_.resize(dag.size());
        for (std::size_t v = 0; v < dag.size(); ++v) {
            auto idx = data.index_of(dag.nodes[v]);
            if (!idx) throw Error(ErrorCode::VariableMissing, "node '" + dag.nodes[v] + "' has no data column");
            auto& col = cols_[v];
            col.resize(rows_);
            for (std::size_t r = 0; r < rows_; ++r) col[r] = data.state(r, *idx);
        }
    }

    std::size_t rows() const noexcept { return rows_; }

    /// counts[cfg][state] for the family (node | parents).
    std::vector<std::array<std::size_t, kStateCount>> family_counts(std::size_t node,
                                                                    const std::vector<std::size_t>& parents) const {
        std::vector<std::array<std::size_t, kStateCount>> counts(std::size_t{1} << parents.size(), {0, 0});
        const auto& child = cols_[node];
        for (std::size_t r = 0; r < rows_; ++r) {
            std::size_t cfg = 0;
            for (std::size_t k = 0; k < parents.size(); ++k) cfg |= static_cast<std::size_t>(cols_[parents[k]][r]) << k;
            ++counts[cfg][child[r]];
        }
        return counts;
    }

private:
    std::size_t rows_;
    std::vector<std::vector<std::uint8_t>> cols_;
};

/// BIC contribution of one family: maximum-likelihood log-likelihood minus
/// (ln N / 2) per free parameter.
inline double family_bic(const ColumnData& data, std::size_t node, const std::vector<std::size_t>& parents) {
    const auto counts = data.family_counts(node, parents);
    double ll = 0.0;
    for (const auto& row : counts) {
        const double total = static_cast<double>(row[0] + row[1]);
        for (auto c : row)
            if (c > 0) ll += static_cast<double>(c) * std::log(static_cast<double>(c) / total);
    }
    const double free_params = static_cast<double>(counts.size()) * (kStateCount - 1);
    return ll - 0.5 * std::log(static_cast<double>(data.rows())) * free_params;
}

} // namespace detail

/// Laplace-smoothed CPTs: P(x | pa) = (n(x, pa) + alpha) / (n(pa) + 2 alpha).
inline std::vector<Cpt> fit_cpts(const DagStructure& dag, const DirectionMatrix& data, double alpha = 1.0) {
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "smoothing alpha must be > 0");
    detail::ColumnData cols(dag, data);
    std::vector<Cpt> cpts;
    cpts.reserve(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v) {
        const auto counts = cols.family_counts(v, dag.parents[v]);
        Cpt cpt{v, counts.size(), {}};
        cpt.probabilities.reserve(counts.size());
        for (const auto& row : counts) {
            const double denom = static_cast<double>(row[0] + row[1]) + alpha * kStateCount;
            const double down = (static_cast<double>(row[0]) + alpha) / denom;
            cpt.probabilities.push_back({down, 1.0 - down});
        }
        cpts.push_back(std::move(cpt));
    }
    return cpts;
}

/// Per-family BIC terms, in node order.
inline std::vector<double> family_scores(const DagStructure& dag, const DirectionMatrix& data) {
    if (data.rows() == 0) throw Error(ErrorCode::TooFewRows, "BIC needs at least one row");
    detail::ColumnData cols(dag, data);
    std::vector<double> out;
    for (std::size_t v = 0; v < dag.size(); ++v) out.push_back(detail::family_bic(cols, v, dag.parents[v]));
    return out;
}

/// BIC (natural log) of the DAG under maximum-likelihood parameters.
inline double bic_score(const DagStructure& dag, const DirectionMatrix& data) {
    double total = 0.0;
    for (double s : family_scores(dag, data)) total += s;
    return total;
}

/// Product of P(x_i | pa_i) over all nodes; `assignment` is indexed by node.
inline double joint_probability(const ScoredNetwork& net, std::span<const Direction> assignment) {
    if (assignment.size() != net.dag.size())
        throw Error(ErrorCode::IncompleteAssignment, "assignment covers " + std::to_string(assignment.size()) +
                                                         " of " + std::to_string(net.dag.size()) + " nodes");
    double p = 1.0;
    for (std::size_t v = 0; v < net.dag.size(); ++v) {
        auto cfg = parent_config(net.dag.parents[v], [&](std::size_t u) { return static_cast<std::uint8_t>(assignment[u]); });
        p *= net.cpts[v].prob(static_cast<std::uint8_t>(assignment[v]), cfg);
    }
    return p;
}

/// Structural constraints for the search, by node index.
class EdgeConstraints {
public:
    EdgeConstraints() = default;
    explicit EdgeConstraints(std::size_t n) : n_(n), forbidden_(n * n, 0) {}

    std::size_t size() const noexcept { return n_; }

    void forbid(std::size_t from, std::size_t to) { forbidden_[from * n_ + to] = 1; }
    void require(std::size_t from, std::size_t to) { required_.emplace_back(from, to); }

    void forbid_all() { std::fill(forbidden_.begin(), forbidden_.end(), 1); }

    bool allowed(std::size_t from, std::size_t to) const {
        return from != to && (forbidden_.empty() || !forbidden_[from * n_ + to]);
    }
    bool is_required(std::size_t from, std::size_t to) const {
        return std::find(required_.begin(), required_.end(), std::pair{from, to}) != required_.end();
    }
    const std::vector<std::pair<std::size_t, std::size_t>>& required() const noexcept { return required_; }

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> forbidden_;
    std::vector<std::pair<std::size_t, std::size_t>> required_;
};

struct HillClimbOptions {
    EdgeConstraints constraints;
    std::size_t max_parents = 3;
    std::size_t restarts = 8;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    /// Re-verify acyclicity with a full topological sort after every move.
    bool check_each_move = true;
};

enum class MoveKind : std::uint8_t { Add = 0, Delete = 1, Reverse = 2 };

struct Move {
    MoveKind kind;
    std::size_t from;
    std::size_t to;
    double delta;
};

/// Greedy search state for one restart. Family scores are memoized by
/// (node, parent bitmask), which caps the network at 64 nodes.
class HillClimber {
public:
    HillClimber(const DirectionMatrix& data, const HillClimbOptions& options)
        : data_(DagStructure(data.variables), data), options_(options), n_(data.cols()) {
        if (n_ > 64) throw Error(ErrorCode::InvalidConfig, "hill climbing supports at most 64 variables");
        if (options_.constraints.size() != 0 && options_.constraints.size() != n_)
            throw Error(ErrorCode::InvalidConfig, "constraint matrix size does not match variable count");
    }

    /// Runs steepest-ascent moves from `start` until no move improves BIC
    /// strictly. Appends the score after each accepted move to `trace`.
    DagStructure climb(DagStructure start, std::vector<double>* trace = nullptr) {
        auto dag = std::move(start);
        double current = score(dag);
        if (trace) trace->push_back(current);
        while (true) {
            auto best = best_move(dag);
            if (!best || best->delta <= kMinImprovement) break;
            apply(dag, *best);
            if (options_.check_each_move && !dag.is_acyclic())
                throw Error(ErrorCode::BadModel, "hill climbing produced a cycle");
            current = score(dag);
            if (trace) trace->push_back(current);
        }
        return dag;
    }

    double family(std::size_t node, const std::vector<std::size_t>& parents) {
        std::uint64_t mask = 0;
        for (auto p : parents) mask |= std::uint64_t{1} << p;
        const auto key = std::pair{node, mask};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double s = detail::family_bic(data_, node, parents);
        cache_.emplace(key, s);
        return s;
    }

    double score(const DagStructure& dag) {
        double total = 0.0;
        for (std::size_t v = 0; v < dag.size(); ++v) total += family(v, dag.parents[v]);
        return total;
    }

    /// Start graph for a restart: required edges, then (for restart > 0) a
    /// seeded shuffle of the allowed edges inserted while they keep the graph
    /// acyclic and within the parent limit.
    DagStructure initial_graph(const std::vector<std::string>& names, std::size_t restart) const {
        DagStructure dag(names);
        for (auto [from, to] : options_.constraints.required()) {
            if (dag.parents[to].size() >= options_.max_parents || dag.reaches(to, from))
                throw Error(ErrorCode::InvalidConfig, "required edges violate acyclicity or max_parents");
            dag.add_edge(from, to);
        }
        if (restart == 0) return dag;
        std::vector<std::pair<std::size_t, std::size_t>> candidates;
        for (std::size_t u = 0; u < n_; ++u)
            for (std::size_t v = 0; v < n_; ++v)
                if (allowed(u, v)) candidates.emplace_back(u, v);
        std::mt19937_64 rng(options_.seed * 0x9E3779B97F4A7C15ULL + restart);
        for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng() % i]);
        const std::size_t target = std::max<std::size_t>(1, n_ / 2);
        std::size_t inserted = 0;
        for (auto [u, v] : candidates) {
            if (inserted == target) break;
            if (dag.has_edge(u, v) || dag.has_edge(v, u) || dag.parents[v].size() >= options_.max_parents ||
                dag.reaches(v, u))
                continue;
            dag.add_edge(u, v);
            ++inserted;
        }
        return dag;
    }

private:
    static constexpr double kMinImprovement = 1e-9;

    struct PairHash {
        std::size_t operator()(const std::pair<std::size_t, std::uint64_t>& k) const noexcept {
            return std::hash<std::uint64_t>{}(k.second * 0x9E3779B97F4A7C15ULL ^ k.first);
        }
    };

    bool allowed(std::size_t from, std::size_t to) const {
        return from != to && (options_.constraints.size() == 0 || options_.constraints.allowed(from, to));
    }
    bool required(std::size_t from, std::size_t to) const {
        return options_.constraints.size() != 0 && options_.constraints.is_required(from, to);
    }

    static std::vector<std::size_t> with(std::vector<std::size_t> ps, std::size_t p) {
        ps.insert(std::lower_bound(ps.begin(), ps.end(), p), p);
        return ps;
    }
    static std::vector<std::size_t> without(std::vector<std::size_t> ps, std::size_t p) {
        ps.erase(std::lower_bound(ps.begin(), ps.end(), p));
        return ps;
    }

    static bool better(const Move& a, const std::optional<Move>& b) {
        if (!b) return true;
        if (a.delta != b->delta) return a.delta > b->delta;
        return std::tuple{a.kind, a.from, a.to} < std::tuple{b->kind, b->from, b->to};
    }

    std::optional<Move> best_move(const DagStructure& dag) {
        std::optional<Move> best;
        for (std::size_t u = 0; u < n_; ++u) {
            for (std::size_t v = 0; v < n_; ++v) {
                if (u == v) continue;
                const auto& pv = dag.parents[v];
                if (dag.has_edge(u, v)) {
                    if (required(u, v)) continue;
                    const double drop = family(v, without(pv, u)) - family(v, pv);
                    Move del{MoveKind::Delete, u, v, drop};
                    if (better(del, best)) best = del;
                    const auto& pu = dag.parents[u];
                    if (allowed(v, u) && pu.size() < options_.max_parents) {
                        auto trimmed = dag;
                        trimmed.remove_edge(u, v);
                        if (!trimmed.reaches(u, v)) {
                            Move rev{MoveKind::Reverse, u, v, drop + family(u, with(pu, v)) - family(u, pu)};
                            if (better(rev, best)) best = rev;
                        }
                    }
                } else if (!dag.has_edge(v, u) && allowed(u, v) && pv.size() < options_.max_parents &&
                           !dag.reaches(v, u)) {
                    Move add{MoveKind::Add, u, v, family(v, with(pv, u)) - family(v, pv)};
                    if (better(add, best)) best = add;
                }
            }
        }
        return best;
    }

    static void apply(DagStructure& dag, const Move& m) {
        switch (m.kind) {
        case MoveKind::Add: dag.add_edge(m.from, m.to); break;
        case MoveKind::Delete: dag.remove_edge(m.from, m.to); break;
        case MoveKind::Reverse:
            dag.remove_edge(m.from, m.to);
            dag.add_edge(m.to, m.from);
            break;
        }
    }

    detail::ColumnData data_;
    HillClimbOptions options_;
    std::size_t n_;
    std::unordered_map<std::pair<std::size_t, std::uint64_t>, double, PairHash> cache_;
};

/// Best-of-restarts greedy BIC search; CPTs of the winner are smoothed with
/// `options.alpha`. Equal scores resolve to the lexicographically smaller
/// parent lists, so results depend only on (data, options).
inline ScoredNetwork hill_climb(const DirectionMatrix& data, const HillClimbOptions& options = {}) {
    if (data.cols() < 2) throw Error(ErrorCode::InvalidConfig, "hill climbing needs at least 2 variables");
    if (data.rows() == 0) throw Error(ErrorCode::TooFewRows, "hill climbing needs data rows");
    HillClimber climber(data, options);
    std::optional<DagStructure> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
        auto dag = climber.climb(climber.initial_graph(data.variables, r));
        const double s = climber.score(dag);
        if (!best || s > best_score || (s == best_score && dag.parents < best->parents)) {
            best = std::move(dag);
            best_score = s;
        }
    }
    ScoredNetwork net;
    net.dag = std::move(*best);
    net.cpts = fit_cpts(net.dag, data, options.alpha);
    net.score = bic_score(net.dag, data);
    net.sample_count = data.rows();
    net.seed = options.seed;
    return net;
}

/// Builds a network from explicit structure and CPT rows (tests, hand models).
inline ScoredNetwork make_network(DagStructure dag, const std::vector<std::vector<std::array<double, 2>>>& rows) {
    if (rows.size() != dag.size()) throw Error(ErrorCode::BadModel, "one CPT per node required");
    ScoredNetwork net;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        const std::size_t configs = std::size_t{1} << dag.parents[v].size();
        if (rows[v].size() != configs)
            throw Error(ErrorCode::BadModel, "node '" + dag.nodes[v] + "' needs " + std::to_string(configs) + " CPT rows");
        net.cpts.push_back({v, configs, rows[v]});
    }
    net.dag = std::move(dag);
    return net;
}

// ---------------------------------------------------------------------------
// JSON: {nodes, parents:{node:[...]}, cpts:{node:[[p_down,p_up],...]},
//        score, sample_count, seed}

inline nlohmann::json to_json(const ScoredNetwork& net) {
    nlohmann::json j;
    j["nodes"] = net.dag.nodes;
    nlohmann::json parents = nlohmann::json::object(), cpts = nlohmann::json::object();
    for (std::size_t v = 0; v < net.dag.size(); ++v) {
        auto& plist = parents[net.dag.nodes[v]] = nlohmann::json::array();
        for (auto p : net.dag.parents[v]) plist.push_back(net.dag.nodes[p]);
        auto& rows = cpts[net.dag.nodes[v]] = nlohmann::json::array();
        for (const auto& row : net.cpts[v].probabilities) rows.push_back({row[0], row[1]});
    }
    j["parents"] = std::move(parents);
    j["cpts"] = std::move(cpts);
    j["score"] = net.score;
    j["sample_count"] = net.sample_count;
    j["seed"] = net.seed;
    return j;
}

inline ScoredNetwork network_from_json(const nlohmann::json& j) {
    try {
        ScoredNetwork net;
        net.dag = DagStructure(j.at("nodes").get<std::vector<std::string>>());
        for (std::size_t v = 0; v < net.dag.size(); ++v) {
            const auto& name = net.dag.nodes[v];
            for (const auto& p : j.at("parents").at(name)) {
                auto idx = net.dag.index_of(p.get<std::string>());
                if (!idx) throw Error(ErrorCode::BadModel, "unknown parent '" + p.get<std::string>() + "'");
                net.dag.parents[v].push_back(*idx);
            }
            std::sort(net.dag.parents[v].begin(), net.dag.parents[v].end());
            if (std::adjacent_find(net.dag.parents[v].begin(), net.dag.parents[v].end()) != net.dag.parents[v].end())
                throw Error(ErrorCode::BadModel, "duplicate parent of '" + name + "'");
        }
        if (!net.dag.is_acyclic()) throw Error(ErrorCode::BadModel, "model graph has a cycle");
        std::vector<std::vector<std::array<double, 2>>> rows;
        for (std::size_t v = 0; v < net.dag.size(); ++v) {
            auto& r = rows.emplace_back();
            for (const auto& row : j.at("cpts").at(net.dag.nodes[v])) {
                const double down = row.at(0).get<double>(), up = row.at(1).get<double>();
                if (!(down >= 0.0 && up >= 0.0) || std::abs(down + up - 1.0) > 1e-9)
                    throw Error(ErrorCode::BadModel, "CPT row of '" + net.dag.nodes[v] + "' is not a distribution");
                r.push_back({down, up});
            }
        }
        auto built = make_network(std::move(net.dag), rows);
        built.score = j.at("score").get<double>();
        built.sample_count = j.at("sample_count").get<std::size_t>();
        built.seed = j.at("seed").get<std::uint64_t>();
        return built;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadModel, std::string("malformed network JSON: ") + e.what());
    }
}

} // namespace cdbn::bn
