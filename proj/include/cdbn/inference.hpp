#pragma once

#include "cdbn/bn.hpp"
#include "cdbn/error.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cdbn::bn {

/// Table over binary variables; bit j of an index is the state of vars[j].
struct Factor {
    std::vector<std::size_t> vars;  // ascending
    std::vector<double> values;
};

namespace detail {

/// Factors wider than this are refused rather than allocated.
inline constexpr std::size_t kMaxFactorWidth = 26;

inline void check_width(std::size_t width) {
    if (width > kMaxFactorWidth)
        throw Error(ErrorCode::InferenceTooLarge,
                    "elimination needs a factor over " + std::to_string(width) + " variables");
}

/// Position of each of `sub`'s vars inside `super` (both ascending, sub ⊆ super).
inline std::vector<std::size_t> positions(const std::vector<std::size_t>& sub, const std::vector<std::size_t>& super) {
    std::vector<std::size_t> pos;
    pos.reserve(sub.size());
    for (auto v : sub) pos.push_back(static_cast<std::size_t>(std::lower_bound(super.begin(), super.end(), v) - super.begin()));
    return pos;
}

inline std::size_t project(std::size_t index, const std::vector<std::size_t>& pos) {
    std::size_t out = 0;
    for (std::size_t j = 0; j < pos.size(); ++j) out |= ((index >> pos[j]) & 1U) << j;
    return out;
}

inline Factor multiply(const std::vector<const Factor*>& factors) {
    Factor out;
    std::set<std::size_t> all;
    for (const auto* f : factors) all.insert(f->vars.begin(), f->vars.end());
    out.vars.assign(all.begin(), all.end());
    check_width(out.vars.size());
    std::vector<std::vector<std::size_t>> pos;
    for (const auto* f : factors) pos.push_back(positions(f->vars, out.vars));
    out.values.assign(std::size_t{1} << out.vars.size(), 1.0);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        for (std::size_t k = 0; k < factors.size(); ++k) out.values[i] *= factors[k]->values[project(i, pos[k])];
    return out;
}

inline Factor sum_out(const Factor& f, std::size_t var) {
    const auto at = static_cast<std::size_t>(std::lower_bound(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
    Factor out;
    out.vars = f.vars;
    out.vars.erase(out.vars.begin() + static_cast<std::ptrdiff_t>(at));
    out.values.assign(std::size_t{1} << out.vars.size(), 0.0);
    const std::size_t low_mask = (std::size_t{1} << at) - 1;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const std::size_t j = (i & low_mask) | ((i >> (at + 1)) << at);
        out.values[j] += f.values[i];
    }
    return out;
}

} // namespace detail

/// CPT of `node` as a factor with the observed variables fixed.
inline Factor cpt_factor(const ScoredNetwork& net, std::size_t node,
                         const std::vector<std::optional<std::uint8_t>>& evidence) {
    std::vector<std::size_t> family = net.dag.parents[node];
    family.push_back(node);
    std::sort(family.begin(), family.end());
    Factor f;
    for (auto v : family)
        if (!evidence[v]) f.vars.push_back(v);
    f.values.resize(std::size_t{1} << f.vars.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        auto state_of = [&](std::size_t v) -> std::uint8_t {
            if (evidence[v]) return *evidence[v];
            auto at = std::lower_bound(f.vars.begin(), f.vars.end(), v) - f.vars.begin();
            return static_cast<std::uint8_t>((i >> at) & 1U);
        };
        f.values[i] = net.cpts[node].prob(state_of(node), parent_config(net.dag.parents[node], state_of));
    }
    return f;
}

/// Exact P(query | evidence) by variable elimination. Only ancestors of the
/// query and evidence nodes take part; the elimination order is greedy
/// min-fill with ties going to the smaller node name. `evidence` is indexed
/// by node. Returns {P(Down), P(Up)}.
inline std::array<double, 2> posterior(const ScoredNetwork& net, std::size_t query,
                                       const std::vector<std::optional<std::uint8_t>>& evidence) {
    const std::size_t n = net.dag.size();
    if (evidence.size() != n) throw Error(ErrorCode::IncompleteAssignment, "evidence vector size mismatch");
    if (query >= n) throw Error(ErrorCode::UnknownVariable, "query node out of range");
    if (evidence[query]) throw Error(ErrorCode::EvidenceOnQuery, "query node '" + net.dag.nodes[query] + "' is observed");

    std::vector<char> relevant(n, 0);
    std::vector<std::size_t> stack;
    for (std::size_t v = 0; v < n; ++v)
        if (v == query || evidence[v]) stack.push_back(v);
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        if (relevant[v]) continue;
        relevant[v] = 1;
        for (auto p : net.dag.parents[v]) stack.push_back(p);
    }

    std::vector<Factor> factors;
    for (std::size_t v = 0; v < n; ++v) {
        if (!relevant[v]) continue;
        auto f = cpt_factor(net, v, evidence);
        if (f.vars.empty()) {
            if (f.values[0] == 0.0) throw Error(ErrorCode::ZeroProbabilityEvidence, "evidence has probability zero");
            continue;  // constant; irrelevant after normalization
        }
        factors.push_back(std::move(f));
    }

    // Interaction graph over the hidden variables still to eliminate.
    std::vector<std::set<std::size_t>> adj(n);
    std::set<std::size_t> hidden;
    for (const auto& f : factors)
        for (auto a : f.vars) {
            if (a != query) hidden.insert(a);
            for (auto b : f.vars)
                if (a != b) adj[a].insert(b);
        }

    while (!hidden.empty()) {
        std::size_t pick = *hidden.begin();
        std::size_t best_fill = SIZE_MAX;
        for (auto v : hidden) {
            std::size_t fill = 0;
            for (auto a = adj[v].begin(); a != adj[v].end(); ++a)
                for (auto b = std::next(a); b != adj[v].end(); ++b)
                    if (!adj[*a].count(*b)) ++fill;
            if (fill < best_fill || (fill == best_fill && net.dag.nodes[v] < net.dag.nodes[pick])) {
                best_fill = fill;
                pick = v;
            }
        }

        std::vector<const Factor*> involved;
        std::vector<Factor> rest;
        for (const auto& f : factors)
            if (std::binary_search(f.vars.begin(), f.vars.end(), pick)) involved.push_back(&f);
        Factor merged = detail::sum_out(detail::multiply(involved), pick);
        const double peak = *std::max_element(merged.values.begin(), merged.values.end());
        if (!(peak > 0.0)) throw Error(ErrorCode::ZeroProbabilityEvidence, "evidence has probability zero");
        for (auto& x : merged.values) x /= peak;
        for (auto& f : factors)
            if (!std::binary_search(f.vars.begin(), f.vars.end(), pick)) rest.push_back(std::move(f));
        if (!merged.vars.empty()) rest.push_back(std::move(merged));
        factors = std::move(rest);

        for (auto a : adj[pick]) {
            adj[a].erase(pick);
            for (auto b : adj[pick])
                if (a != b) adj[a].insert(b);
        }
        adj[pick].clear();
        hidden.erase(pick);
    }

    std::array<double, 2> out{1.0, 1.0};
    for (const auto& f : factors) {
        // Only the query can remain.
        out[0] *= f.values[0];
        out[1] *= f.values[1];
    }
    const double z = out[0] + out[1];
    if (!(z > 0.0)) throw Error(ErrorCode::ZeroProbabilityEvidence, "evidence has probability zero");
    return {out[0] / z, out[1] / z};
}

} // namespace cdbn::bn
