#pragma once

#include "cdbn/backtest.hpp"
#include "cdbn/dbn.hpp"
#include "cdbn/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

/// Command implementations behind the `cdbn` executable. Each returns the
/// process exit code.
namespace cdbn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitConvergence = 3;

inline int exit_code_for(const Error& e) {
    return e.category() == ErrorCategory::Convergence ? kExitConvergence : kExitData;
}

struct RunConfig {
    CoinConfig coin;
    BacktestConfig backtest;
    std::string out_dir = ".";
};

// ---------------------------------------------------------------------------
// Flag value parsing

inline std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(detail::trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_value(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) throw Error(ErrorCode::InvalidConfig, "bad " + what + " value '" + text + "'");
    return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
    std::vector<T> out;
    for (const auto& item : split_on(text, ',')) out.push_back(parse_value<T>(item, what));
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty " + what + " list");
    return out;
}

/// "1,3" -> {1, 3}.
inline std::vector<int> parse_groups(const std::string& text) {
    auto out = parse_list<int>(text, "group");
    for (int g : out) feature_group(g);
    return out;
}

/// Semicolon-separated `key:v1,v2` sections, e.g. "p:0,1;d:1;q:0,1".
inline std::vector<std::pair<std::string, std::string>> parse_sections(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& part : split_on(text, ';')) {
        if (part.empty()) continue;
        auto colon = part.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "grid section '" + part + "' lacks ':'");
        out.emplace_back(detail::lower(detail::trim(part.substr(0, colon))), part.substr(colon + 1));
    }
    return out;
}

inline baselines::ArimaGrid parse_arima_grid(const std::string& text, baselines::ArimaGrid grid = {}) {
    for (const auto& [key, values] : parse_sections(text)) {
        auto list = parse_list<int>(values, "ARIMA " + key);
        for (int v : list)
            if (v < 0) throw Error(ErrorCode::InvalidConfig, "ARIMA orders must be non-negative");
        if (key == "p") grid.p = list;
        else if (key == "d") grid.d = list;
        else if (key == "q") grid.q = list;
        else throw Error(ErrorCode::InvalidConfig, "unknown ARIMA grid key '" + key + "'");
    }
    return grid;
}

inline baselines::SvrGrid parse_svr_grid(const std::string& text, baselines::SvrGrid grid = {}) {
    for (const auto& [key, values] : parse_sections(text)) {
        if (key == "kernel") {
            grid.kernels.clear();
            for (const auto& k : split_on(values, ',')) {
                if (detail::lower(k) == "rbf") grid.kernels.push_back(baselines::Kernel::Rbf);
                else if (detail::lower(k) == "linear") grid.kernels.push_back(baselines::Kernel::Linear);
                else throw Error(ErrorCode::InvalidConfig, "unknown SVR kernel '" + k + "'");
            }
            continue;
        }
        auto list = parse_list<double>(values, "SVR " + key);
        if (key == "c") grid.c = list;
        else if (key == "eps" || key == "epsilon") grid.epsilon = list;
        else if (key == "gamma") grid.gamma = list;
        else throw Error(ErrorCode::InvalidConfig, "unknown SVR grid key '" + key + "'");
    }
    return grid;
}

/// Comma-separated `slice:variable=Up|Down` items; an empty string is no
/// evidence.
inline std::vector<std::pair<dbn::SliceVariable, Direction>> parse_evidence(const std::string& text) {
    std::vector<std::pair<dbn::SliceVariable, Direction>> out;
    if (detail::trim(text).empty()) return out;
    for (const auto& item : split_on(text, ',')) {
        auto colon = item.find(':');
        auto eq = item.rfind('=');
        if (colon == std::string::npos || eq == std::string::npos || eq < colon)
            throw Error(ErrorCode::InvalidConfig, "evidence item '" + item + "' is not slice:variable=Up|Down");
        auto state = parse_direction(detail::trim(item.substr(eq + 1)));
        if (!state) throw Error(ErrorCode::InvalidConfig, "evidence state must be Up or Down in '" + item + "'");
        out.push_back({{parse_value<std::size_t>(detail::trim(item.substr(0, colon)), "slice"), detail::trim(item.substr(colon + 1, eq - colon - 1))},
                       *state});
    }
    return out;
}

/// DBN_SEED, when set to an unsigned integer.
inline std::optional<std::uint64_t> seed_from_env() {
    const char* s = std::getenv("DBN_SEED");
    if (!s || !*s) return std::nullopt;
    return parse_value<std::uint64_t>(s, "DBN_SEED");
}

// ---------------------------------------------------------------------------
// Files

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
    out << text;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "file not found: " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::string model_text(const dbn::TwoSliceBn& m) { return dbn::to_json(m).dump(2) + "\n"; }

inline dbn::TwoSliceBn load_model(const std::string& path) {
    const auto text = read_file(path);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::BadModel, "model file " + path + " is not valid JSON");
    return dbn::model_from_json(j);
}

// ---------------------------------------------------------------------------
// Commands

/// Per-node parent lists of both networks, with inter-slice arcs listed
/// separately.
inline std::string describe_model(const dbn::TwoSliceBn& m) {
    std::ostringstream out;
    const auto n = m.per_slice();
    out << "feature group " << m.feature_group << ", " << n << " variables, T=" << m.slices << "\n";
    auto parents_of = [](const bn::DagStructure& dag, std::size_t v) {
        std::string s;
        for (auto p : dag.parents[v]) s += (s.empty() ? "" : ", ") + dag.nodes[p];
        return s.empty() ? std::string("-") : s;
    };
    out << "prior network (score " << m.prior.score << ")\n";
    for (std::size_t v = 0; v < n; ++v) out << "  " << m.prior.dag.nodes[v] << " <- " << parents_of(m.prior.dag, v) << "\n";
    out << "transition network (score " << m.transition.score << ")\n";
    for (std::size_t v = n; v < 2 * n; ++v)
        out << "  " << m.transition.dag.nodes[v] << " <- " << parents_of(m.transition.dag, v) << "\n";
    out << "inter-slice arcs:";
    const auto arcs = dbn::persistence_arcs(m);
    if (arcs.empty()) out << " none";
    for (auto i : arcs) out << " " << m.variable_names[i];
    out << "\n";
    return out.str();
}

inline int cmd_backtest(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        Diagnostics diag(&err);
        const auto report = run_backtest(cfg.coin, cfg.backtest, diag);
        std::filesystem::create_directories(cfg.out_dir);
        const std::filesystem::path dir(cfg.out_dir);
        for (const auto& g : report.groups) write_file(dir / g.model_path, model_text(g.model));
        write_file(dir / "report.json", to_json(report).dump(2) + "\n");
        const auto text = render_text(report);
        write_file(dir / "report.txt", text);
        out << text;
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Learns one group's model from the training rows and writes model_g<k>.json.
inline int cmd_train(const RunConfig& cfg, int group, std::ostream& out, std::ostream& err) {
    try {
        cfg.backtest.validate();
        const auto def = feature_group(group);
        Diagnostics diag(&err);
        const auto data = prepare_coin(cfg.coin, cfg.backtest, diag);
        if (def.include_external && !data.has_tweets)
            diag.warn("group " + std::to_string(group) + ": social.tweets excluded, no tweet data for " + cfg.coin.name);
        const auto matrix = data.directions.select(group_variables(data.directions, def));
        dbn::TwoSliceBn model;
        try {
            model = dbn::learn_2tbn(split(matrix, cfg.backtest.train_fraction).train, cfg.backtest.learn_config(group));
        } catch (const Error& e) {
            rethrow_with_context(e, "coin " + cfg.coin.name + ", group " + std::to_string(group));
        }
        std::filesystem::create_directories(cfg.out_dir);
        const auto path = std::filesystem::path(cfg.out_dir) / ("model_g" + std::to_string(group) + ".json");
        write_file(path, model_text(model));
        out << describe_model(model) << "wrote " << path.string() << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Posterior of the target on the final slice under the given evidence.
inline dbn::Posterior whatif(const dbn::TwoSliceBn& model, const std::vector<std::pair<dbn::SliceVariable, Direction>>& evidence) {
    const auto net = dbn::unroll(model);
    dbn::Evidence ev;
    ev.query = {model.slices - 1, model.target_name};
    for (const auto& [sv, d] : evidence) ev.observed[sv] = d;
    return dbn::posterior(net, ev);
}

inline int cmd_whatif(const std::string& model_path, const std::string& evidence, std::ostream& out, std::ostream& err) {
    try {
        const auto model = load_model(model_path);
        const auto p = whatif(model, parse_evidence(evidence));
        const auto decision = dbn::decide(p);
        out << std::setprecision(6) << std::fixed << "P(" << model.slices - 1 << ":" << model.target_name
            << " = Down) = " << p.down << "\nP(" << model.slices - 1 << ":" << model.target_name << " = Up) = " << p.up
            << "\nargmax: " << to_string(decision.direction) << (decision.tie ? " (tie)" : "") << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

} // namespace cdbn::cli
