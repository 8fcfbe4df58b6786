#pragma once

#include "cdbn/dbn.hpp"
#include "cdbn/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>

/// HTTP what-if service over one model fixed at startup.
namespace cdbn::serve {

/// FNV-1a over the model file bytes, as 16 hex digits.
inline std::string model_id(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Response {
    int status = 200;
    nlohmann::json body;
};

inline nlohmann::json error_body(std::string_view code, const std::string& message) {
    return {{"error", code}, {"message", message}};
}

/// Stateless request handling; every member is read-only after construction.
class WhatIfService {
public:
    WhatIfService(dbn::TwoSliceBn model, std::string id)
        : model_(std::move(model)), net_(dbn::unroll(model_)), id_(std::move(id)) {}

    const dbn::TwoSliceBn& model() const noexcept { return model_; }
    const std::string& id() const noexcept { return id_; }

    /// Variables, T, group and arc lists. Transition arcs are given by
    /// variable name: `intra` within a slice, `inter` from the previous one.
    nlohmann::json schema() const {
        const auto n = model_.per_slice();
        nlohmann::json prior = nlohmann::json::array(), intra = nlohmann::json::array(), inter = nlohmann::json::array();
        for (const auto& [u, v] : model_.prior.dag.edges()) prior.push_back({model_.variable_names[u], model_.variable_names[v]});
        for (const auto& [u, v] : model_.transition.dag.edges()) {
            if (u < n) inter.push_back({model_.variable_names[u], model_.variable_names[v - n]});
            else intra.push_back({model_.variable_names[u - n], model_.variable_names[v - n]});
        }
        return {{"model_id", id_},
                {"variables", model_.variable_names},
                {"target", model_.target_name},
                {"T", model_.slices},
                {"feature_group", model_.feature_group},
                {"query", {{"slice", model_.slices - 1}, {"variable", model_.target_name}}},
                {"arcs", {{"prior", prior}, {"intra", intra}, {"inter", inter}}}};
    }

    /// POST /api/whatif. Body: {"evidence": [{"slice", "variable", "state"}],
    /// "query": {"slice", "variable"}?}.
    Response whatif(const std::string& body) const {
        auto req = nlohmann::json::parse(body, nullptr, false);
        if (req.is_discarded()) return {422, error_body("MalformedRequest", "request body is not valid JSON")};
        dbn::Evidence ev;
        ev.query = {model_.slices - 1, model_.target_name};
        nlohmann::json echo = nlohmann::json::array();
        try {
            if (!req.is_object()) throw std::invalid_argument("request must be a JSON object");
            const auto items = req.value("evidence", nlohmann::json::array());
            if (!items.is_array()) throw std::invalid_argument("evidence must be an array");
            for (const auto& item : items) {
                dbn::SliceVariable sv{item.at("slice").get<std::size_t>(), item.at("variable").get<std::string>()};
                const auto text = item.at("state").get<std::string>();
                const auto state = parse_direction(text);
                if (!state) throw std::invalid_argument("state must be \"Up\" or \"Down\", got \"" + text + "\"");
                ev.observed[sv] = *state;
                echo.push_back({{"slice", sv.slice}, {"variable", sv.variable}, {"state", to_string(*state)}});
            }
            if (req.contains("query"))
                ev.query = {req["query"].at("slice").get<std::size_t>(), req["query"].at("variable").get<std::string>()};
        } catch (const nlohmann::json::exception& e) {
            return {422, error_body("MalformedRequest", e.what())};
        } catch (const std::invalid_argument& e) {
            return {422, error_body("MalformedRequest", e.what())};
        }

        try {
            const auto decision = dbn::decide(dbn::posterior(net_, ev));
            return {200,
                    {{"probabilities", {{"down", decision.posterior.down}, {"up", decision.posterior.up}}},
                     {"argmax", to_string(decision.direction)},
                     {"tie", decision.tie},
                     {"model_id", id_},
                     {"query", {{"slice", ev.query.slice}, {"variable", ev.query.variable}}},
                     {"evidence_echo", echo}}};
        } catch (const Error& e) {
            return {400, error_body(to_string(e.code()), e.message())};
        }
    }

private:
    dbn::TwoSliceBn model_;
    dbn::UnrolledNetwork net_;
    std::string id_;
};

inline constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>cdbn what-if</title></head><body>"
    "<p>No UI bundle is mounted. Start the server with --ui-dir pointing at the built UI, or use "
    "<code>GET /api/schema</code> and <code>POST /api/whatif</code> directly.</p></body></html>";

/// Registers the routes on `server`. Static UI files come from `ui_dir`
/// when given.
inline void install_routes(httplib::Server& server, const WhatIfService& service, const std::string& ui_dir = "") {
    server.Get("/api/schema", [&service](const httplib::Request&, httplib::Response& res) {
        res.set_content(service.schema().dump(), "application/json");
    });
    server.Post("/api/whatif", [&service](const httplib::Request& req, httplib::Response& res) {
        auto r = service.whatif(req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    });
    if (!ui_dir.empty() && server.set_mount_point("/", ui_dir)) return;
    server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
}

} // namespace cdbn::serve
