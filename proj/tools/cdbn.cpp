#include "cdbn/cli.hpp"
#include "cdbn/serve.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace cdbn;

    CLI::App app{"Next-day crypto direction prediction with dynamic Bayesian networks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value file; flags override it");
    app.allow_config_extras(false);

    cli::RunConfig cfg;
    std::string groups = "1,2,3,4";
    std::string arima_grid, svr_grid;
    std::uint64_t seed = 0;
    std::optional<std::string> tweets;

    app.add_option("--coin", cfg.coin.name, "Coin name used in reports")->default_val("coin");
    app.add_option("--ohlcv", cfg.coin.ohlcv_path, "OHLCV CSV (date,open,high,low,close,volume)");
    app.add_option("--macro", cfg.coin.macro_paths, "Macro CSV; repeat for several files");
    app.add_option("--tweets", tweets, "Daily tweet-count CSV (date,tweet_count)");
    app.add_option("--groups", groups, "Feature groups to backtest, e.g. 1,3")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "Structure-search seed (falls back to DBN_SEED, then 0)");
    app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
    app.add_option("--t-slices", cfg.backtest.slices, "Slices in the unrolled network")->capture_default_str();
    app.add_option("--train-fraction", cfg.backtest.train_fraction, "Chronological training share")->capture_default_str();
    app.add_option("--max-parents", cfg.backtest.max_parents, "Parent limit per node")->capture_default_str();
    app.add_option("--restarts", cfg.backtest.restarts, "Hill-climbing restarts")->capture_default_str();
    app.add_option("--alpha", cfg.backtest.alpha, "Laplace smoothing pseudo-count")->capture_default_str();
    app.add_option("--arima-grid", arima_grid, "ARIMA grid override, e.g. \"p:0,1;d:1;q:0,1\"");
    app.add_option("--svr-grid", svr_grid, "SVR grid override, e.g. \"c:1,10;eps:0.01;gamma:0.1\"");

    auto* train = app.add_subcommand("train", "Learn one feature group's model and write model_g<k>.json");
    train->fallthrough();
    int group = 1;
    train->add_option("--group", group, "Feature group 1..4")->capture_default_str();

    auto* backtest = app.add_subcommand("backtest", "Run the train/test protocol and write report.json/report.txt");
    backtest->fallthrough();

    auto* whatif = app.add_subcommand("whatif", "Posterior of the final-day target under evidence");
    std::string model_path, evidence;
    whatif->add_option("--model", model_path, "Model JSON")->required();
    whatif->add_option("--evidence", evidence, "Comma-separated slice:variable=Up|Down items");

    auto* serve = app.add_subcommand("serve", "HTTP what-if service");
    int port = 8080;
    std::string host = "127.0.0.1", ui_dir;
    serve->add_option("--model", model_path, "Model JSON")->required();
    serve->add_option("--port", port, "Listen port")->capture_default_str();
    serve->add_option("--host", host, "Listen address")->capture_default_str();
    serve->add_option("--ui-dir", ui_dir, "Directory with built UI assets served at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? cli::kExitOk : cli::kExitUsage;
    }

    try {
        if (seed_opt->count() == 0) seed = cli::seed_from_env().value_or(0);
        cfg.backtest.seed = seed;
        cfg.coin.tweets_path = tweets;
        cfg.backtest.groups = cli::parse_groups(groups);
        if (!arima_grid.empty()) cfg.backtest.baseline_config.arima_grid = cli::parse_arima_grid(arima_grid);
        if (!svr_grid.empty()) cfg.backtest.baseline_config.svr_grid = cli::parse_svr_grid(svr_grid);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    }

    const bool needs_data = train->parsed() || backtest->parsed();
    if (needs_data && cfg.coin.ohlcv_path.empty()) {
        std::cerr << "error: --ohlcv is required for " << (train->parsed() ? "train" : "backtest") << "\n";
        return cli::kExitUsage;
    }

    if (train->parsed()) return cli::cmd_train(cfg, group, std::cout, std::cerr);
    if (backtest->parsed()) return cli::cmd_backtest(cfg, std::cout, std::cerr);
    if (whatif->parsed()) return cli::cmd_whatif(model_path, evidence, std::cout, std::cerr);

    try {
        const auto bytes = cli::read_file(model_path);
        auto j = nlohmann::json::parse(bytes, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::BadModel, "model file " + model_path + " is not valid JSON");
        serve::WhatIfService service(dbn::model_from_json(j), serve::model_id(bytes));
        httplib::Server server;
        serve::install_routes(server, service, ui_dir);
        std::cerr << "serving model " << service.id() << " on http://" << host << ":" << port << "\n";
        if (!server.listen(host, port)) {
            std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
            return cli::kExitUsage;
        }
        return cli::kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code_for(e);
    }
}
