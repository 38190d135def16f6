// SPDX-License-Identifier: Apache-2.0
//
// Long-running node daemon: dealer, shareholder, service, or logger.
// `--report` prints the administrator's report from a logger store instead
// of serving.

#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "splitauth/node.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitauth node daemon"};
    std::string config_path, role, listen, params, store, log_sink, service, dealer, shareholders;
    uint64_t seed = 0;
    size_t t = 0, n = 0;
    bool have_seed = false, report = false, backup_keys = false;

    app.add_option("--config", config_path, "node config file (flat key=value)");
    app.add_option("--role", role, "dealer | shareholder | service | logger");
    app.add_option("--listen", listen, "listen address host:port");
    app.add_option("--params", params, "group parameter file");
    app.add_option("--store", store, "store file path");
    app.add_option("--log-sink", log_sink, "logger address host:port");
    app.add_option("--t", t, "threshold");
    app.add_option("--n", n, "shareholder count");
    app.add_option("--shareholders", shareholders, "comma-separated shareholder addresses (dealer)");
    app.add_option("--service", service, "service address (dealer)");
    app.add_option("--dealer", dealer, "dealer address (service)");
    app.add_flag("--backup-keys", backup_keys, "service keeps k' via the share sub-protocol");
    auto* seed_opt = app.add_option("--seed", seed, "deterministic rng seed (test mode)");
    app.add_flag("--report", report, "print the report from a logger store and exit");

    CLI11_PARSE(app, argc, argv);
    have_seed = seed_opt->count() > 0;

    try {
        if (report) {
            if (store.empty()) {
                std::cerr << "--report needs --store\n";
                return 2;
            }
            std::cout << splitauth::report_from_store(store);
            return 0;
        }

        splitauth::NodeConfig config;
        if (!config_path.empty()) config = splitauth::NodeConfig::from_file(config_path);
        if (!role.empty()) config.role = role;
        if (!listen.empty()) config.listen = listen;
        if (!params.empty()) config.params_path = params;
        if (!store.empty()) config.store_path = store;
        if (!log_sink.empty()) config.log_sink = log_sink;
        if (t) config.t = t;
        if (n) config.n = n;
        if (!service.empty()) config.service = service;
        if (!dealer.empty()) config.dealer = dealer;
        if (have_seed) config.seed = seed;
        if (backup_keys) config.backup_keys = true;
        if (!shareholders.empty()) {
            config.shareholders.clear();
            size_t pos = 0;
            while (pos != std::string::npos) {
                size_t comma = shareholders.find(',', pos);
                config.shareholders.push_back(
                    shareholders.substr(pos, comma == std::string::npos ? comma : comma - pos));
                pos = comma == std::string::npos ? comma : comma + 1;
            }
        }
        if (config.role.empty()) {
            std::cerr << "missing --role (or role= in config)\n";
            return 2;
        }

        splitauth::NodeRuntime node(config);
        node.start();
        std::cout << config.role << " listening on " << node.address() << std::endl;

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) {
            timespec ts{0, 200 * 1000 * 1000};
            nanosleep(&ts, nullptr);
        }
        std::cout << "shutting down\n";
        node.stop();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return 1;
    }
}
