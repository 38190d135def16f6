// SPDX-License-Identifier: Apache-2.0
//
// Byzantine-simulation harness: run declarative scenarios over the simnet,
// sweep the fault-tolerance boundary, profile phase timings, and generate
// group parameter files.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "splitauth/simnet.hpp"

using namespace splitauth;

namespace {

GroupParams params_for(const std::string& params_path, unsigned p_bits, unsigned q_bits,
                       uint64_t seed) {
    if (!params_path.empty()) {
        GroupParams p = load_params(params_path);
        if (!validate_params(p)) throw std::runtime_error("invalid group parameters");
        return p;
    }
    SeededRng rng(seed ^ 0x5eedf11e);
    return generate_params(p_bits, q_bits, rng);
}

std::vector<size_t> parse_levels(const std::string& spec) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos != std::string::npos) {
        size_t comma = spec.find(',', pos);
        out.push_back(std::stoul(spec.substr(pos, comma == std::string::npos ? comma : comma - pos)));
        pos = comma == std::string::npos ? comma : comma + 1;
    }
    return out;
}

std::ostream& open_csv(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    return file;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitauth byzantine-fault harness"};
    app.require_subcommand(1);

    std::string scenario_path, params_path, csv_path, levels_spec = "1,11,21,31,41";
    unsigned p_bits = 96, q_bits = 64;
    size_t t = 3, n = 5, sessions = 3;
    uint64_t seed = 1;
    bool show_report = false, show_trace = false;

    auto* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--params", params_path, "group parameter file (overrides scenario sizing)");
    run->add_flag("--report", show_report, "print the logger report");
    run->add_flag("--trace", show_trace, "print the message-trace digest");

    auto* sweep = app.add_subcommand("sweep", "fault-tolerance boundary: k holders down, k = 0..n");
    sweep->add_option("--t", t, "threshold")->required();
    sweep->add_option("--n", n, "shareholder count")->required();
    sweep->add_option("--params", params_path, "group parameter file");
    sweep->add_option("--p-bits", p_bits, "generated p width when no params file");
    sweep->add_option("--q-bits", q_bits, "generated q width when no params file");
    sweep->add_option("--seed", seed, "scenario seed");
    sweep->add_option("--csv", csv_path, "write CSV here instead of stdout");

    auto* timing = app.add_subcommand("timing", "wall-clock phase latencies under concurrency");
    timing->add_option("--t", t, "threshold");
    timing->add_option("--n", n, "shareholder count");
    timing->add_option("--params", params_path, "group parameter file");
    timing->add_option("--p-bits", p_bits, "generated p width when no params file");
    timing->add_option("--q-bits", q_bits, "generated q width when no params file");
    timing->add_option("--levels", levels_spec, "comma-separated concurrency levels");
    timing->add_option("--sessions", sessions, "sessions per client thread");
    timing->add_option("--seed", seed, "rng seed");
    timing->add_option("--csv", csv_path, "write CSV here instead of stdout");

    auto* gen = app.add_subcommand("gen-params", "generate a group parameter file");
    std::string out_path = "group.params";
    gen->add_option("--p-bits", p_bits, "prime modulus width")->required();
    gen->add_option("--q-bits", q_bits, "subgroup order width")->required();
    gen->add_option("--out", out_path, "output file");
    gen->add_option("--seed", seed, "deterministic seed (omit for system entropy)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::ifstream in(scenario_path);
            if (!in) throw std::runtime_error("cannot read scenario: " + scenario_path);
            ScenarioFile file = parse_scenario_file(Json::parse(in));
            ScenarioOptions options;
            std::string effective_params = !params_path.empty() ? params_path : file.params_path;
            options.params = params_for(effective_params, file.p_bits, file.q_bits, file.seed);
            options.t = file.t;
            options.n = file.n;
            options.plan = file.plan;
            options.service_backup = file.service_backup;
            ScenarioResult result = run_scenario(options, file.script);

            std::cout << "outcome: " << result.outcome << "\n";
            for (size_t i = 0; i < result.actions.size(); i++) {
                const auto& a = result.actions[i];
                std::cout << "  " << i + 1 << ". " << a.type;
                if (!a.username.empty()) std::cout << " " << a.username;
                std::cout << " -> " << (a.ok ? "ok" : "failed");
                if (a.code) std::cout << " " << error_code_name(*a.code);
                if (!a.detail.empty()) std::cout << " (" << a.detail << ")";
                if (!a.token.empty()) std::cout << " token=" << a.token;
                std::cout << "\n";
            }
            std::map<std::string, size_t> code_counts;
            for (const auto& rec : result.logs)
                if (rec.code) code_counts[error_code_name(*rec.code)]++;
            if (!code_counts.empty()) {
                std::cout << "errors logged:";
                for (const auto& [name, count] : code_counts)
                    std::cout << " " << name << "x" << count;
                std::cout << "\n";
            }
            if (show_trace) std::cout << "trace digest: " << result.trace_digest << "\n";
            if (show_report) std::cout << logger_report(result.logs);
            return result.outcome == "success" ? 0 : 1;
        }

        if (sweep->parsed()) {
            GroupParams params = params_for(params_path, p_bits, q_bits, seed);
            auto rows = fault_tolerance_sweep(params, t, n, seed);
            std::ofstream file;
            std::ostream& out = open_csv(file, csv_path);
            out << "holders_down,login_succeeds,outcome\n";
            for (const auto& row : rows)
                out << row.holders_down << "," << (row.success ? 1 : 0) << "," << row.outcome
                    << "\n";
            return 0;
        }

        if (timing->parsed()) {
            GroupParams params = params_for(params_path, p_bits, q_bits, seed);
            auto points = timing_profile(params, t, n, parse_levels(levels_spec), sessions, seed);
            std::ofstream file;
            std::ostream& out = open_csv(file, csv_path);
            out << "concurrency,sharing_mean_ms,reconstruction_mean_ms\n";
            for (const auto& pt : points)
                out << pt.concurrency << "," << pt.sharing_mean_ms << ","
                    << pt.reconstruction_mean_ms << "\n";
            return 0;
        }

        if (gen->parsed()) {
            GroupParams params;
            if (gen->count("--seed") > 0) {
                SeededRng rng(seed);
                params = generate_params(p_bits, q_bits, rng);
            } else {
                SystemRng rng;
                params = generate_params(p_bits, q_bits, rng);
            }
            save_params(params, out_path);
            std::cout << "wrote " << out_path << " (p " << bit_length(params.p) << " bits, q "
                      << bit_length(params.q) << " bits)\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
