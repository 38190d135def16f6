// SPDX-License-Identifier: Apache-2.0
//
// Command-line client: sign-up, login, and credential-state import/export.
// The state file is the single-device credential store; the password is
// prompted (or read from an env var in test setups) and never persisted.

#include <termios.h>
#include <unistd.h>

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "splitauth/node.hpp"
#include "splitauth/statefile.hpp"

using namespace splitauth;
namespace fs = std::filesystem;

namespace {

std::string prompt_password(const std::string& password_env) {
    if (!password_env.empty()) {
        const char* v = std::getenv(password_env.c_str());
        if (!v || !*v) throw std::runtime_error("password env var is empty: " + password_env);
        return v;
    }
    std::cerr << "password: " << std::flush;
    termios before{};
    bool tty = tcgetattr(STDIN_FILENO, &before) == 0;
    if (tty) {
        termios silent = before;
        silent.c_lflag &= ~static_cast<tcflag_t>(ECHO);
        tcsetattr(STDIN_FILENO, TCSANOW, &silent);
    }
    std::string password;
    std::getline(std::cin, password);
    if (tty) {
        tcsetattr(STDIN_FILENO, TCSANOW, &before);
        std::cerr << "\n";
    }
    if (password.empty()) throw std::runtime_error("empty password");
    return password;
}

int exit_for(const ClientOutcome& out) {
    if (out.ok) return 0;
    if (out.code) return 10 + error_code_number(*out.code) / 100;
    return 1;
}

std::string session_id(RandomSource& rng) { return hex_encode(rng.bytes(8)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitauth client"};
    app.require_subcommand(1);

    std::string dealer, service, state_path, username, params_path, password_env, blob_path;
    bool move_state = false;

    auto add_common = [&](CLI::App* cmd, bool network) {
        cmd->add_option("--state", state_path, "credential state file")->required();
        if (network) {
            cmd->add_option("--dealer", dealer, "dealer address host:port")->required();
            cmd->add_option("--service", service, "service address host:port")->required();
            cmd->add_option("--username", username, "account name")->required();
            cmd->add_option("--params", params_path, "group parameter file")->required();
            cmd->add_option("--password-env", password_env,
                            "read the password from this env var (tests only)");
        }
    };

    auto* signup = app.add_subcommand("signup", "register and receive the first credential state");
    add_common(signup, true);
    auto* login = app.add_subcommand("login", "authenticate and rotate the credential state");
    add_common(login, true);
    auto* exp = app.add_subcommand("export-state", "write the state blob to a portable location");
    add_common(exp, false);
    exp->add_option("path", blob_path, "destination")->required();
    exp->add_flag("--move", move_state, "delete the original after export");
    auto* imp = app.add_subcommand("import-state", "install a previously exported state blob");
    add_common(imp, false);
    imp->add_option("path", blob_path, "source blob")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (signup->parsed()) {
            if (fs::exists(state_path)) {
                std::cerr << "state file already exists: " << state_path << "\n";
                return 1;
            }
            StateLock lock(state_path);
            std::string password = prompt_password(password_env);
            GroupParams params = load_params(params_path);
            if (!validate_params(params)) throw std::runtime_error("invalid group parameters");
            TcpTransport net;
            SystemRng rng;
            NodeEnv env;
            env.net = &net;
            env.rng = &rng;
            env.now_ms = [] { return wall_ms(); };
            CredentialState state;
            ClientOutcome out = client_signup(net, {dealer, service, 3}, env, params,
                                              session_id(rng), username, password, state);
            if (!out.ok) {
                std::cerr << "sign-up failed: " << out.detail << "\n";
                return exit_for(out);
            }
            save_credential_state(state_path, state);
            std::cerr << "registered " << username << "; state written to " << state_path << "\n";
            return 0;
        }

        if (login->parsed()) {
            StateLock lock(state_path);
            CredentialState state = load_credential_state(state_path);
            if (state.username != username)
                throw std::runtime_error("state file belongs to " + state.username);
            std::string password = prompt_password(password_env);
            GroupParams params = load_params(params_path);
            if (!validate_params(params)) throw std::runtime_error("invalid group parameters");
            TcpTransport net;
            SystemRng rng;
            NodeEnv env;
            env.net = &net;
            env.rng = &rng;
            env.now_ms = [] { return wall_ms(); };
            ClientOutcome out = client_login(net, {dealer, service, 3}, env, params,
                                             session_id(rng), state, password);
            if (!out.ok) {
                std::cerr << "login failed: " << out.detail << "\n";
                return exit_for(out);  // state untouched
            }
            save_credential_state(state_path, state);
            std::cout << out.token << std::endl;
            return 0;
        }

        if (exp->parsed()) {
            StateLock lock(state_path);
            CredentialState state = load_credential_state(state_path);  // validates
            save_credential_state(blob_path, state);
            if (move_state) fs::remove(state_path);
            std::cerr << "state exported to " << blob_path << (move_state ? " (moved)" : "") << "\n";
            return 0;
        }

        if (imp->parsed()) {
            CredentialState state = load_credential_state(blob_path);  // validates structure
            StateLock lock(state_path);
            save_credential_state(state_path, state);
            std::cerr << "state for " << state.username << " installed at " << state_path << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
