// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "deployment.hpp"

using namespace splitauth;
using testing_support::Deployment;
namespace fs = std::filesystem;


TEST_CASE("node config files parse every field") {
    fs::path dir = fs::temp_directory_path() / "splitauth_cfg_test";
    fs::create_directories(dir);
    fs::path cfg = dir / "dealer.conf";
    {
        std::ofstream out(cfg);
        out << "role = dealer\n"
               "listen = 127.0.0.1:7300\n"
               "params = group.params   # shared setup file\n"
               "store = dealer.store\n"
               "log_sink = 127.0.0.1:7000\n"
               "t = 3\n"
               "n = 5\n"
               "service = 127.0.0.1:7200\n"
               "shareholders = 127.0.0.1:7101,127.0.0.1:7102,127.0.0.1:7103\n"
               "seed = 42\n";
    }
    NodeConfig c = NodeConfig::from_file(cfg.string());
    CHECK(c.role == "dealer");
    CHECK(c.listen == "127.0.0.1:7300");
    CHECK(c.params_path == "group.params");
    CHECK(c.t == 3);
    CHECK(c.n == 5);
    CHECK(c.service == "127.0.0.1:7200");
    CHECK(c.shareholders == std::vector<std::string>{"127.0.0.1:7101", "127.0.0.1:7102",
                                                     "127.0.0.1:7103"});
    REQUIRE(c.seed.has_value());
    CHECK(*c.seed == 42);
    fs::remove_all(dir);
}

TEST_CASE("full daemon stack: sign-up and repeated logins over TCP") {
    Deployment dep(3, 5, "e2e");
    CredentialState state;
    REQUIRE(dep.signup("alice", "pw", state).ok);
    ClientOutcome l1 = dep.login("alice", "pw", state, "in1");
    REQUIRE(l1.ok);
    ClientOutcome l2 = dep.login("alice", "pw", state, "in2");
    REQUIRE(l2.ok);
    CHECK(l1.token != l2.token);
    CHECK(dep.logger->logger()->count_code(ErrorCode::Cod700) == 0);
    // the administrator's report survives the logger store round trip
    std::string report = report_from_store(dep.logger->config().store_path);
    CHECK(report.find("=== Sharing phase ===") != std::string::npos);
}

TEST_CASE("login tolerates exactly n - t dead shareholders in every group") {
    for (auto [t, n] : {std::pair<size_t, size_t>{2, 3}, {3, 5}, {5, 7}, {10, 10}}) {
        CAPTURE(t, n);
        Deployment dep(t, n, "fault" + std::to_string(n) + std::to_string(t));
        CredentialState state;
        REQUIRE(dep.signup("bob", "pw", state).ok);

        for (size_t i = 0; i < n - t; i++) dep.holders[i]->stop();
        ClientOutcome ok = dep.login("bob", "pw", state, "in1");
        CHECK(ok.ok);

        dep.holders[n - t]->stop();
        ClientOutcome starved = dep.login("bob", "pw", state, "in2");
        CHECK_FALSE(starved.ok);
        CHECK(starved.code == ErrorCode::Cod800);
    }
}

TEST_CASE("a restarted shareholder reloads its store and serves the next login") {
    Deployment dep(3, 5, "restart");
    CredentialState state;
    REQUIRE(dep.signup("carol", "pw", state).ok);
    REQUIRE(dep.login("carol", "pw", state, "in1").ok);
    dep.restart_holder(4);
    ClientOutcome out = dep.login("carol", "pw", state, "in2");
    CHECK(out.ok);
}

TEST_CASE("a corrupt store is refused at startup") {
    Deployment dep(2, 3, "corrupt");
    CredentialState state;
    REQUIRE(dep.signup("dave", "pw", state).ok);
    std::string store_path = dep.holders[0]->config().store_path;
    dep.holders[0]->stop();
    // truncate mid-line
    std::string contents;
    {
        std::ifstream in(store_path);
        contents.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    {
        std::ofstream out(store_path, std::ios::trunc);
        out << contents.substr(0, contents.size() - 7);
    }
    NodeConfig hc = dep.holders[0]->config();
    CHECK_THROWS_AS(NodeRuntime(hc), StoreCorrupt);
}

TEST_CASE("twenty concurrent users sign up and log in without state bleed") {
    Deployment dep(3, 5, "conc");
    const int kUsers = 20;
    std::vector<std::thread> threads;
    std::atomic<int> ok_count{0};
    for (int u = 0; u < kUsers; u++) {
        threads.emplace_back([&, u] {
            TcpTransport net;
            SeededRng rng(10000 + u);
            NodeEnv env;
            env.net = &net;
            env.rng = &rng;
            env.now_ms = [] { return wall_ms(); };
            std::string user = "user" + std::to_string(u);
            CredentialState state;
            if (!client_signup(net, dep.cfg(), env, dep.params, user + "-up", user, "pw-" + user,
                               state)
                     .ok)
                return;
            if (!client_login(net, dep.cfg(), env, dep.params, user + "-in", state, "pw-" + user).ok)
                return;
            ok_count++;
        });
    }
    for (auto& th : threads) th.join();
    CHECK(ok_count == kUsers);
    // every holder carries exactly one record per user, keyed by that user
    for (auto& holder : dep.holders) {
        auto rows = holder->shareholder()->store().all("user");
        CHECK(rows.size() == kUsers);
        for (int u = 0; u < kUsers; u++) CHECK(rows.count("user" + std::to_string(u)) == 1);
    }
}

TEST_CASE("two concurrent logins for one user never interleave") {
    Deployment dep(2, 3, "serial");
    CredentialState state;
    REQUIRE(dep.signup("erin", "pw", state).ok);

    // both threads race the same pre-login state; per-user phase tracking
    // must serialize them into exactly one winner (the loser is either
    // refused while the phase is open, or starved once rotation lands)
    std::array<CredentialState, 2> states = {state, state};
    std::array<bool, 2> ok{};
    auto race = [&](int slot, uint64_t seed) {
        TcpTransport net;
        SeededRng rng(seed);
        NodeEnv env;
        env.net = &net;
        env.rng = &rng;
        env.now_ms = [] { return wall_ms(); };
        ok[slot] = client_login(net, dep.cfg(), env, dep.params, "race-" + std::to_string(slot),
                                states[slot], "pw")
                       .ok;
    };
    std::thread t1(race, 0, 31001);
    std::thread t2(race, 1, 31002);
    t1.join();
    t2.join();
    REQUIRE(static_cast<int>(ok[0]) + static_cast<int>(ok[1]) == 1);

    // the system stays consistent: the winner's rotated state logs in again
    CredentialState live = ok[0] ? states[0] : states[1];
    ClientOutcome out = dep.login("erin", "pw", live, "race-final");
    CHECK(out.ok);
}
