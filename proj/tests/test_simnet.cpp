// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "splitauth/simnet.hpp"

using namespace splitauth;

namespace {

const GroupParams& test_params() {
    static GroupParams params = [] {
        SeededRng rng(4242);
        return generate_params(96, 64, rng);
    }();
    return params;
}

ScenarioOptions base_options(FaultPlan plan = {}, size_t t = 3, size_t n = 5) {
    ScenarioOptions o;
    o.params = test_params();
    o.t = t;
    o.n = n;
    o.plan = std::move(plan);
    return o;
}

const std::vector<Action> kSignupLogin = {{"signup", "alice", "sesame", 1},
                                          {"login", "alice", "sesame", 1}};

}  // namespace

TEST_CASE("honest signup and login over the simnet") {
    ScenarioResult r = run_scenario(base_options(), kSignupLogin);
    CHECK(r.outcome == "success");
    REQUIRE(r.actions.size() == 2);
    CHECK_FALSE(r.actions[1].token.empty());
    for (const auto& rec : r.logs) CHECK_FALSE(rec.code.has_value());
}

TEST_CASE("identical plan and seed give byte-identical traces") {
    FaultPlan plan;
    plan.seed = 31337;
    plan.nodes[holder_addr(1)] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
    ScenarioResult a = run_scenario(base_options(plan), kSignupLogin);
    ScenarioResult b = run_scenario(base_options(plan), kSignupLogin);
    CHECK(a.trace_digest == b.trace_digest);
    CHECK(a.trace.size() == b.trace.size());

    FaultPlan other = plan;
    other.seed = 31338;
    ScenarioResult c = run_scenario(base_options(other), kSignupLogin);
    CHECK(a.trace_digest != c.trace_digest);
}

TEST_CASE("the sharing trace shows the figure's eight exchanges in order") {
    ScenarioResult r = run_scenario(base_options(), {{"signup", "alice", "sesame", 1}});
    REQUIRE(r.outcome == "success");
    std::vector<std::string> events;
    for (const auto& rec : r.logs)
        if (rec.phase == "sharing") events.push_back(rec.event);
    CHECK(events == std::vector<std::string>{"mc_received", "mc_forwarded", "mc_stored",
                                             "signup_acked", "ms_requested", "ms_issued",
                                             "deal_started", "shares_distributed"});
}

TEST_CASE("one tampering shareholder is survivable and logged") {
    FaultPlan plan;
    plan.nodes[holder_addr(2)] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "success");
    CHECK(r.count_code(ErrorCode::Cod830) == 1);
    CHECK_FALSE(r.actions[1].token.empty());
}

TEST_CASE("tampering beyond n-t kills the reconstruction") {
    FaultPlan plan;
    for (size_t i = 0; i < 3; i++)
        plan.nodes[holder_addr(i)] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "COD850");
    CHECK(r.actions[1].code == ErrorCode::Cod850);
}

TEST_CASE("tampered blinding values are caught exactly like tampered shares") {
    FaultPlan plan;
    plan.nodes[holder_addr(0)] = {NodeBehavior::Byzantine, ByzStrategy::TamperTval, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "success");
    CHECK(r.count_code(ErrorCode::Cod830) == 1);
}

TEST_CASE("a dealer probing with perturbed abscissae triggers the digest alarms") {
    FaultPlan plan;
    plan.nodes["dealer"] = {NodeBehavior::Byzantine, ByzStrategy::WrongAbscissaProbe, "",
                            "reconstruction"};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "COD800");  // every holder withheld its share
    CHECK(r.count_code(ErrorCode::Cod700) >= 5);
}

TEST_CASE("an inconsistent dealing surfaces as the holder's own check failing") {
    FaultPlan plan;
    plan.nodes["dealer"] = {NodeBehavior::Byzantine, ByzStrategy::InconsistentDealing, "",
                            "sharing"};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    // one holder withholds with COD750 (and the dealer echoes it); the other
    // four carry the login
    CHECK(r.outcome == "success");
    CHECK(r.count_code(ErrorCode::Cod750) == 2);
}

TEST_CASE("a forged login envelope is caught by the service's byte comparison") {
    FaultPlan plan;
    plan.nodes["dealer"] = {NodeBehavior::Byzantine, ByzStrategy::ForgeEms, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "COD2400");
    CHECK(r.actions[1].code == ErrorCode::Cod2400);
}

TEST_CASE("a wrong service key is caught by the client") {
    FaultPlan plan;
    plan.nodes["service"] = {NodeBehavior::Byzantine, ByzStrategy::WrongKprime, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    CHECK(r.outcome == "COD2000");
    CHECK(r.actions[1].code == ErrorCode::Cod2000);
    CHECK(r.actions[1].token.empty());
}

TEST_CASE("report lies hit the dealer's final triple, and nothing rotates") {
    auto run_with_lie = [&](const std::string& field) {
        FaultPlan plan;
        plan.nodes["service"] = {NodeBehavior::Byzantine, ByzStrategy::LieInReport, field, ""};
        // two logins: the second still reconstructs against the *old* shares,
        // proving the first lie blocked the rotation install
        return run_scenario(base_options(plan), {{"signup", "alice", "sesame", 1},
                                                 {"login", "alice", "sesame", 1},
                                                 {"login", "alice", "sesame", 1}});
    };

    ScenarioResult kp = run_with_lie("k_prime");
    CHECK(kp.actions[1].code == ErrorCode::Cod2000);
    CHECK(kp.actions[2].code == ErrorCode::Cod2000);  // reached the report again

    ScenarioResult k = run_with_lie("k");
    CHECK(k.actions[1].code == ErrorCode::Cod2400);
    CHECK(k.actions[2].code == ErrorCode::Cod2400);

    ScenarioResult mc = run_with_lie("mc_prime");
    CHECK(mc.actions[1].code == ErrorCode::Cod2600);
    CHECK(mc.actions[2].code == ErrorCode::Cod2600);
}

TEST_CASE("wrong password and wrong coordinates fail as classified") {
    FaultPlan pw_plan;
    pw_plan.nodes["client"] = {NodeBehavior::Byzantine, ByzStrategy::WrongPasswordClient, "", ""};
    ScenarioResult pw = run_scenario(base_options(pw_plan), kSignupLogin);
    CHECK(pw.outcome == "COD860");
    CHECK(pw.actions[1].token.empty());
    CHECK_FALSE(pw.actions[1].client_knew_password);

    FaultPlan xs_plan;
    xs_plan.nodes["client"] = {NodeBehavior::Byzantine, ByzStrategy::WrongCoordinatesClient, "", ""};
    ScenarioResult xs = run_scenario(base_options(xs_plan), kSignupLogin);
    CHECK(xs.outcome == "COD800");
    CHECK(xs.count_code(ErrorCode::Cod700) >= 5);
}

TEST_CASE("registration edge scenarios produce their codes") {
    // duplicate registration
    ScenarioResult dup = run_scenario(base_options(), {{"signup", "alice", "pw", 1},
                                                       {"signup", "alice", "pw", 1}});
    CHECK(dup.actions[1].code == ErrorCode::Cod100);

    // dealer lost its store; the service still knows the user
    ScenarioResult wiped = run_scenario(base_options(), {{"signup", "alice", "pw", 1},
                                                         {"wipe_dealer_users", "", "", 1},
                                                         {"signup", "alice", "pw", 1}});
    CHECK(wiped.actions[2].code == ErrorCode::Cod150);

    // client runs ahead of the dealer
    ScenarioResult early = run_scenario(base_options(), {{"early_ms", "bob", "pw", 1}});
    CHECK(early.actions[0].code == ErrorCode::Cod170);

    // client swaps in a different MC toward the service
    ScenarioResult mismatch = run_scenario(base_options(), {{"mismatched_mc", "carol", "pw", 1}});
    CHECK(mismatch.actions[0].code == ErrorCode::Cod400);

    // login without registration
    ScenarioResult cold = run_scenario(base_options(), {{"login", "dana", "pw", 1}});
    CHECK(cold.actions[0].code == ErrorCode::Cod600);
}

TEST_CASE("a probing storm locks shareholders down and starves the next login") {
    ScenarioResult r = run_scenario(base_options(), {{"signup", "alice", "pw", 1},
                                                     {"probe", "alice", "", 4},
                                                     {"login", "alice", "pw", 1}});
    // 3 wrong digests per holder lock it; the 4th round is refused silently
    CHECK(r.count_code(ErrorCode::Cod700) == 3 * 5);
    size_t lockouts = 0;
    for (const auto& rec : r.logs)
        if (rec.event == "suspicion_lockout") lockouts++;
    CHECK(lockouts == 5);
    CHECK(r.actions[2].code == ErrorCode::Cod800);  // shares withheld during cool-off
}

TEST_CASE("replaying the previous login request is rejected after rotation") {
    ScenarioResult r = run_scenario(base_options(), {{"signup", "alice", "pw", 1},
                                                     {"login", "alice", "pw", 1},
                                                     {"replay_login", "alice", "", 1}});
    CHECK(r.actions[1].ok);
    CHECK_FALSE(r.actions[2].ok);
    CHECK(r.actions[2].code == ErrorCode::Cod800);
    // the holders themselves flagged the stale abscissae
    CHECK(r.count_code(ErrorCode::Cod700) >= 5);
}

TEST_CASE("an honest full run leaks no password bytes anywhere") {
    // every node passive: the observed set covers the entire wire and all
    // stores, so this is the global no-plaintext-password audit
    FaultPlan plan;
    for (const char* node : {"dealer", "service"})
        plan.nodes[node] = {NodeBehavior::Passive, ByzStrategy::None, "", ""};
    for (size_t i = 0; i < 5; i++)
        plan.nodes[holder_addr(i)] = {NodeBehavior::Passive, ByzStrategy::None, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    REQUIRE(r.outcome == "success");
    LeakageReport audit = assert_information_leakage(r, "sesame", test_params());
    CAPTURE(audit.findings);
    CHECK(audit.passed);
}

TEST_CASE("the commitment broadcast delivers identical bytes to every holder") {
    ScenarioResult r = run_scenario(base_options(), {{"signup", "alice", "pw", 1}});
    REQUIRE(r.outcome == "success");
    std::vector<Bytes> broadcasts;
    for (const auto& e : r.trace) {
        Message m = Message::parse(e.request);
        if (m.type == msg::kCommitBroadcast) broadcasts.push_back(e.request);
    }
    REQUIRE(broadcasts.size() == 5);
    for (const auto& b : broadcasts) CHECK(b == broadcasts.front());
}

TEST_CASE("the disclosure report carries this session's values") {
    ScenarioResult r = run_scenario(base_options(), kSignupLogin);
    REQUIRE(r.outcome == "success");
    std::optional<Message> login_req, report, ms_issued;
    for (const auto& e : r.trace) {
        Message m = Message::parse(e.request);
        if (m.type == msg::kLoginRequest) login_req = m;
        if (m.type == msg::kReport) report = m;
        if (!e.timed_out) {
            Message resp = Message::parse(e.response);
            if (resp.type == msg::kMsIssued) ms_issued = resp;
        }
    }
    REQUIRE(login_req.has_value());
    REQUIRE(report.has_value());
    REQUIRE(ms_issued.has_value());
    // the MC' the service reports is the one the client sent the dealer, and
    // the MS it discloses is the one it issued at sign-up
    CHECK(report->payload.at("mc_prime") == login_req->payload.at("mc_prime"));
    CHECK(report->payload.at("ms") == ms_issued->payload.at("ms"));
}

TEST_CASE("fault tolerance boundary sits exactly at n - t") {
    for (auto [t, n] : {std::pair<size_t, size_t>{2, 3}, {3, 5}}) {
        auto rows = fault_tolerance_sweep(test_params(), t, n, 7);
        REQUIRE(rows.size() == n + 1);
        for (const auto& row : rows) {
            CAPTURE(t, n, row.holders_down);
            CHECK(row.success == (row.holders_down <= n - t));
            if (!row.success) CHECK(row.outcome == "COD800");
        }
    }
}

TEST_CASE("down shareholders during sign-up abort the registration cleanly") {
    FaultPlan plan;
    plan.nodes[holder_addr(4)] = {NodeBehavior::Down, ByzStrategy::None, "", "sharing"};
    ScenarioResult r = run_scenario(base_options(plan), {{"signup", "alice", "pw", 1}});
    CHECK_FALSE(r.actions[0].ok);
    // no partial dealing: nothing retained for the user anywhere
    for (size_t i = 0; i < 4; i++)
        CHECK(r.stores[holder_addr(i)].find("alice") == std::string::npos);
}

TEST_CASE("passive observers never see the password, its scalar, or g^S") {
    for (const char* node : {"dealer", "service"}) {
        FaultPlan plan;
        plan.nodes[node] = {NodeBehavior::Passive, ByzStrategy::None, "", ""};
        ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
        REQUIRE(r.outcome == "success");
        REQUIRE(r.observed.count(node) == 1);
        CHECK_FALSE(r.observed[node].empty());
        LeakageReport audit = assert_information_leakage(r, "sesame", test_params());
        CAPTURE(node, audit.findings);
        CHECK(audit.passed);
    }

    FaultPlan coalition;
    for (size_t i = 0; i < 5; i++)
        coalition.nodes[holder_addr(i)] = {NodeBehavior::Passive, ByzStrategy::None, "", ""};
    ScenarioResult r = run_scenario(base_options(coalition), kSignupLogin);
    REQUIRE(r.outcome == "success");
    LeakageReport audit = assert_information_leakage(r, "sesame", test_params());
    CAPTURE(audit.findings);
    CHECK(audit.passed);
}

TEST_CASE("the leakage audit actually bites on planted leaks") {
    FaultPlan plan;
    plan.nodes["dealer"] = {NodeBehavior::Passive, ByzStrategy::None, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    REQUIRE(r.outcome == "success");
    // plant the password scalar into an observed message and into the store
    mpz_class scalar = password_to_scalar("sesame", test_params().q);
    Message leak;
    leak.type = "debug";
    leak.session_id = "x";
    leak.username = "alice";
    leak.payload["oops"] = to_hex(scalar);
    r.observed["dealer"].push_back(leak.canonical_bytes());
    LeakageReport audit = assert_information_leakage(r, "sesame", test_params());
    CHECK_FALSE(audit.passed);
}

TEST_CASE("fault plans reject strategies on roles that cannot express them") {
    FaultPlan bad;
    bad.nodes["dealer"] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
    CHECK_THROWS_AS(run_scenario(base_options(bad), kSignupLogin), std::invalid_argument);

    FaultPlan bad2;
    bad2.nodes[holder_addr(0)] = {NodeBehavior::Byzantine, ByzStrategy::LieInReport, "", ""};
    CHECK_THROWS_AS(run_scenario(base_options(bad2), kSignupLogin), std::invalid_argument);

    FaultPlan fine;
    fine.nodes[holder_addr(0)] = {NodeBehavior::Down, ByzStrategy::None, "", "reconstruction"};
    CHECK_NOTHROW(run_scenario(base_options(fine), kSignupLogin));
}

TEST_CASE("scenario files parse into plans and scripts") {
    Json doc = Json::parse(R"({
        "t": 2, "n": 3, "seed": 9, "p_bits": 96, "q_bits": 64,
        "faults": {
            "service": {"behavior": "byzantine", "strategy": "lie-in-report", "param": "k"},
            "shareholder1": {"behavior": "down", "phase": "reconstruction"}
        },
        "script": [
            {"action": "signup", "username": "a", "password": "p"},
            {"action": "probe", "username": "a", "count": 2}
        ]
    })");
    ScenarioFile f = parse_scenario_file(doc);
    CHECK(f.t == 2);
    CHECK(f.n == 3);
    CHECK(f.plan.seed == 9);
    CHECK(f.plan.spec_for("service").strategy == ByzStrategy::LieInReport);
    CHECK(f.plan.spec_for("service").param == "k");
    CHECK(f.plan.spec_for(holder_addr(1)).behavior == NodeBehavior::Down);
    CHECK(f.plan.spec_for(holder_addr(1)).phase == "reconstruction");
    REQUIRE(f.script.size() == 2);
    CHECK(f.script[1].count == 2);

    CHECK_THROWS_AS(parse_scenario_file(Json::parse(
                        R"({"faults":{"x":{"behavior":"weird"}},"script":[]})")),
                    std::invalid_argument);
}

TEST_CASE("small-field replicas behave as the privacy argument says") {
    CHECK(replica_subthreshold_uniform(3, 2));
    CHECK(replica_subthreshold_uniform(3, 1));
    CHECK(replica_no_abscissae_uniform(2));
    CHECK(replica_no_abscissae_uniform(1));
}

TEST_CASE("virtual-time budget turns a stuck scenario into a hang outcome") {
    FaultPlan plan;
    plan.nodes["service"] = {NodeBehavior::Down, ByzStrategy::None, "", ""};
    ScenarioOptions o = base_options(plan);
    o.hang_budget_ms = 100;  // one service timeout already exceeds this
    ScenarioResult r = run_scenario(o, {{"signup", "a", "pw", 1}, {"signup", "b", "pw", 1}});
    CHECK(r.outcome == "hang");
    CHECK(r.actions.size() == 1);
}

TEST_CASE("no byzantine single-actor plan yields a token without the password") {
    std::vector<FaultPlan> plans;
    for (ByzStrategy s : {ByzStrategy::WrongAbscissaProbe, ByzStrategy::InconsistentDealing,
                          ByzStrategy::ForgeEms}) {
        FaultPlan p;
        p.nodes["dealer"] = {NodeBehavior::Byzantine, s, "", ""};
        plans.push_back(p);
    }
    for (ByzStrategy s : {ByzStrategy::WrongKprime, ByzStrategy::LieInReport}) {
        FaultPlan p;
        p.nodes["service"] = {NodeBehavior::Byzantine, s, "", ""};
        plans.push_back(p);
    }
    for (size_t i = 0; i < 5; i++) {
        FaultPlan p;
        p.nodes[holder_addr(i)] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
        plans.push_back(p);
    }
    {
        FaultPlan p;
        p.nodes["client"] = {NodeBehavior::Byzantine, ByzStrategy::WrongPasswordClient, "", ""};
        plans.push_back(p);
    }

    for (size_t i = 0; i < plans.size(); i++) {
        ScenarioResult r = run_scenario(base_options(plans[i]), kSignupLogin);
        for (const auto& ar : r.actions) {
            CAPTURE(i, ar.type);
            if (!ar.token.empty()) CHECK(ar.client_knew_password);
        }
    }
}

TEST_CASE("backup-mode service still completes the whole protocol") {
    ScenarioOptions o = base_options();
    o.service_backup = true;
    ScenarioResult r = run_scenario(o, {{"signup", "alice", "pw", 1},
                                        {"login", "alice", "pw", 1},
                                        {"login", "alice", "pw", 1}});
    CHECK(r.outcome == "success");
    CHECK(r.stores["service"].find("kprime_backup") != std::string::npos);
}

TEST_CASE("logger report groups phases and summarizes errors") {
    FaultPlan plan;
    plan.nodes[holder_addr(0)] = {NodeBehavior::Byzantine, ByzStrategy::TamperShare, "", ""};
    ScenarioResult r = run_scenario(base_options(plan), kSignupLogin);
    std::string report = logger_report(r.logs);
    CHECK(report.find("=== Sharing phase ===") != std::string::npos);
    CHECK(report.find("=== Reconstruction phase ===") != std::string::npos);
    CHECK(report.find("COD830 x1 (non-fatal)") != std::string::npos);

    CHECK(logger_report({}).empty());
}
