// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "splitauth/simnet.hpp"
#include "splitauth/statefile.hpp"

using namespace splitauth;

namespace {

// Engines wired over a DirectTransport with a hand-cranked clock.
struct Lab {
    GroupParams params;
    size_t t = 3, n = 5;
    DirectTransport net;
    MemoryLog log;
    uint64_t clock = 0;
    std::vector<std::unique_ptr<SeededRng>> rngs;
    std::unique_ptr<DealerEngine> dealer;
    std::unique_ptr<ServiceEngine> service;
    std::vector<std::unique_ptr<ShareholderEngine>> holders;
    SeededRng client_rng{777};

    explicit Lab(bool backup_keys = false) {
        SeededRng gen(42);
        params = generate_params(64, 32, gen);
        PeerDirectory peers{"dealer", "service", "logger", {}};
        for (size_t i = 0; i < n; i++) peers.shareholders.push_back(holder_addr(i));
        auto env_for = [&](uint64_t salt) {
            rngs.push_back(std::make_unique<SeededRng>(1000 + salt));
            NodeEnv env;
            env.net = &net;
            env.log = &log;
            env.rng = rngs.back().get();
            env.now_ms = [this] { return clock; };
            return env;
        };
        dealer = std::make_unique<DealerEngine>(params, t, n, peers, env_for(1), RecordStore{});
        ServiceEngine::Options opts;
        opts.backup_keys = backup_keys;
        service = std::make_unique<ServiceEngine>(params, t, n, peers, env_for(2), RecordStore{}, opts);
        for (size_t i = 0; i < n; i++)
            holders.push_back(std::make_unique<ShareholderEngine>(holder_addr(i), params,
                                                                  env_for(100 + i), RecordStore{}));
        net.add_node("dealer", [this](const Message& m) { return dealer->handle(m); });
        net.add_node("service", [this](const Message& m) { return service->handle(m); });
        net.add_node("logger", [](const Message& m) { return make_reply(m, msg::kAck); });
        for (size_t i = 0; i < n; i++)
            net.add_node(holder_addr(i), [this, i](const Message& m) { return holders[i]->handle(m); });
    }

    NodeEnv client_env() {
        NodeEnv env;
        env.net = &net;
        env.log = &log;
        env.rng = &client_rng;
        env.now_ms = [this] { return clock; };
        return env;
    }

    ClientConfig cfg() const { return ClientConfig{"dealer", "service", 3}; }

    ClientOutcome signup(const std::string& user, const std::string& pass, CredentialState& state) {
        NodeEnv env = client_env();
        return client_signup(net, cfg(), env, params, user + "-up", user, pass, state);
    }

    ClientOutcome login(const std::string& user, const std::string& pass, CredentialState& state,
                        const std::string& session = "") {
        NodeEnv env = client_env();
        return client_login(net, cfg(), env, params, session.empty() ? user + "-in" : session,
                            state, pass);
    }
};

}  // namespace

TEST_CASE("sign-up then login succeeds and rotates every client field") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("alice", "correct horse", state).ok);
    CHECK(state.abscissae.size() == lab.n);
    CHECK(state.username == "alice");

    CredentialState before = state;
    ClientOutcome out = lab.login("alice", "correct horse", state);
    REQUIRE(out.ok);
    CHECK_FALSE(out.token.empty());
    CHECK(lab.service->session_token("alice") == out.token);

    CHECK(state.r != before.r);
    CHECK(state.r_prime != before.r_prime);
    CHECK(state.k != before.k);
    CHECK(state.mc != before.mc);
    CHECK(state.ms != before.ms);
    CHECK(state.abscissae != before.abscissae);

    // and again: rotated credentials keep working
    ClientOutcome again = lab.login("alice", "correct horse", state, "alice-in2");
    CHECK(again.ok);
    CHECK(again.token != out.token);
}

TEST_CASE("duplicate sign-up is refused with the registration code") {
    Lab lab;
    CredentialState s1, s2;
    REQUIRE(lab.signup("bob", "pw1", s1).ok);
    ClientOutcome out = lab.signup("bob", "pw2", s2);
    CHECK_FALSE(out.ok);
    CHECK(out.code == ErrorCode::Cod100);
}

TEST_CASE("early service call and mismatched MC surface their codes") {
    Lab lab;
    Message early;
    early.type = msg::kSignupRequestMs;
    early.session_id = "s-early";
    early.username = "carol";
    put_bytes(early.payload, "mc", lab.client_rng.bytes(48));
    Message r1 = lab.net.call("service", early);
    REQUIRE(r1.is_error());
    CHECK(r1.error_code() == ErrorCode::Cod170);

    Message init;
    init.type = msg::kSignupInit;
    init.session_id = "s-mismatch";
    init.username = "carol";
    put_bytes(init.payload, "mc", lab.client_rng.bytes(48));
    REQUIRE_FALSE(lab.net.call("dealer", init).is_error());
    Message ms_req = early;
    ms_req.session_id = "s-mismatch";
    put_bytes(ms_req.payload, "mc", lab.client_rng.bytes(48));
    Message r2 = lab.net.call("service", ms_req);
    REQUIRE(r2.is_error());
    CHECK(r2.error_code() == ErrorCode::Cod400);
}

TEST_CASE("login for an unregistered user fails up front") {
    Lab lab;
    CredentialState ghost;
    ghost.username = "nobody";
    ghost.r = 1;
    ghost.r_prime = 2;
    ghost.k = random_key(lab.client_rng);
    ghost.mc = lab.client_rng.bytes(48);
    ghost.ms = lab.client_rng.bytes(48);
    for (size_t i = 0; i < lab.n; i++) ghost.abscissae.push_back(i + 1);
    ClientOutcome out = lab.login("nobody", "pw", ghost);
    CHECK_FALSE(out.ok);
    CHECK(out.code == ErrorCode::Cod600);
}

TEST_CASE("wrong password fails the rebuilt-secret comparison and keeps state intact") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("dave", "right", state).ok);
    CredentialState before = state;
    ClientOutcome bad = lab.login("dave", "wrong", state);
    CHECK_FALSE(bad.ok);
    CHECK(bad.code == ErrorCode::Cod860);
    CHECK(state.abscissae == before.abscissae);
    CHECK(state.mc == before.mc);
    ClientOutcome good = lab.login("dave", "right", state, "dave-retry");
    CHECK(good.ok);
}

TEST_CASE("wrong abscissae are rejected by digest checks and starve the dealer") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("erin", "pw", state).ok);
    CredentialState bad = state;
    for (auto& x : bad.abscissae) x = mod(x + 1, lab.params.q);
    ClientOutcome out = lab.login("erin", "pw", bad);
    CHECK_FALSE(out.ok);
    CHECK(out.code == ErrorCode::Cod800);
    CHECK(lab.log.count_code(ErrorCode::Cod700) >= lab.n);  // holders log, dealer echoes
}

TEST_CASE("a replayed login request dies after rotation") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("frank", "pw", state).ok);
    NodeEnv env = lab.client_env();
    LoginAttempt attempt = client_login_prepare(env, lab.params, "frank-in", state, "pw");
    CredentialState rotated = state;
    REQUIRE(client_login_complete(lab.net, lab.cfg(), env, rotated, attempt).ok);

    Message replayed = attempt.request;
    Message reply = lab.net.call("dealer", replayed);
    REQUIRE(reply.is_error());
    CHECK(reply.error_code() == ErrorCode::Cod800);  // every digest check now fails
}

TEST_CASE("shareholder releases only against the right abscissa and locks out probes") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("gina", "pw", state).ok);

    Message good;
    good.type = msg::kReleaseShare;
    good.session_id = "probe";
    good.username = "gina";
    put_mpz(good.payload, "x", state.abscissae[0]);
    Message ok = lab.net.call(holder_addr(0), good);
    REQUIRE_FALSE(ok.is_error());
    DualShare share{state.abscissae[0], get_mpz(ok.payload, "value"), get_mpz(ok.payload, "blind")};
    auto dealer_rec = lab.dealer->store().get("user", "gina");
    REQUIRE(dealer_rec.has_value());
    CHECK(verify_share(share, ShareholderEngine::commitments_from_json(dealer_rec->at("commitments")),
                       lab.params));

    Message probe = good;
    for (int i = 0; i < ShareholderEngine::kSuspicionThreshold; i++) {
        put_mpz(probe.payload, "x", mpz_class(5000 + i));
        Message r = lab.net.call(holder_addr(0), probe);
        REQUIRE(r.is_error());
        CHECK(r.error_code() == ErrorCode::Cod700);
    }
    // now suspended: even the correct abscissa is refused for the cool-off
    Message refused = lab.net.call(holder_addr(0), good);
    REQUIRE(refused.is_error());
    CHECK_FALSE(refused.error_code().has_value());
    CHECK(refused.error_detail() == "suspended");

    lab.clock += ShareholderEngine::kCooloffMs + 1;
    CHECK_FALSE(lab.net.call(holder_addr(0), good).is_error());
}

TEST_CASE("a misdealt share is caught by the holder's own commitment check") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("hana", "pw", state).ok);
    auto rec = lab.holders[2]->store().get("user", "hana");
    REQUIRE(rec.has_value());
    Json bad = *rec;
    bad["value"] = to_hex(from_hex(bad["value"].get<std::string>()) + 1);
    lab.holders[2]->store().put("user", "hana", bad);

    Message ask;
    ask.type = msg::kReleaseShare;
    ask.session_id = "s";
    ask.username = "hana";
    put_mpz(ask.payload, "x", state.abscissae[2]);
    Message r = lab.net.call(holder_addr(2), ask);
    REQUIRE(r.is_error());
    CHECK(r.error_code() == ErrorCode::Cod750);
}

TEST_CASE("dealer stores only commitments and flags; no abscissae or secrets") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("ivy", "pw", state).ok);
    auto rec = lab.dealer->store().get("user", "ivy");
    REQUIRE(rec.has_value());
    std::set<std::string> keys;
    for (const auto& [k, v] : rec->items()) {
        (void)v;
        keys.insert(k);
    }
    CHECK(keys == std::set<std::string>{"commitments", "registered"});
    CHECK(rec->at("commitments").size() == lab.t);
    // no blinded secret, no abscissa, no password scalar, no bare g^S
    std::string raw = lab.dealer->store().raw_contents();
    mpz_class secret = password_to_scalar("pw", lab.params.q);
    BlindedSecret s_prime = blind_secret(secret, state.r, lab.params);
    CHECK(raw.find(to_hex(s_prime.value)) == std::string::npos);
    CHECK(raw.find(to_hex(secret)) == std::string::npos);
    CHECK(raw.find(to_hex(mod_exp(lab.params.g, secret, lab.params.p))) == std::string::npos);
    for (const auto& x : state.abscissae) CHECK(raw.find("\"" + to_hex(x) + "\"") == std::string::npos);
}

TEST_CASE("shareholder stores carry digests, never abscissae in the clear") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("jack", "pw", state).ok);
    for (size_t i = 0; i < lab.n; i++) {
        std::string raw = lab.holders[i]->store().raw_contents();
        CHECK(raw.find("abscissa") == std::string::npos);
        CHECK(raw.find("\"" + to_hex(state.abscissae[i]) + "\"") == std::string::npos);
        CHECK(raw.find(hex_encode(hash_abscissa(state.abscissae[i]))) != std::string::npos);
    }
}

TEST_CASE("an unexpected disclosure report is rejected") {
    Lab lab;
    Message report;
    report.type = msg::kReport;
    report.session_id = "s";
    report.username = "kate";
    Message r = lab.net.call("dealer", report);
    CHECK(r.is_error());
}

TEST_CASE("client verify rejects a wrong service key") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("lena", "pw", state).ok);
    Bytes forged = sym_encrypt(derive_key(state.ms), str_bytes(to_hex(mpz_class(12345))),
                               lab.client_rng);
    CHECK_FALSE(client_verify_service(forged, state).has_value());
    Bytes garbage = lab.client_rng.bytes(60);
    CHECK_FALSE(client_verify_service(garbage, state).has_value());
}

TEST_CASE("service key backup and restore round trip, with tamper tolerance") {
    Lab lab;
    Message ctx;
    ctx.session_id = "kb";
    ctx.username = "backup-user";
    mpz_class key_scalar = random_scalar(lab.params.q, lab.client_rng);

    REQUIRE(lab.service->backup_key("kprime/test", key_scalar, ctx));
    std::string service_raw = lab.service->store().raw_contents();
    CHECK(service_raw.find(to_hex(key_scalar)) == std::string::npos);
    for (auto& h : lab.holders) CHECK(h->store().get("servicekey", "kprime/test").has_value());

    auto restored = lab.service->restore_key("kprime/test", ctx);
    REQUIRE(restored.has_value());
    CHECK(*restored == key_scalar);

    SECTION("one tampered holder share is detected and skipped") {
        auto rec = lab.holders[1]->store().get("servicekey", "kprime/test");
        REQUIRE(rec.has_value());
        Json bad = *rec;
        bad["value"] = to_hex(from_hex(bad["value"].get<std::string>()) + 1);
        lab.holders[1]->store().put("servicekey", "kprime/test", bad);
        auto again = lab.service->restore_key("kprime/test", ctx);
        REQUIRE(again.has_value());
        CHECK(*again == key_scalar);
    }

    SECTION("wrong commitments release nothing") {
        Message restore;
        restore.type = msg::kKeyRestore;
        restore.session_id = "kb2";
        restore.username = "backup-user";
        CommittedDealing decoy = deal_committed(1, lab.t, lab.n, lab.params, lab.client_rng);
        restore.payload = {{"identity", "kprime/test"},
                           {"commitments", ShareholderEngine::commitments_to_json(decoy.commitments)}};
        Message reply = lab.net.call("dealer", restore);
        REQUIRE_FALSE(reply.is_error());
        CHECK(reply.payload.at("shares").empty());
    }
}

TEST_CASE("whole protocol works with the service holding k' via the share sub-protocol") {
    Lab lab(/*backup_keys=*/true);
    CredentialState state;
    REQUIRE(lab.signup("mara", "pw", state).ok);
    std::string raw = lab.service->store().raw_contents();
    CHECK(raw.find("kprime_backup") != std::string::npos);
    ClientOutcome out = lab.login("mara", "pw", state);
    REQUIRE(out.ok);
    CHECK_FALSE(out.token.empty());
    ClientOutcome again = lab.login("mara", "pw", state, "mara-2");
    CHECK(again.ok);
}

TEST_CASE("credential state serializes and round-trips") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("nina", "pw", state).ok);
    Json j = state.to_json();
    CredentialState back = CredentialState::from_json(j);
    CHECK(back.username == state.username);
    CHECK(back.r == state.r);
    CHECK(back.r_prime == state.r_prime);
    CHECK(back.k == state.k);
    CHECK(back.mc == state.mc);
    CHECK(back.ms == state.ms);
    CHECK(back.abscissae == state.abscissae);

    Json bad = j;
    bad["format_version"] = 99;
    CHECK_THROWS_AS(CredentialState::from_json(bad), std::invalid_argument);
}

TEST_CASE("one-time secrets: fifty consecutive logins, every replay refused") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("pola", "pw", state).ok);
    NodeEnv env = lab.client_env();
    for (int round = 0; round < 50; round++) {
        LoginAttempt attempt =
            client_login_prepare(env, lab.params, "pola-" + std::to_string(round), state, "pw");
        REQUIRE(client_login_complete(lab.net, lab.cfg(), env, state, attempt).ok);
        Message replay = lab.net.call("dealer", attempt.request);
        REQUIRE(replay.is_error());
        CHECK(replay.error_code() == ErrorCode::Cod800);
    }
}

TEST_CASE("rotation atomicity: fatal errors leave holder stores bit-identical") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("quen", "pw", state).ok);
    auto snapshot = [&] {
        std::vector<std::string> s;
        for (auto& h : lab.holders) s.push_back(h->store().raw_contents());
        return s;
    };
    std::vector<std::string> before = snapshot();

    SECTION("wrong password dies before anything is staged") {
        CHECK_FALSE(lab.login("quen", "bad-pw", state).ok);
        CHECK(snapshot() == before);
    }

    SECTION("a lying disclosure report kills the staged rotation") {
        NodeEnv env = lab.client_env();
        LoginAttempt attempt = client_login_prepare(env, lab.params, "quen-x", state, "pw");
        REQUIRE_FALSE(lab.net.call("dealer", attempt.request).is_error());  // staged

        Message lie;
        lie.type = msg::kReport;
        lie.session_id = "quen-x";
        lie.username = "quen";
        put_bytes(lie.payload, "k", lab.client_rng.bytes(32));
        put_mpz(lie.payload, "k_prime", random_scalar(lab.params.q, lab.client_rng));
        put_bytes(lie.payload, "ms", lab.client_rng.bytes(60));
        lie.payload["w"] = "abcd";
        put_bytes(lie.payload, "mc_prime", attempt.mc_prime);
        Message verdict = lab.net.call("dealer", lie);
        REQUIRE(verdict.is_error());
        CHECK(verdict.error_code() == ErrorCode::Cod2000);
        CHECK(snapshot() == before);

        // nothing rotated: the same credentials still log in
        ClientOutcome out = lab.login("quen", "pw", state, "quen-retry");
        CHECK(out.ok);
    }
}

TEST_CASE("sign-up material is fresh per run and well-formed") {
    Lab lab;
    CredentialState s1, s2;
    REQUIRE(lab.signup("rey", "same password", s1).ok);
    REQUIRE(lab.signup("sam", "same password", s2).ok);
    CHECK(s1.mc != s2.mc);  // fresh k and r' every time
    CHECK(s1.ms != s2.ms);

    // MC opens under k to a group element of order q
    auto opened = sym_decrypt(s1.k, s1.mc);
    REQUIRE(opened.has_value());
    mpz_class w = from_hex(bytes_str(*opened));
    CHECK(w > 1);
    CHECK(w < lab.params.p);
    CHECK(mod_exp(w, lab.params.q, lab.params.p) == 1);

    // the n abscissae handed back are pairwise distinct and nonzero
    for (size_t i = 0; i < s1.abscissae.size(); i++) {
        CHECK(s1.abscissae[i] != 0);
        for (size_t j = i + 1; j < s1.abscissae.size(); j++)
            CHECK(s1.abscissae[i] != s1.abscissae[j]);
    }
}

TEST_CASE("credential state file: atomic save, private mode, lock exclusion") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("tess", "pw", state).ok);
    auto dir = std::filesystem::temp_directory_path() / "splitauth_statefile_test";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "tess.state").string();

    save_credential_state(path, state);
    CHECK(state_mode_is_private(path));
    CredentialState back = load_credential_state(path);
    CHECK(back.ms == state.ms);
    CHECK(back.abscissae == state.abscissae);
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

    {
        StateLock lock(path);
        CHECK_THROWS_AS(StateLock(path), std::runtime_error);
    }
    StateLock relock(path);  // released cleanly

    std::ofstream(path, std::ios::trunc) << "{ not json";
    CHECK_THROWS_AS(load_credential_state(path), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a second login for the same user cannot interleave with an open phase") {
    Lab lab;
    CredentialState state;
    REQUIRE(lab.signup("owen", "pw", state).ok);
    NodeEnv env = lab.client_env();
    LoginAttempt first = client_login_prepare(env, lab.params, "owen-a", state, "pw");
    Message opened = lab.net.call("dealer", first.request);
    REQUIRE_FALSE(opened.is_error());  // phase now open, rotation staged

    LoginAttempt second = client_login_prepare(env, lab.params, "owen-b", state, "pw");
    Message refused = lab.net.call("dealer", second.request);
    REQUIRE(refused.is_error());
    CHECK(refused.error_detail().find("another phase") != std::string::npos);

    // the open phase expires; a fresh login then goes through end to end
    lab.clock += DealerEngine::kPhaseExpiryMs + 1;
    ClientOutcome out = lab.login("owen", "pw", state, "owen-c");
    CHECK(out.ok);
}
