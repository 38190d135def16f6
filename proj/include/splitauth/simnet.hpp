// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "splitauth/protocol/client.hpp"
#include "splitauth/protocol/dealer.hpp"
#include "splitauth/protocol/logger.hpp"
#include "splitauth/protocol/service.hpp"
#include "splitauth/protocol/shareholder.hpp"

namespace splitauth {

inline std::string holder_addr(size_t i) { return "shareholder" + std::to_string(i); }

// ---------------------------------------------------------------------------
// Fault plans
// ---------------------------------------------------------------------------

enum class NodeBehavior { Honest, Down, Passive, Byzantine };

enum class ByzStrategy {
    None,
    TamperShare,             // shareholder corrupts s_i in its release reply
    TamperTval,              // shareholder corrupts t_i in its release reply
    WrongAbscissaProbe,      // dealer perturbs the abscissa it forwards
    InconsistentDealing,     // dealer corrupts one holder's share at dealing time
    ForgeEms,                // dealer swaps the login envelope it forwards
    WrongKprime,             // service returns a corrupted k' envelope
    LieInReport,             // service lies in the disclosure report (param: k|k_prime|mc_prime)
    WrongPasswordClient,     // client logs in with the wrong password
    WrongCoordinatesClient,  // client logs in with perturbed abscissae
};

inline std::string strategy_name(ByzStrategy s) {
    switch (s) {
        case ByzStrategy::None: return "none";
        case ByzStrategy::TamperShare: return "tamper-share";
        case ByzStrategy::TamperTval: return "tamper-tval";
        case ByzStrategy::WrongAbscissaProbe: return "wrong-abscissa-probe";
        case ByzStrategy::InconsistentDealing: return "inconsistent-dealing";
        case ByzStrategy::ForgeEms: return "forge-ems";
        case ByzStrategy::WrongKprime: return "wrong-kprime";
        case ByzStrategy::LieInReport: return "lie-in-report";
        case ByzStrategy::WrongPasswordClient: return "wrong-password-client";
        case ByzStrategy::WrongCoordinatesClient: return "wrong-coordinates-client";
    }
    return "none";
}

inline ByzStrategy strategy_from_name(const std::string& name) {
    for (ByzStrategy s : {ByzStrategy::TamperShare, ByzStrategy::TamperTval,
                          ByzStrategy::WrongAbscissaProbe, ByzStrategy::InconsistentDealing,
                          ByzStrategy::ForgeEms, ByzStrategy::WrongKprime, ByzStrategy::LieInReport,
                          ByzStrategy::WrongPasswordClient, ByzStrategy::WrongCoordinatesClient})
        if (strategy_name(s) == name) return s;
    if (name == "looping-requests")  // expressed as the `probe` script action
        return ByzStrategy::WrongAbscissaProbe;
    throw std::invalid_argument("unknown byzantine strategy: " + name);
}

struct FaultSpec {
    NodeBehavior behavior = NodeBehavior::Honest;
    ByzStrategy strategy = ByzStrategy::None;
    std::string param;  // strategy refinement, e.g. which report field to lie about
    std::string phase;  // "", "sharing" or "reconstruction": when the fault is active
};

struct FaultPlan {
    std::map<std::string, FaultSpec> nodes;  // keyed by node name ("dealer", "shareholder0", ...)
    uint64_t seed = 1;

    FaultSpec spec_for(const std::string& node) const {
        auto it = nodes.find(node);
        return it == nodes.end() ? FaultSpec{} : it->second;
    }

    /// Strategies only attach to roles that can express them.
    void validate() const {
        for (const auto& [node, spec] : nodes) {
            if (spec.behavior != NodeBehavior::Byzantine) continue;
            bool ok = false;
            switch (spec.strategy) {
                case ByzStrategy::TamperShare:
                case ByzStrategy::TamperTval:
                    ok = node.rfind("shareholder", 0) == 0;
                    break;
                case ByzStrategy::WrongAbscissaProbe:
                case ByzStrategy::InconsistentDealing:
                case ByzStrategy::ForgeEms:
                    ok = node == "dealer";
                    break;
                case ByzStrategy::WrongKprime:
                case ByzStrategy::LieInReport:
                    ok = node == "service";
                    break;
                case ByzStrategy::WrongPasswordClient:
                case ByzStrategy::WrongCoordinatesClient:
                    ok = node == "client";
                    break;
                case ByzStrategy::None:
                    ok = false;
                    break;
            }
            if (!ok)
                throw std::invalid_argument("fault plan: " + strategy_name(spec.strategy) +
                                            " cannot attach to " + node);
        }
    }
};

// ---------------------------------------------------------------------------
// The deterministic in-process network
// ---------------------------------------------------------------------------

/// Single-scheduler message fabric with virtual time. Peer-down calls cost
/// the timeout on the virtual clock and throw, byzantine nodes tamper via
/// interceptors here, and every delivered byte lands in the trace.
class SimNet {
  public:
    static constexpr uint64_t kLatencyMs = 1;
    static constexpr uint64_t kTimeoutMs = 5000;

    struct TraceEntry {
        uint64_t at_ms;
        std::string from;
        std::string to;
        bool timed_out;
        Bytes request;
        Bytes response;
    };

    explicit SimNet(FaultPlan plan) : plan_(std::move(plan)) {}

    void add_node(const std::string& name, std::function<Message(const Message&)> handler) {
        handlers_[name] = std::move(handler);
    }

    void set_phase(const std::string& phase) { phase_ = phase; }
    const std::string& phase() const { return phase_; }

    void set_down(const std::string& node, bool down) {
        plan_.nodes[node].behavior = down ? NodeBehavior::Down : NodeBehavior::Honest;
    }

    uint64_t now_ms() const { return clock_ms_; }

    Message call(const std::string& from, const std::string& to, const Message& request) {
        clock_ms_ += kLatencyMs;
        if (is_down(to)) {
            clock_ms_ += kTimeoutMs;
            trace_.push_back({clock_ms_, from, to, true, request.canonical_bytes(), {}});
            throw TransportTimeout("peer down: " + to);
        }
        Message delivered = request;
        tamper_request(from, to, delivered);
        auto it = handlers_.find(to);
        if (it == handlers_.end()) throw TransportTimeout("no such peer: " + to);
        Message response = it->second(delivered);
        tamper_response(to, response);
        trace_.push_back({clock_ms_, from, to, false, delivered.canonical_bytes(),
                          response.canonical_bytes()});
        return response;
    }

    const std::vector<TraceEntry>& trace() const { return trace_; }
    const FaultPlan& plan() const { return plan_; }

    /// Everything a (passive) node saw go by: its own inbound and outbound
    /// messages, as delivered.
    std::vector<Bytes> observed_by(const std::string& node) const {
        std::vector<Bytes> out;
        for (const auto& e : trace_) {
            if (e.from != node && e.to != node) continue;
            out.push_back(e.request);
            if (!e.timed_out) out.push_back(e.response);
        }
        return out;
    }

    std::string trace_digest() const {
        Bytes all;
        for (const auto& e : trace_) {
            all.insert(all.end(), e.request.begin(), e.request.end());
            all.insert(all.end(), e.response.begin(), e.response.end());
        }
        return hex_encode(sha256(all));
    }

  private:
    bool phase_active(const FaultSpec& spec) const {
        return spec.phase.empty() || spec.phase == phase_;
    }

    bool is_down(const std::string& node) const {
        FaultSpec spec = plan_.spec_for(node);
        return spec.behavior == NodeBehavior::Down && phase_active(spec);
    }

    static void bump_hex_field(Json& payload, const std::string& key) {
        payload[key] = to_hex(from_hex(payload.at(key).get<std::string>()) + 1);
    }

    static void flip_b64_field(Json& payload, const std::string& key) {
        Bytes b = base64_decode(payload.at(key).get<std::string>());
        if (!b.empty()) b[b.size() / 2] ^= 0x01;
        payload[key] = base64_encode(b);
    }

    void tamper_request(const std::string& from, const std::string& to, Message& m) const {
        FaultSpec spec = plan_.spec_for(from);
        if (spec.behavior != NodeBehavior::Byzantine || !phase_active(spec)) return;
        switch (spec.strategy) {
            case ByzStrategy::WrongAbscissaProbe:
                if (m.type == msg::kReleaseShare) bump_hex_field(m.payload, "x");
                break;
            case ByzStrategy::InconsistentDealing:
                if (m.type == msg::kStoreShare && to == holder_addr(0))
                    bump_hex_field(m.payload, "value");
                break;
            case ByzStrategy::ForgeEms:
                if (m.type == msg::kStoreEms) flip_b64_field(m.payload, "ems");
                break;
            case ByzStrategy::LieInReport:
                if (m.type == msg::kReport) {
                    std::string field = spec.param.empty() ? "k_prime" : spec.param;
                    if (field == "k_prime")
                        bump_hex_field(m.payload, "k_prime");
                    else if (field == "k")
                        flip_b64_field(m.payload, "k");
                    else if (field == "mc_prime")
                        flip_b64_field(m.payload, "mc_prime");
                    else
                        throw std::invalid_argument("lie-in-report: unknown field " + field);
                }
                break;
            default:
                break;
        }
    }

    void tamper_response(const std::string& responder, Message& m) const {
        FaultSpec spec = plan_.spec_for(responder);
        if (spec.behavior != NodeBehavior::Byzantine || !phase_active(spec)) return;
        switch (spec.strategy) {
            case ByzStrategy::TamperShare:
                if (m.type == msg::kShare) bump_hex_field(m.payload, "value");
                break;
            case ByzStrategy::TamperTval:
                if (m.type == msg::kShare) bump_hex_field(m.payload, "blind");
                break;
            case ByzStrategy::WrongKprime:
                if (m.type == msg::kKprimeEnvelope) flip_b64_field(m.payload, "env");
                break;
            default:
                break;
        }
    }

    FaultPlan plan_;
    std::string phase_;
    uint64_t clock_ms_ = 0;
    std::map<std::string, std::function<Message(const Message&)>> handlers_;
    std::vector<TraceEntry> trace_;
};

class SimTransport : public Transport {
  public:
    SimTransport(SimNet* net, std::string self) : net_(net), self_(std::move(self)) {}

    Message call(const std::string& peer, const Message& request) override {
        return net_->call(self_, peer, request);
    }

  private:
    SimNet* net_;
    std::string self_;
};

// ---------------------------------------------------------------------------
// Cluster assembly
// ---------------------------------------------------------------------------

/// One dealer, n shareholders, one service, one logger wired over a SimNet,
/// plus the client-side local storage for every scripted user.
struct SimCluster {
    GroupParams params;
    size_t t = 0;
    size_t n = 0;
    SimNet net;
    std::vector<std::unique_ptr<SimTransport>> transports;
    std::vector<std::unique_ptr<TransportLogSink>> sinks;
    std::vector<std::unique_ptr<SeededRng>> rngs;
    std::unique_ptr<LoggerEngine> logger;
    std::unique_ptr<DealerEngine> dealer;
    std::unique_ptr<ServiceEngine> service;
    std::vector<std::unique_ptr<ShareholderEngine>> holders;

    std::unique_ptr<SimTransport> client_net;
    std::unique_ptr<TransportLogSink> client_sink;
    std::unique_ptr<SeededRng> client_rng;
    std::map<std::string, CredentialState> client_states;
    std::map<std::string, Message> last_login_request;
    uint64_t session_counter = 0;

    SimCluster(const GroupParams& p, size_t t_, size_t n_, FaultPlan plan, bool service_backup)
        : params(p), t(t_), n(n_), net(std::move(plan)) {
        PeerDirectory peers;
        peers.dealer = "dealer";
        peers.service = "service";
        peers.logger = "logger";
        for (size_t i = 0; i < n; i++) peers.shareholders.push_back(holder_addr(i));

        uint64_t seed = net.plan().seed;
        auto make_env = [&](const std::string& name, uint64_t salt) {
            transports.push_back(std::make_unique<SimTransport>(&net, name));
            sinks.push_back(std::make_unique<TransportLogSink>(transports.back().get(), "logger"));
            rngs.push_back(std::make_unique<SeededRng>(seed * 7919 + salt));
            NodeEnv env;
            env.net = transports.back().get();
            env.log = sinks.back().get();
            env.rng = rngs.back().get();
            env.now_ms = [this] { return net.now_ms(); };
            return env;
        };

        logger = std::make_unique<LoggerEngine>(RecordStore{});
        dealer = std::make_unique<DealerEngine>(params, t, n, peers, make_env("dealer", 1),
                                                RecordStore{});
        ServiceEngine::Options opts;
        opts.backup_keys = service_backup;
        service = std::make_unique<ServiceEngine>(params, t, n, peers, make_env("service", 2),
                                                  RecordStore{}, opts);
        for (size_t i = 0; i < n; i++)
            holders.push_back(std::make_unique<ShareholderEngine>(
                holder_addr(i), params, make_env(holder_addr(i), 100 + i), RecordStore{}));

        net.add_node("logger", [this](const Message& m) { return logger->handle(m); });
        net.add_node("dealer", [this](const Message& m) { return dealer->handle(m); });
        net.add_node("service", [this](const Message& m) { return service->handle(m); });
        for (size_t i = 0; i < n; i++)
            net.add_node(holder_addr(i),
                         [this, i](const Message& m) { return holders[i]->handle(m); });

        client_net = std::make_unique<SimTransport>(&net, "client");
        client_sink = std::make_unique<TransportLogSink>(client_net.get(), "logger");
        client_rng = std::make_unique<SeededRng>(seed * 7919 + 3);
    }

    NodeEnv client_env() {
        NodeEnv env;
        env.net = client_net.get();
        env.log = client_sink.get();
        env.rng = client_rng.get();
        env.now_ms = [this] { return net.now_ms(); };
        return env;
    }

    ClientConfig client_config() const { return ClientConfig{"dealer", "service", 3}; }

    std::string next_session() { return "s" + std::to_string(++session_counter); }

    /// Models a dealer that lost its registration store (disk loss, fresh
    /// redeploy); shareholder and service state survives. Index 0 is the
    /// dealer's transport/sink/rng triple.
    void wipe_dealer_store() {
        PeerDirectory peers;
        peers.dealer = "dealer";
        peers.service = "service";
        peers.logger = "logger";
        for (size_t i = 0; i < n; i++) peers.shareholders.push_back(holder_addr(i));
        NodeEnv env;
        env.net = transports[0].get();
        env.log = sinks[0].get();
        env.rng = rngs[0].get();
        env.now_ms = [this] { return net.now_ms(); };
        dealer = std::make_unique<DealerEngine>(params, t, n, peers, env, RecordStore{});
    }
};

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct Action {
    std::string type;  // signup | login | replay_login | probe | wipe_dealer_users |
                       // early_ms | mismatched_mc
    std::string username;
    std::string password;
    int count = 1;  // probe repetitions
};

struct ActionResult {
    std::string type;
    std::string username;
    bool ok = false;
    std::optional<ErrorCode> code;
    std::string detail;
    std::string token;
    bool client_knew_password = true;
};

struct ScenarioResult {
    std::string outcome;  // "success" | "CODxxx" | "error" | "hang"
    std::vector<ActionResult> actions;
    std::vector<LogRecord> logs;
    std::vector<SimNet::TraceEntry> trace;
    std::string trace_digest;
    std::map<std::string, std::string> stores;           // node -> persisted contents
    std::map<std::string, std::vector<Bytes>> observed;  // passive node -> seen bytes

    size_t count_code(ErrorCode code) const {
        size_t n = 0;
        for (const auto& r : logs)
            if (r.code && *r.code == code) n++;
        return n;
    }

    bool action_failed_with(size_t index, ErrorCode code) const {
        return index < actions.size() && !actions[index].ok && actions[index].code == code;
    }
};

struct ScenarioOptions {
    GroupParams params;
    size_t t = 3;
    size_t n = 5;
    FaultPlan plan;
    bool service_backup = false;
    uint64_t hang_budget_ms = 10'000'000;
};

/// Declarative scenario document: group sizing, fault plan, action script.
struct ScenarioFile {
    size_t t = 3;
    size_t n = 5;
    uint64_t seed = 1;
    unsigned p_bits = 96;
    unsigned q_bits = 64;
    std::string params_path;  // overrides p_bits/q_bits when set
    bool service_backup = false;
    FaultPlan plan;
    std::vector<Action> script;
};

inline NodeBehavior behavior_from_name(const std::string& name) {
    if (name == "honest") return NodeBehavior::Honest;
    if (name == "down") return NodeBehavior::Down;
    if (name == "passive") return NodeBehavior::Passive;
    if (name == "byzantine") return NodeBehavior::Byzantine;
    throw std::invalid_argument("unknown node behavior: " + name);
}

inline ScenarioFile parse_scenario_file(const Json& doc) {
    ScenarioFile f;
    f.t = doc.value("t", 3);
    f.n = doc.value("n", 5);
    f.seed = doc.value("seed", 1);
    f.p_bits = doc.value("p_bits", 96);
    f.q_bits = doc.value("q_bits", 64);
    f.params_path = doc.value("params", std::string());
    f.service_backup = doc.value("service_backup", false);
    f.plan.seed = f.seed;
    if (doc.contains("faults")) {
        for (const auto& [node, spec] : doc.at("faults").items()) {
            FaultSpec fs;
            fs.behavior = behavior_from_name(spec.value("behavior", "honest"));
            if (spec.contains("strategy"))
                fs.strategy = strategy_from_name(spec.at("strategy").get<std::string>());
            fs.param = spec.value("param", std::string());
            fs.phase = spec.value("phase", std::string());
            f.plan.nodes[node] = fs;
        }
    }
    for (const auto& a : doc.at("script")) {
        Action action;
        action.type = a.at("action").get<std::string>();
        action.username = a.value("username", std::string());
        action.password = a.value("password", std::string());
        action.count = a.value("count", 1);
        f.script.push_back(action);
    }
    return f;
}

inline ScenarioResult run_scenario(const ScenarioOptions& options, const std::vector<Action>& script) {
    options.plan.validate();
    SimCluster cluster(options.params, options.t, options.n, options.plan, options.service_backup);
    FaultSpec client_spec = options.plan.spec_for("client");
    bool client_byz = client_spec.behavior == NodeBehavior::Byzantine;

    ScenarioResult result;
    result.outcome = "success";
    for (const auto& action : script) {
        if (cluster.net.now_ms() > options.hang_budget_ms) {
            result.outcome = "hang";
            break;
        }
        ActionResult ar;
        ar.type = action.type;
        ar.username = action.username;
        std::string session = cluster.next_session();
        NodeEnv env = cluster.client_env();
        try {
            if (action.type == "signup") {
                cluster.net.set_phase("sharing");
                CredentialState state;
                ClientOutcome out =
                    client_signup(*cluster.client_net, cluster.client_config(), env,
                                  cluster.params, session, action.username, action.password, state);
                ar.ok = out.ok;
                ar.code = out.code;
                ar.detail = out.detail;
                if (out.ok) cluster.client_states[action.username] = state;
            } else if (action.type == "login") {
                cluster.net.set_phase("reconstruction");
                auto it = cluster.client_states.find(action.username);
                if (it == cluster.client_states.end() && action.username != "") {
                    // unregistered login: fabricate a plausible-looking state
                    CredentialState ghost;
                    ghost.username = action.username;
                    ghost.r = random_scalar(cluster.params.q, *cluster.client_rng);
                    ghost.r_prime = random_scalar(cluster.params.q, *cluster.client_rng);
                    ghost.k = random_key(*cluster.client_rng);
                    ghost.mc = cluster.client_rng->bytes(48);
                    ghost.ms = cluster.client_rng->bytes(48);
                    for (size_t i = 0; i < cluster.n; i++)
                        ghost.abscissae.push_back(
                            random_nonzero_scalar(cluster.params.q, *cluster.client_rng));
                    it = cluster.client_states.emplace(action.username, ghost).first;
                }
                CredentialState state = it->second;  // copy: restored on failure
                std::string password = action.password;
                if (client_byz && client_spec.strategy == ByzStrategy::WrongPasswordClient) {
                    password += "-wrong";
                    ar.client_knew_password = false;
                }
                if (client_byz && client_spec.strategy == ByzStrategy::WrongCoordinatesClient)
                    for (auto& x : state.abscissae) x = mod(x + 1, cluster.params.q);

                LoginAttempt attempt =
                    client_login_prepare(env, cluster.params, session, state, password);
                cluster.last_login_request[action.username] = attempt.request;
                ClientOutcome out = client_login_complete(*cluster.client_net,
                                                          cluster.client_config(), env, state,
                                                          attempt);
                ar.ok = out.ok;
                ar.code = out.code;
                ar.detail = out.detail;
                ar.token = out.token;
                if (out.ok) it->second = state;
            } else if (action.type == "replay_login") {
                cluster.net.set_phase("reconstruction");
                auto it = cluster.last_login_request.find(action.username);
                if (it == cluster.last_login_request.end())
                    throw std::runtime_error("replay_login without a prior login");
                Message replayed = it->second;  // byte-identical resend
                Message reply = cluster.client_net->call("dealer", replayed);
                ar.ok = !reply.is_error();
                ar.code = reply.error_code();
                ar.detail = reply.error_detail();
            } else if (action.type == "probe") {
                // a compromised dealer probing holders with guessed abscissae
                cluster.net.set_phase("reconstruction");
                Transport* dealer_wire = cluster.transports[0].get();
                size_t refused = 0;
                for (int round = 0; round < action.count; round++) {
                    for (size_t i = 0; i < cluster.n; i++) {
                        Message probe;
                        probe.type = msg::kReleaseShare;
                        probe.session_id = session;
                        probe.username = action.username;
                        put_mpz(probe.payload, "x",
                                mpz_class(1000 + round));  // guesses, not the real abscissae
                        try {
                            Message resp = dealer_wire->call(holder_addr(i), probe);
                            if (resp.is_error()) refused++;
                        } catch (const TransportTimeout&) {
                        }
                    }
                }
                ar.ok = true;
                ar.detail = "refusals=" + std::to_string(refused);
            } else if (action.type == "wipe_dealer_users") {
                cluster.wipe_dealer_store();
                ar.ok = true;
            } else if (action.type == "early_ms") {
                // client asks the service before the dealer has forwarded MC
                cluster.net.set_phase("sharing");
                Message early;
                early.type = msg::kSignupRequestMs;
                early.session_id = session;
                early.username = action.username;
                put_bytes(early.payload, "mc", cluster.client_rng->bytes(32));
                Message reply = cluster.client_net->call("service", early);
                ar.ok = !reply.is_error();
                ar.code = reply.error_code();
                ar.detail = reply.error_detail();
            } else if (action.type == "mismatched_mc") {
                cluster.net.set_phase("sharing");
                Message init;
                init.type = msg::kSignupInit;
                init.session_id = session;
                init.username = action.username;
                Bytes mc_a = cluster.client_rng->bytes(48);
                put_bytes(init.payload, "mc", mc_a);
                Message ack = cluster.client_net->call("dealer", init);
                if (ack.is_error()) {
                    ar.code = ack.error_code();
                    ar.detail = ack.error_detail();
                } else {
                    Message ms_req;
                    ms_req.type = msg::kSignupRequestMs;
                    ms_req.session_id = session;
                    ms_req.username = action.username;
                    put_bytes(ms_req.payload, "mc", cluster.client_rng->bytes(48));
                    Message reply = cluster.client_net->call("service", ms_req);
                    ar.ok = !reply.is_error();
                    ar.code = reply.error_code();
                    ar.detail = reply.error_detail();
                }
            } else {
                throw std::invalid_argument("unknown scenario action: " + action.type);
            }
        } catch (const TransportTimeout& e) {
            ar.ok = false;
            ar.detail = e.what();
        }
        result.actions.push_back(ar);
    }

    if (result.outcome != "hang") {
        for (const auto& ar : result.actions) {
            if (ar.ok) continue;
            result.outcome = ar.code ? error_code_name(*ar.code) : "error";
            break;
        }
    }

    result.logs = cluster.logger->records();
    result.trace = cluster.net.trace();
    result.trace_digest = cluster.net.trace_digest();
    result.stores["dealer"] = cluster.dealer->store().raw_contents();
    result.stores["service"] = cluster.service->store().raw_contents();
    for (size_t i = 0; i < cluster.n; i++)
        result.stores[holder_addr(i)] = cluster.holders[i]->store().raw_contents();
    for (const auto& [node, spec] : options.plan.nodes)
        if (spec.behavior == NodeBehavior::Passive)
            result.observed[node] = cluster.net.observed_by(node);
    return result;
}

// ---------------------------------------------------------------------------
// Leakage audit
// ---------------------------------------------------------------------------

struct LeakageReport {
    bool passed = true;
    std::vector<std::string> findings;

    void fail(const std::string& what) {
        passed = false;
        findings.push_back(what);
    }
};

namespace detail {

inline bool contains(const Bytes& haystack, const Bytes& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

inline bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

/// Walk a canonical message and also inspect decoded payload leaves.
inline bool message_leaks(const Bytes& raw, const std::vector<Bytes>& needles_raw,
                          const std::vector<std::string>& needles_text) {
    std::string text = bytes_str(raw);
    for (const auto& n : needles_text)
        if (contains(text, n)) return true;
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (...) {
        return false;
    }
    if (!doc.contains("payload") || !doc["payload"].is_object()) return false;
    for (const auto& [key, value] : doc["payload"].items()) {
        (void)key;
        if (!value.is_string()) continue;
        std::string s = value.get<std::string>();
        for (const auto& n : needles_text)
            if (contains(s, n)) return true;
        try {
            Bytes decoded = base64_decode(s);
            for (const auto& n : needles_raw)
                if (contains(decoded, n)) return true;
        } catch (...) {
        }
    }
    return false;
}

}  // namespace detail

/// Brute-force replica of the (t-1)-privacy argument over Z_17: an observer
/// holding k < t shares finds every candidate secret completed by exactly
/// the same number of polynomials.
inline bool replica_subthreshold_uniform(size_t t, size_t observed_shares) {
    if (observed_shares >= t || t > 3) throw std::invalid_argument("replica built for t <= 3");
    const int m = 17;
    SeededRng rng(2024);
    SecretPolynomial poly = sample_polynomial(5, t, m, rng);
    std::vector<SharePoint> pts;
    auto xs = draw_abscissae(observed_shares, m, rng);
    for (const auto& x : xs) pts.push_back({x, eval_polynomial(poly, x)});

    std::vector<long> counts(m, 0);
    std::vector<int> coeff(t, 0);
    // enumerate all m^(t-1) completions per candidate constant term
    for (int sigma = 0; sigma < m; sigma++) {
        long total = 0;
        std::function<void(size_t)> walk = [&](size_t idx) {
            if (idx == t) {
                SecretPolynomial cand;
                cand.modulus = m;
                cand.coefficients.assign(coeff.begin(), coeff.end());
                for (const auto& pt : pts)
                    if (eval_polynomial(cand, pt.x) != pt.y) return;
                total++;
                return;
            }
            for (int c = 0; c < m; c++) {
                coeff[idx] = c;
                walk(idx + 1);
            }
        };
        coeff[0] = sigma;
        walk(1);
        counts[sigma] = total;
    }
    for (int sigma = 0; sigma < m; sigma++)
        if (counts[sigma] != counts[0] || counts[sigma] == 0) return false;
    return true;
}

/// Replica of the ordinates-without-abscissae case for a sub-threshold
/// observer: with k < t share values and no evaluation points, every
/// candidate secret is completed by exactly the same number of
/// (polynomial, abscissa-assignment) pairs.
inline bool replica_no_abscissae_uniform(size_t observed_ordinates) {
    const int m = 17;
    const size_t t = 3;
    if (observed_ordinates >= t) throw std::invalid_argument("replica built for k < t");
    SeededRng rng(2025);
    SecretPolynomial poly = sample_polynomial(9, t, m, rng);
    auto xs = draw_abscissae(observed_ordinates, m, rng);
    std::vector<mpz_class> ordinates;
    for (const auto& x : xs) ordinates.push_back(eval_polynomial(poly, x));

    std::vector<long> counts(m, 0);
    for (int sigma = 0; sigma < m; sigma++) {
        long total = 0;
        for (int a1 = 0; a1 < m; a1++)
            for (int a2 = 0; a2 < m; a2++) {
                SecretPolynomial cand;
                cand.modulus = m;
                cand.coefficients = {sigma, a1, a2};
                // ordered assignments of distinct nonzero points to ordinates
                std::function<long(size_t, unsigned)> assign = [&](size_t idx, unsigned used) -> long {
                    if (idx == ordinates.size()) return 1;
                    long ways = 0;
                    for (int x = 1; x < m; x++) {
                        if (used & (1u << x)) continue;
                        if (eval_polynomial(cand, x) == ordinates[idx])
                            ways += assign(idx + 1, used | (1u << x));
                    }
                    return ways;
                };
                total += assign(0, 0);
            }
        counts[sigma] = total;
    }
    for (int sigma = 0; sigma < m; sigma++)
        if (counts[sigma] != counts[0] || counts[sigma] == 0) return false;
    return true;
}

/// For passive-observer plans: nothing the observer saw or stored contains
/// the password, its scalar, or the unblinded g^S; plus the small-field
/// uniformity replicas.
inline LeakageReport assert_information_leakage(const ScenarioResult& result,
                                                const std::string& password,
                                                const GroupParams& params) {
    LeakageReport report;
    mpz_class scalar = password_to_scalar(password, params.q);
    mpz_class unblinded = mod_exp(params.g, scalar, params.p);
    std::vector<std::string> needles_text = {password, to_hex(scalar), to_hex(unblinded)};
    std::vector<Bytes> needles_raw = {str_bytes(password), to_bytes(scalar), to_bytes(unblinded)};

    for (const auto& [node, seen] : result.observed) {
        for (const auto& raw : seen)
            if (detail::message_leaks(raw, needles_raw, needles_text))
                report.fail("observer " + node + " saw protected bytes on the wire");
        auto it = result.stores.find(node);
        if (it != result.stores.end())
            for (const auto& n : needles_text)
                if (detail::contains(it->second, n))
                    report.fail("observer " + node + " store holds protected bytes");
    }

    size_t passive_holders = 0;
    for (const auto& [node, spec] : result.observed)
        if (node.rfind("shareholder", 0) == 0) passive_holders++;

    if (!result.observed.empty()) {
        if (!replica_subthreshold_uniform(3, 2))
            report.fail("sub-threshold replica: candidate secrets not uniform");
        if (passive_holders > 0 && !replica_no_abscissae_uniform(2))
            report.fail("no-abscissae replica: candidate secrets not uniform");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Fault-tolerance sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    size_t holders_down;
    bool success;
    std::string outcome;
};

/// Sign up, take k holders down, log in; k = 0..n. The login must succeed
/// exactly while k <= n - t.
inline std::vector<SweepRow> fault_tolerance_sweep(const GroupParams& params, size_t t, size_t n,
                                                   uint64_t seed) {
    std::vector<SweepRow> rows;
    for (size_t k = 0; k <= n; k++) {
        FaultPlan plan;
        plan.seed = seed + k;
        for (size_t i = 0; i < k; i++)
            plan.nodes[holder_addr(i)] = {NodeBehavior::Down, ByzStrategy::None, "", "reconstruction"};
        ScenarioOptions options;
        options.params = params;
        options.t = t;
        options.n = n;
        options.plan = plan;
        ScenarioResult r = run_scenario(options, {{"signup", "sweep-user", "sweep-pass", 1},
                                                  {"login", "sweep-user", "sweep-pass", 1}});
        rows.push_back({k, r.outcome == "success", r.outcome});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Wall-clock timing profile
// ---------------------------------------------------------------------------

/// Request/response table without the simulated fabric; used when measuring
/// real time under thread concurrency.
class DirectTransport : public Transport {
  public:
    using Handler = std::function<Message(const Message&)>;

    void add_node(const std::string& name, Handler handler) {
        handlers_[name] = std::move(handler);
    }

    Message call(const std::string& peer, const Message& request) override {
        auto it = handlers_.find(peer);
        if (it == handlers_.end()) throw TransportTimeout("no such peer: " + peer);
        return it->second(request);
    }

  private:
    std::map<std::string, Handler> handlers_;
};

struct TimingPoint {
    size_t concurrency;
    double sharing_mean_ms;
    double reconstruction_mean_ms;
};

/// Mean wall-clock latency of each phase with `level` clients in flight at
/// once, every client a distinct user on its own thread.
inline std::vector<TimingPoint> timing_profile(const GroupParams& params, size_t t, size_t n,
                                               const std::vector<size_t>& levels,
                                               size_t sessions_per_client, uint64_t seed) {
    std::vector<TimingPoint> points;
    for (size_t level : levels) {
        DirectTransport net;
        NullLog log;
        PeerDirectory peers;
        peers.dealer = "dealer";
        peers.service = "service";
        peers.logger = "logger";
        for (size_t i = 0; i < n; i++) peers.shareholders.push_back(holder_addr(i));

        std::vector<std::unique_ptr<LockedRng>> rngs;
        auto env_for = [&](uint64_t salt) {
            rngs.push_back(std::make_unique<LockedRng>(std::make_unique<SeededRng>(seed + salt)));
            NodeEnv env;
            env.net = &net;
            env.log = &log;
            env.rng = rngs.back().get();
            env.now_ms = [] {
                return static_cast<uint64_t>(
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count());
            };
            return env;
        };

        DealerEngine dealer(params, t, n, peers, env_for(1), RecordStore{});
        ServiceEngine service(params, t, n, peers, env_for(2), RecordStore{});
        std::vector<std::unique_ptr<ShareholderEngine>> holders;
        for (size_t i = 0; i < n; i++)
            holders.push_back(std::make_unique<ShareholderEngine>(holder_addr(i), params,
                                                                  env_for(100 + i), RecordStore{}));
        net.add_node("dealer", [&](const Message& m) { return dealer.handle(m); });
        net.add_node("service", [&](const Message& m) { return service.handle(m); });
        for (size_t i = 0; i < n; i++)
            net.add_node(holder_addr(i), [&, i](const Message& m) { return holders[i]->handle(m); });

        // unmeasured warm-up touches every code path once (allocator pools,
        // GMP scratch, lazy OpenSSL tables) before the clocks start
        {
            SeededRng rng(seed * 13 + 5);
            NodeEnv env;
            env.net = &net;
            env.log = &log;
            env.rng = &rng;
            ClientConfig warm_cfg{"dealer", "service", 3};
            CredentialState state;
            std::string user = "timing-warmup-" + std::to_string(level);
            if (client_signup(net, warm_cfg, env, params, user + "-up", user, "timing-pass", state)
                    .ok)
                client_login(net, warm_cfg, env, params, user + "-in", state, "timing-pass");
        }

        // each phase is measured under its own uniform concurrent load:
        // every thread fires that phase's requests at once
        std::vector<std::vector<CredentialState>> states(level);
        std::atomic<long> sharing_us{0}, recon_us{0}, shared{0}, reconstructed{0};
        ClientConfig cfg{"dealer", "service", 3};
        auto user_name = [&](size_t c, size_t s) {
            return "timing-u" + std::to_string(level) + "-" + std::to_string(c) + "-" +
                   std::to_string(s);
        };

        std::vector<std::thread> up_threads;
        for (size_t c = 0; c < level; c++) {
            up_threads.emplace_back([&, c] {
                SeededRng rng(seed * 31 + c);
                NodeEnv env;
                env.net = &net;
                env.log = &log;
                env.rng = &rng;
                for (size_t s = 0; s < sessions_per_client; s++) {
                    CredentialState state;
                    auto t0 = std::chrono::steady_clock::now();
                    ClientOutcome su = client_signup(net, cfg, env, params, user_name(c, s) + "-up",
                                                     user_name(c, s), "timing-pass", state);
                    auto t1 = std::chrono::steady_clock::now();
                    if (!su.ok) continue;
                    sharing_us += std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
                    shared++;
                    states[c].push_back(std::move(state));
                }
            });
        }
        for (auto& th : up_threads) th.join();

        std::vector<std::thread> in_threads;
        for (size_t c = 0; c < level; c++) {
            in_threads.emplace_back([&, c] {
                SeededRng rng(seed * 77 + c);
                NodeEnv env;
                env.net = &net;
                env.log = &log;
                env.rng = &rng;
                for (auto& state : states[c]) {
                    auto t0 = std::chrono::steady_clock::now();
                    ClientOutcome li = client_login(net, cfg, env, params, state.username + "-in",
                                                    state, "timing-pass");
                    auto t1 = std::chrono::steady_clock::now();
                    if (!li.ok) continue;
                    recon_us += std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
                    reconstructed++;
                }
            });
        }
        for (auto& th : in_threads) th.join();

        long up_done = std::max(shared.load(), 1l);
        long in_done = std::max(reconstructed.load(), 1l);
        points.push_back({level, sharing_us.load() / 1000.0 / up_done,
                          recon_us.load() / 1000.0 / in_done});
    }
    return points;
}

}  // namespace splitauth
