// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "splitauth/protocol/common.hpp"
#include "splitauth/protocol/shareholder.hpp"
#include "splitauth/protocol/service.hpp"

namespace splitauth {

/// The coordinator. Splits blinded secrets, drives reconstruction, and after
/// every login re-deals the next-session secret. At rest it holds nothing
/// but commitment vectors and registration flags.
class DealerEngine {
  public:
    static constexpr uint64_t kPhaseExpiryMs = 30000;
    static constexpr const char* kRole = "dealer";

    DealerEngine(GroupParams params, size_t t, size_t n, PeerDirectory peers, NodeEnv env,
                 RecordStore store)
        : params_(std::move(params)), t_(t), n_(n), peers_(std::move(peers)),
          env_(std::move(env)), store_(std::move(store)) {
        if (t_ < 1 || t_ > n_ || peers_.shareholders.size() != n_)
            throw std::invalid_argument("dealer: inconsistent t/n/shareholder addresses");
    }

    Message handle(const Message& req) {
        // The key relay works on identity-keyed records, not user records;
        // leaving it outside the user lock keeps the service free to call
        // back here while it serves that same user.
        if (req.type == msg::kKeyBackup) return handle_key_backup(req);
        if (req.type == msg::kKeyRestore) return handle_key_restore(req);
        auto guard = locks_.acquire(req.username);
        if (req.type == msg::kSignupInit) return handle_signup_init(req);
        if (req.type == msg::kSignupDeal) return handle_signup_deal(req);
        if (req.type == msg::kLoginRequest) return handle_login_request(req);
        if (req.type == msg::kReport) return handle_report(req);
        return make_plain_error(req, "unknown message type: " + req.type);
    }

    RecordStore& store() { return store_; }

  private:
    // ---- sharing phase ----

    Message handle_signup_init(const Message& req) {
        emit_log(env_, kRole, "sharing", req, "mc_received");
        auto rec = store_.get("user", req.username);
        if (rec && rec->value("registered", false)) {
            emit_log(env_, kRole, "sharing", req, "duplicate_user", ErrorCode::Cod100);
            return make_error(req, ErrorCode::Cod100, "username already registered");
        }
        if (auto phase = active_phase(req.username); phase && phase->session_id != req.session_id)
            return make_plain_error(req, "another phase in flight for this user");
        Message fwd = make_reply(req, msg::kSignupStoreMc, req.payload);
        emit_log(env_, kRole, "sharing", req, "mc_forwarded");
        Message svc;
        try {
            svc = env_.net->call(peers_.service, fwd);
        } catch (const TransportTimeout&) {
            return make_plain_error(req, "service unreachable; retry sign-up");
        }
        if (svc.is_error()) {
            if (auto code = svc.error_code())
                emit_log(env_, kRole, "sharing", req, "service_rejected_signup", *code);
            return svc;  // surface the service's verdict (COD150) to the client
        }
        store_.put("user", req.username, Json{{"registered", false}});
        set_phase(req.username, req.session_id);
        emit_log(env_, kRole, "sharing", req, "signup_acked");
        return make_reply(req, msg::kAck);
    }

    Message handle_signup_deal(const Message& req) {
        auto rec = store_.get("user", req.username);
        if (!rec || rec->value("registered", false))
            return make_plain_error(req, "no registration in progress");
        if (auto phase = active_phase(req.username); phase && phase->session_id != req.session_id)
            return make_plain_error(req, "another phase in flight for this user");
        emit_log(env_, kRole, "sharing", req, "deal_started");
        mpz_class s_prime = get_mpz(req.payload, "s_prime");
        CommittedDealing dealing =
            deal_committed(to_exponent(s_prime, params_), t_, n_, params_, *env_.rng);

        size_t delivered = distribute(req, dealing, /*require_all=*/true);
        if (delivered < n_) {
            // No partial dealing: scrub whatever was stored and abort.
            for (size_t i = 0; i < delivered; i++) {
                try {
                    env_.net->call(peers_.shareholders[i], make_reply(req, msg::kDiscardUser));
                } catch (const TransportTimeout&) {
                }
            }
            emit_log(env_, kRole, "sharing", req, "registration_aborted", std::nullopt,
                     "unreachable shareholder");
            return make_plain_error(req, "registration aborted: shareholder unreachable");
        }
        store_.put("user", req.username,
                   Json{{"registered", true},
                        {"commitments", ShareholderEngine::commitments_to_json(dealing.commitments)}});
        clear_phase(req.username);
        emit_log(env_, kRole, "sharing", req, "shares_distributed");
        Json out;
        Json xs = Json::array();
        for (const auto& sh : dealing.shares) xs.push_back(to_hex(sh.x));
        out["abscissae"] = xs;
        return make_reply(req, msg::kAbscissae, out);
    }

    // ---- reconstruction phase ----

    Message handle_login_request(const Message& req) {
        emit_log(env_, kRole, "reconstruction", req, "login_started");
        auto rec = store_.get("user", req.username);
        if (!rec || !rec->value("registered", false)) {
            emit_log(env_, kRole, "reconstruction", req, "unknown_user", ErrorCode::Cod600);
            return make_error(req, ErrorCode::Cod600, "user not registered");
        }
        if (auto phase = active_phase(req.username); phase && phase->session_id != req.session_id)
            return make_plain_error(req, "another phase in flight for this user");

        mpz_class s_prime = get_mpz(req.payload, "s_prime");
        mpz_class s_dprime = get_mpz(req.payload, "s_dprime");
        if (s_prime == s_dprime)
            return make_plain_error(req, "stale next-session secret (nonce reuse)");
        std::vector<mpz_class> xs;
        for (const auto& e : req.payload.at("abscissae")) xs.push_back(from_hex(e.get<std::string>()));
        if (xs.size() != n_) return make_plain_error(req, "abscissa vector has wrong length");
        Bytes mc_prime = get_bytes(req.payload, "mc_prime");
        Bytes ems = get_bytes(req.payload, "ems");
        CommitmentVector commitments =
            ShareholderEngine::commitments_from_json(rec->at("commitments"));

        // Collect (s_i, t_i) from every reachable holder against its abscissa.
        std::vector<SharePoint> verified;
        size_t tampered = 0;
        for (size_t i = 0; i < n_; i++) {
            Message ask = make_reply(req, msg::kReleaseShare);
            put_mpz(ask.payload, "x", xs[i]);
            Message resp;
            try {
                resp = env_.net->call(peers_.shareholders[i], ask);
            } catch (const TransportTimeout&) {
                emit_log(env_, kRole, "reconstruction", req, "holder_unreachable", std::nullopt,
                         peers_.shareholders[i]);
                continue;
            }
            if (resp.is_error()) {
                if (auto code = resp.error_code())
                    emit_log(env_, kRole, "reconstruction", req, "share_withheld", *code,
                             peers_.shareholders[i]);
                continue;
            }
            DualShare share{xs[i], get_mpz(resp.payload, "value"), get_mpz(resp.payload, "blind")};
            if (!verify_share(share, commitments, params_)) {
                tampered++;
                continue;
            }
            verified.push_back({share.x, share.value});
        }
        if (tampered > 0 && verified.size() >= t_) {
            emit_log(env_, kRole, "reconstruction", req, "tampered_shares_tolerated",
                     ErrorCode::Cod830, std::to_string(tampered) + " bad");
        } else if (tampered > 0 && verified.size() < t_) {
            emit_log(env_, kRole, "reconstruction", req, "too_many_tampered_shares",
                     ErrorCode::Cod850);
            return make_error(req, ErrorCode::Cod850,
                              "tampering left fewer than t verifiable shares");
        } else if (verified.size() < t_) {
            emit_log(env_, kRole, "reconstruction", req, "not_enough_shares", ErrorCode::Cod800);
            return make_error(req, ErrorCode::Cod800, "failed to collect t shares");
        }
        emit_log(env_, kRole, "reconstruction", req, "shares_verified");

        mpz_class rebuilt = reconstruct_at_zero(verified, t_, params_.q);
        emit_log(env_, kRole, "reconstruction", req, "secret_rebuilt");
        if (rebuilt != to_exponent(s_prime, params_)) {
            emit_log(env_, kRole, "reconstruction", req, "secret_mismatch", ErrorCode::Cod860);
            return make_error(req, ErrorCode::Cod860, "rebuilt secret differs from presented one");
        }

        Message fwd = make_reply(req, msg::kStoreEms);
        put_bytes(fwd.payload, "ems", ems);
        try {
            Message svc = env_.net->call(peers_.service, fwd);
            if (svc.is_error()) return make_plain_error(req, "service refused login envelope");
        } catch (const TransportTimeout&) {
            return make_plain_error(req, "service unreachable");
        }
        emit_log(env_, kRole, "reconstruction", req, "ems_forwarded");

        Staging staging;
        staging.session_id = req.session_id;
        staging.next_abscissae = draw_abscissae(n_, params_.q, *env_.rng);
        staging.next_secret = to_exponent(s_dprime, params_);
        staging.mc_prime = mc_prime;
        {
            std::lock_guard<std::mutex> g(state_mu_);
            staged_[req.username] = staging;
        }
        set_phase(req.username, req.session_id);
        emit_log(env_, kRole, "reconstruction", req, "rotation_staged");

        Json out;
        Json nxs = Json::array();
        for (const auto& x : staging.next_abscissae) nxs.push_back(to_hex(x));
        out["abscissae"] = nxs;
        return make_reply(req, msg::kAbscissae, out);
    }

    // The final triple: MS must open under the reported k', MC must open to
    // the reported blinded value under the reported k, and the reported MC'
    // must be the one the client sent here. Only then does the staged
    // dealing of the next-session secret replace the old shares.
    Message handle_report(const Message& req) {
        Staging staging;
        {
            std::lock_guard<std::mutex> g(state_mu_);
            auto it = staged_.find(req.username);
            if (it == staged_.end())
                return make_plain_error(req, "no staged rotation for this user");
            staging = it->second;
        }
        auto fail = [&](ErrorCode code, const std::string& detail) {
            {
                std::lock_guard<std::mutex> g(state_mu_);
                staged_.erase(req.username);
            }
            clear_phase(req.username);
            emit_log(env_, kRole, "reconstruction", req, "final_check_failed", code, detail);
            return make_error(req, code, detail);
        };

        Bytes k = get_bytes(req.payload, "k");
        mpz_class k_prime = get_mpz(req.payload, "k_prime");
        Bytes ms = get_bytes(req.payload, "ms");
        std::string w_hex = req.payload.at("w").get<std::string>();
        Bytes mc_prime_reported = get_bytes(req.payload, "mc_prime");

        auto mc_candidate = sym_decrypt(ServiceEngine::scalar_key(k_prime), ms);
        if (!mc_candidate) return fail(ErrorCode::Cod2000, "MS does not open under reported k'");
        if (k.size() != 32) return fail(ErrorCode::Cod2400, "bad reported client key");
        SymKey client_key{};
        std::copy(k.begin(), k.end(), client_key.begin());
        auto w_candidate = sym_decrypt(client_key, *mc_candidate);
        if (!w_candidate || *w_candidate != str_bytes(w_hex))
            return fail(ErrorCode::Cod2400, "MC does not open to the reported blinded value");
        if (mc_prime_reported != staging.mc_prime)
            return fail(ErrorCode::Cod2600, "reported MC' differs from the client's MC'");
        emit_log(env_, kRole, "reconstruction", req, "final_checks_passed");

        CommittedDealing dealing =
            deal_committed_at(staging.next_secret, t_, staging.next_abscissae, params_, *env_.rng);
        size_t delivered = distribute(req, dealing, /*require_all=*/false);
        if (delivered < t_) {
            emit_log(env_, kRole, "reconstruction", req, "rotation_install_failed", std::nullopt,
                     "fewer than t holders reachable");
            {
                std::lock_guard<std::mutex> g(state_mu_);
                staged_.erase(req.username);
            }
            clear_phase(req.username);
            return make_plain_error(req, "rotation install failed");
        }
        store_.put("user", req.username,
                   Json{{"registered", true},
                        {"commitments", ShareholderEngine::commitments_to_json(dealing.commitments)}});
        {
            std::lock_guard<std::mutex> g(state_mu_);
            staged_.erase(req.username);
        }
        clear_phase(req.username);
        emit_log(env_, kRole, "reconstruction", req, "rotation_installed");
        return make_reply(req, msg::kAck);
    }

    // ---- service key relay ----

    Message handle_key_backup(const Message& req) {
        const Json& shares = req.payload.at("shares");
        if (shares.size() != n_) return make_plain_error(req, "share count differs from n");
        for (size_t i = 0; i < n_; i++) {
            Message st = make_reply(req, msg::kKeyStore);
            st.payload = {{"identity", req.payload.at("identity")},
                          {"value", shares[i].at("value")},
                          {"blind", shares[i].at("blind")},
                          {"commitments", req.payload.at("commitments")}};
            try {
                Message resp = env_.net->call(peers_.shareholders[i], st);
                if (resp.is_error()) return make_plain_error(req, "key backup refused by holder");
            } catch (const TransportTimeout&) {
                return make_plain_error(req, "key backup aborted: holder unreachable");
            }
        }
        return make_reply(req, msg::kAck);
    }

    Message handle_key_restore(const Message& req) {
        Json released = Json::array();
        for (size_t i = 0; i < n_; i++) {
            Message ask = make_reply(req, msg::kKeyRelease);
            ask.payload = {{"identity", req.payload.at("identity")},
                           {"commitments", req.payload.at("commitments")}};
            Message resp;
            try {
                resp = env_.net->call(peers_.shareholders[i], ask);
            } catch (const TransportTimeout&) {
                continue;
            }
            if (resp.is_error()) continue;
            released.push_back(Json{{"holder", i},
                                    {"value", resp.payload.at("value")},
                                    {"blind", resp.payload.at("blind")}});
        }
        return make_reply(req, msg::kKeyShares, Json{{"shares", released}});
    }

    // ---- helpers ----

    /// Private triple to each holder, then the commitment broadcast. Returns
    /// how many holders confirmed both.
    size_t distribute(const Message& ctx, const CommittedDealing& dealing, bool require_all) {
        Json commitments = ShareholderEngine::commitments_to_json(dealing.commitments);
        size_t ok = 0;
        for (size_t i = 0; i < n_; i++) {
            Message st = make_reply(ctx, msg::kStoreShare);
            put_mpz(st.payload, "value", dealing.shares[i].value);
            put_mpz(st.payload, "blind", dealing.shares[i].blind);
            st.payload["digest"] = hex_encode(hash_abscissa(dealing.shares[i].x));
            Message bc = make_reply(ctx, msg::kCommitBroadcast);
            bc.payload["commitments"] = commitments;
            try {
                Message r1 = env_.net->call(peers_.shareholders[i], st);
                Message r2 = env_.net->call(peers_.shareholders[i], bc);
                if (!r1.is_error() && !r2.is_error())
                    ok++;
                else if (require_all)
                    return ok;
            } catch (const TransportTimeout&) {
                if (require_all) return ok;
            }
        }
        return ok;
    }

    struct Staging {
        std::string session_id;
        std::vector<mpz_class> next_abscissae;
        mpz_class next_secret;
        Bytes mc_prime;
    };

    struct Phase {
        std::string session_id;
        uint64_t started_ms = 0;
    };

    std::optional<Phase> active_phase(const std::string& username) {
        std::lock_guard<std::mutex> g(state_mu_);
        auto it = phases_.find(username);
        if (it == phases_.end()) return std::nullopt;
        if (env_.now_ms() - it->second.started_ms > kPhaseExpiryMs) {
            phases_.erase(it);
            return std::nullopt;
        }
        return it->second;
    }

    void set_phase(const std::string& username, const std::string& session_id) {
        std::lock_guard<std::mutex> g(state_mu_);
        phases_[username] = Phase{session_id, env_.now_ms()};
    }

    void clear_phase(const std::string& username) {
        std::lock_guard<std::mutex> g(state_mu_);
        phases_.erase(username);
    }

    GroupParams params_;
    size_t t_;
    size_t n_;
    PeerDirectory peers_;
    NodeEnv env_;
    RecordStore store_;
    UserLocks locks_;
    std::map<std::string, Staging> staged_;
    std::map<std::string, Phase> phases_;
    std::mutex state_mu_;
};

}  // namespace splitauth
