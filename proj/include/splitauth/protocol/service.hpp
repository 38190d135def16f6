// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <string>

#include "splitauth/protocol/common.hpp"
#include "splitauth/protocol/shareholder.hpp"

namespace splitauth {

/// The application server. Holds MC/MS material per user, never a password
/// or blinded secret at rest, and grants the session after its own leg of
/// the mutual checks. The per-user key k' is a field scalar so the backup
/// sub-protocol can deal it directly; cipher keys are derived by hashing.
class ServiceEngine {
  public:
    struct Options {
        bool backup_keys;  // hold k' via the share sub-protocol instead of at rest
        Options() : backup_keys(false) {}
    };

    ServiceEngine(GroupParams params, size_t t, size_t n, PeerDirectory peers, NodeEnv env,
                  RecordStore store, Options options = Options())
        : params_(std::move(params)), t_(t), n_(n), peers_(std::move(peers)),
          env_(std::move(env)), store_(std::move(store)), options_(options) {}

    Message handle(const Message& req) {
        // finalize manages its own locking: it must not hold the user guard
        // across its call back to the dealer
        if (req.type == msg::kLoginFinalize) return handle_login_finalize(req);
        auto guard = locks_.acquire(req.username);
        if (req.type == msg::kSignupStoreMc) return handle_store_mc(req);
        if (req.type == msg::kSignupRequestMs) return handle_request_ms(req);
        if (req.type == msg::kStoreEms) return handle_store_ems(req);
        if (req.type == msg::kLoginVerify) return handle_login_verify(req);
        return make_plain_error(req, "unknown message type: " + req.type);
    }

    RecordStore& store() { return store_; }

    std::optional<std::string> session_token(const std::string& username) const {
        std::lock_guard<std::mutex> g(state_mu_);
        auto it = tokens_.find(username);
        if (it == tokens_.end()) return std::nullopt;
        return it->second;
    }

    /// Split k' across the shareholders via the dealer; only the abscissae
    /// and commitments stay here.
    bool backup_key(const std::string& identity, const mpz_class& key_scalar,
                    const Message& ctx) {
        CommittedDealing dealing = deal_committed(key_scalar, t_, n_, params_, *env_.rng);
        Json shares = Json::array();
        for (const auto& sh : dealing.shares) {
            Json e;
            put_mpz(e, "value", sh.value);
            put_mpz(e, "blind", sh.blind);
            shares.push_back(e);
        }
        Message backup = make_reply(ctx, msg::kKeyBackup);
        backup.username = ctx.username;
        backup.payload = {{"identity", identity},
                          {"shares", shares},
                          {"commitments", ShareholderEngine::commitments_to_json(dealing.commitments)}};
        try {
            Message reply = env_.net->call(peers_.dealer, backup);
            if (reply.is_error()) return false;
        } catch (const TransportTimeout&) {
            return false;
        }
        Json xs = Json::array();
        for (const auto& sh : dealing.shares) xs.push_back(to_hex(sh.x));
        store_.put("keybackup", identity,
                   Json{{"abscissae", xs},
                        {"commitments", ShareholderEngine::commitments_to_json(dealing.commitments)}});
        emit_log(env_, kRole, "system", ctx, "service_key_backed_up");
        return true;
    }

    /// Rebuild k' in volatile memory from the shareholders' released shares.
    std::optional<mpz_class> restore_key(const std::string& identity, const Message& ctx) {
        auto rec = store_.get("keybackup", identity);
        if (!rec) return std::nullopt;
        Message restore = make_reply(ctx, msg::kKeyRestore);
        restore.payload = {{"identity", identity}, {"commitments", rec->at("commitments")}};
        Message reply;
        try {
            reply = env_.net->call(peers_.dealer, restore);
        } catch (const TransportTimeout&) {
            return std::nullopt;
        }
        if (reply.is_error()) return std::nullopt;
        CommitmentVector commitments = ShareholderEngine::commitments_from_json(rec->at("commitments"));
        std::vector<mpz_class> xs;
        for (const auto& e : rec->at("abscissae")) xs.push_back(from_hex(e.get<std::string>()));
        std::vector<SharePoint> valid;
        for (const auto& e : reply.payload.at("shares")) {
            size_t holder = e.at("holder").get<size_t>();
            if (holder >= xs.size()) continue;
            DualShare share{xs[holder], from_hex(e.at("value").get<std::string>()),
                            from_hex(e.at("blind").get<std::string>())};
            if (!verify_share(share, commitments, params_)) {
                emit_log(env_, kRole, "system", ctx, "restored_share_rejected");
                continue;
            }
            valid.push_back({share.x, share.value});
        }
        if (valid.size() < t_) {
            emit_log(env_, kRole, "system", ctx, "key_restore_failed");
            return std::nullopt;
        }
        return reconstruct_at_zero(valid, t_, params_.q);
    }

    static constexpr const char* kRole = "service";

  private:
    Message handle_store_mc(const Message& req) {
        if (store_.get("user", req.username)) {
            emit_log(env_, kRole, "sharing", req, "duplicate_user", ErrorCode::Cod150);
            return make_error(req, ErrorCode::Cod150, "user already registered at service");
        }
        store_.put("pending_mc", req.username, Json{{"mc", req.payload.at("mc")}});
        emit_log(env_, kRole, "sharing", req, "mc_stored");
        return make_reply(req, msg::kAck);
    }

    Message handle_request_ms(const Message& req) {
        emit_log(env_, kRole, "sharing", req, "ms_requested");
        auto pending = store_.get("pending_mc", req.username);
        if (!pending) {
            emit_log(env_, kRole, "sharing", req, "early_service_call", ErrorCode::Cod170);
            return make_error(req, ErrorCode::Cod170, "no dealer-forwarded MC yet");
        }
        Bytes mc_client = get_bytes(req.payload, "mc");
        Bytes mc_dealer = get_bytes(*pending, "mc");
        if (mc_client != mc_dealer) {
            emit_log(env_, kRole, "sharing", req, "mc_mismatch", ErrorCode::Cod400);
            return make_error(req, ErrorCode::Cod400, "client MC differs from dealer-forwarded MC");
        }
        mpz_class kprime = random_scalar(params_.q, *env_.rng);
        Bytes ms = sym_encrypt(scalar_key(kprime), mc_client, *env_.rng);
        Json rec;
        put_bytes(rec, "mc", mc_client);
        put_bytes(rec, "ms", ms);
        if (options_.backup_keys) {
            std::string identity = "kprime/" + req.username;
            if (!backup_key(identity, kprime, req))
                return make_plain_error(req, "service key backup failed");
            rec["kprime_backup"] = identity;
        } else {
            rec["kprime"] = to_hex(kprime);
        }
        store_.put("user", req.username, rec);
        store_.erase("pending_mc", req.username);
        emit_log(env_, kRole, "sharing", req, "ms_issued");
        Json out;
        put_bytes(out, "ms", ms);
        return make_reply(req, msg::kMsIssued, out);
    }

    Message handle_store_ems(const Message& req) {
        auto rec = store_.get("user", req.username);
        if (!rec) return make_plain_error(req, "unknown user");
        Json updated = *rec;
        updated["stored_ems"] = req.payload.at("ems");
        store_.put("user", req.username, updated);
        emit_log(env_, kRole, "reconstruction", req, "ems_stored");
        return make_reply(req, msg::kAck);
    }

    // Check five: the stored and resent login envelopes must match byte for
    // byte, and their contents must open MC to the claimed blinded value.
    Message handle_login_verify(const Message& req) {
        auto rec = store_.get("user", req.username);
        if (!rec) return make_plain_error(req, "unknown user");
        if (!rec->contains("stored_ems"))
            return check_five_failed(req, "no dealer-forwarded login envelope");
        Bytes ems_client = get_bytes(req.payload, "ems");
        Bytes ems_dealer = get_bytes(*rec, "stored_ems");
        if (ems_client != ems_dealer)
            return check_five_failed(req, "stored/resent login envelope mismatch");
        Bytes ms = get_bytes(*rec, "ms");
        auto opened = sym_decrypt(derive_key(ms), ems_client);
        if (!opened) return check_five_failed(req, "login envelope does not open under MS");
        Json inner;
        try {
            inner = Json::parse(bytes_str(*opened));
        } catch (...) {
            return check_five_failed(req, "malformed login envelope");
        }
        Bytes k = base64_decode(inner.at("k").get<std::string>());
        std::string w_hex = inner.at("w").get<std::string>();
        if (k.size() != 32) return check_five_failed(req, "bad client key length");
        SymKey client_key{};
        std::copy(k.begin(), k.end(), client_key.begin());
        auto mc_plain = sym_decrypt(client_key, get_bytes(*rec, "mc"));
        if (!mc_plain || *mc_plain != str_bytes(w_hex))
            return check_five_failed(req, "MC does not open to the claimed blinded value");

        std::optional<mpz_class> kprime = load_kprime(*rec, req);
        if (!kprime) return make_plain_error(req, "service key unavailable");
        {
            std::lock_guard<std::mutex> g(state_mu_);
            login_pending_[req.username] = Pending{client_key, w_hex, *kprime};
        }
        Bytes envelope = sym_encrypt(derive_key(ms), str_bytes(to_hex(*kprime)), *env_.rng);
        emit_log(env_, kRole, "reconstruction", req, "kprime_sent");
        Json out;
        put_bytes(out, "env", envelope);
        return make_reply(req, msg::kKprimeEnvelope, out);
    }

    // Three-phase: read and stage under the user guard, disclose to the
    // dealer with no guard held (the dealer calls into this service while
    // holding its own user guards; holding ours here would nest the two
    // lock families in both directions), then revalidate and commit.
    Message handle_login_finalize(const Message& req) {
        Pending pending;
        Bytes mc_prime;
        Json report_payload;
        {
            auto guard = locks_.acquire(req.username);
            std::lock_guard<std::mutex> g(state_mu_);
            auto it = login_pending_.find(req.username);
            if (it == login_pending_.end())
                return make_plain_error(req, "no verified login in progress");
            pending = it->second;
            auto rec = store_.get("user", req.username);
            if (!rec) return make_plain_error(req, "unknown user");
            mc_prime = get_bytes(req.payload, "mc_prime");
            put_bytes(report_payload, "k",
                      Bytes(pending.client_key.begin(), pending.client_key.end()));
            put_mpz(report_payload, "k_prime", pending.kprime);
            report_payload["ms"] = rec->at("ms");
            report_payload["w"] = pending.w_hex;
            put_bytes(report_payload, "mc_prime", mc_prime);
        }
        emit_log(env_, kRole, "reconstruction", req, "mc_prime_received");

        // Stage the service-side rotation, then disclose this session's
        // material to the dealer; commit only once the dealer accepts.
        mpz_class k3 = random_scalar(params_.q, *env_.rng);
        Bytes ms_prime = sym_encrypt(scalar_key(k3), mc_prime, *env_.rng);
        Message report = make_reply(req, msg::kReport);
        report.payload = report_payload;
        emit_log(env_, kRole, "reconstruction", req, "report_sent");
        Message dealer_reply;
        try {
            dealer_reply = env_.net->call(peers_.dealer, report);
        } catch (const TransportTimeout&) {
            return make_plain_error(req, "dealer unreachable during rotation");
        }
        if (dealer_reply.is_error()) {
            emit_log(env_, kRole, "reconstruction", req, "rotation_rejected_by_dealer");
            Message out = dealer_reply;
            out.session_id = req.session_id;
            return out;
        }

        auto guard = locks_.acquire(req.username);
        {
            // the pending entry can only have been rewritten by a replay of
            // the identical envelope; anything else aborts the commit
            std::lock_guard<std::mutex> g(state_mu_);
            auto it = login_pending_.find(req.username);
            if (it == login_pending_.end() || it->second.client_key != pending.client_key ||
                it->second.w_hex != pending.w_hex || it->second.kprime != pending.kprime)
                return make_plain_error(req, "login state changed during rotation");
        }
        Json updated;
        put_bytes(updated, "mc", mc_prime);
        put_bytes(updated, "ms", ms_prime);
        if (options_.backup_keys) {
            std::string identity = "kprime/" + req.username;
            if (!backup_key(identity, k3, req)) return make_plain_error(req, "service key backup failed");
            updated["kprime_backup"] = identity;
        } else {
            updated["kprime"] = to_hex(k3);
        }
        store_.put("user", req.username, updated);  // stored_ems gone: one login per envelope

        std::string token = hex_encode(env_.rng->bytes(16));
        {
            std::lock_guard<std::mutex> g(state_mu_);
            tokens_[req.username] = token;
            login_pending_.erase(req.username);
        }
        emit_log(env_, kRole, "reconstruction", req, "session_opened");
        Json out;
        put_bytes(out, "ms_prime", ms_prime);
        out["token"] = token;
        return make_reply(req, msg::kSession, out);
    }

    Message check_five_failed(const Message& req, const std::string& detail) {
        emit_log(env_, kRole, "reconstruction", req, "login_envelope_check_failed",
                 ErrorCode::Cod2400, detail);
        return make_error(req, ErrorCode::Cod2400, detail);
    }

    std::optional<mpz_class> load_kprime(const Json& rec, const Message& ctx) {
        if (rec.contains("kprime")) return from_hex(rec.at("kprime").get<std::string>());
        if (rec.contains("kprime_backup"))
            return restore_key(rec.at("kprime_backup").get<std::string>(), ctx);
        return std::nullopt;
    }

  public:
    static SymKey scalar_key(const mpz_class& scalar) { return derive_key(str_bytes(to_hex(scalar))); }

  private:
    struct Pending {
        SymKey client_key{};
        std::string w_hex;
        mpz_class kprime;
    };

    GroupParams params_;
    size_t t_;
    size_t n_;
    PeerDirectory peers_;
    NodeEnv env_;
    RecordStore store_;
    Options options_;
    UserLocks locks_;
    std::map<std::string, Pending> login_pending_;
    std::map<std::string, std::string> tokens_;
    mutable std::mutex state_mu_;
};

}  // namespace splitauth
