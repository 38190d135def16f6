// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <string>

#include "splitauth/protocol/common.hpp"

namespace splitauth {

/// A shareholder stores (s_i, t_i, h(x_i)) plus the commitment vector per
/// user, releases the pair only against the right abscissa, and never sees
/// an abscissa at rest.
class ShareholderEngine {
  public:
    static constexpr int kSuspicionThreshold = 3;
    static constexpr uint64_t kCooloffMs = 60000;

    ShareholderEngine(std::string role, GroupParams params, NodeEnv env, RecordStore store)
        : role_(std::move(role)), params_(std::move(params)), env_(std::move(env)),
          store_(std::move(store)) {}

    Message handle(const Message& req) {
        auto guard = locks_.acquire(req.username);
        if (req.type == msg::kStoreShare) return handle_store_share(req);
        if (req.type == msg::kCommitBroadcast) return handle_commit_broadcast(req);
        if (req.type == msg::kReleaseShare) return handle_release(req);
        if (req.type == msg::kDiscardUser) return handle_discard(req);
        if (req.type == msg::kKeyStore) return handle_key_store(req);
        if (req.type == msg::kKeyRelease) return handle_key_release(req);
        return make_plain_error(req, "unknown message type: " + req.type);
    }

    RecordStore& store() { return store_; }

  private:
    Message handle_store_share(const Message& req) {
        Json rec = {{"value", req.payload.at("value")},
                    {"blind", req.payload.at("blind")},
                    {"digest", req.payload.at("digest")}};
        auto existing = store_.get("user", req.username);
        if (existing && existing->contains("commitments"))
            rec["commitments"] = existing->at("commitments");
        store_.put("user", req.username, rec);
        {
            std::lock_guard<std::mutex> g(susp_mu_);
            suspicion_.erase(req.username);
        }
        return make_reply(req, msg::kAck);
    }

    Message handle_commit_broadcast(const Message& req) {
        auto existing = store_.get("user", req.username);
        if (!existing) return make_plain_error(req, "no share stored for user");
        Json rec = *existing;
        rec["commitments"] = req.payload.at("commitments");
        store_.put("user", req.username, rec);
        return make_reply(req, msg::kAck);
    }

    Message handle_release(const Message& req) {
        auto rec = store_.get("user", req.username);
        if (!rec) return make_plain_error(req, "unknown user");
        {
            std::lock_guard<std::mutex> g(susp_mu_);
            auto it = suspicion_.find(req.username);
            if (it != suspicion_.end() && env_.now_ms() < it->second.suspended_until) {
                emit_log(env_, role_, "reconstruction", req, "release_refused_suspended");
                return make_plain_error(req, "suspended");
            }
        }
        mpz_class x = get_mpz(req.payload, "x");
        std::string digest = hex_encode(hash_abscissa(x));
        if (digest != rec->at("digest").get<std::string>()) {
            bool locked = false;
            {
                std::lock_guard<std::mutex> g(susp_mu_);
                auto& s = suspicion_[req.username];
                if (++s.consecutive_mismatches >= kSuspicionThreshold) {
                    s.suspended_until = env_.now_ms() + kCooloffMs;
                    s.consecutive_mismatches = 0;
                    locked = true;
                }
            }
            emit_log(env_, role_, "reconstruction", req, "abscissa_digest_mismatch",
                     ErrorCode::Cod700);
            if (locked) emit_log(env_, role_, "reconstruction", req, "suspicion_lockout");
            return make_error(req, ErrorCode::Cod700, "abscissa digest mismatch");
        }
        {
            std::lock_guard<std::mutex> g(susp_mu_);
            auto it = suspicion_.find(req.username);
            if (it != suspicion_.end()) it->second.consecutive_mismatches = 0;
        }
        if (!rec->contains("commitments"))
            return make_plain_error(req, "no commitments stored for user");
        DualShare share{x, from_hex(rec->at("value").get<std::string>()),
                        from_hex(rec->at("blind").get<std::string>())};
        CommitmentVector commitments = commitments_from_json(rec->at("commitments"));
        if (!verify_share(share, commitments, params_)) {
            emit_log(env_, role_, "reconstruction", req, "stored_share_inconsistent",
                     ErrorCode::Cod750);
            return make_error(req, ErrorCode::Cod750, "stored share fails commitment check");
        }
        emit_log(env_, role_, "reconstruction", req, "share_released");
        Json out;
        put_mpz(out, "value", share.value);
        put_mpz(out, "blind", share.blind);
        return make_reply(req, msg::kShare, out);
    }

    Message handle_discard(const Message& req) {
        store_.erase("user", req.username);
        emit_log(env_, role_, "sharing", req, "share_discarded");
        return make_reply(req, msg::kAck);
    }

    Message handle_key_store(const Message& req) {
        std::string identity = req.payload.at("identity").get<std::string>();
        Json rec = {{"value", req.payload.at("value")},
                    {"blind", req.payload.at("blind")},
                    {"commitments", req.payload.at("commitments")}};
        store_.put("servicekey", identity, rec);
        emit_log(env_, role_, "system", req, "service_key_share_stored");
        return make_reply(req, msg::kAck);
    }

    Message handle_key_release(const Message& req) {
        std::string identity = req.payload.at("identity").get<std::string>();
        auto rec = store_.get("servicekey", identity);
        if (!rec) return make_plain_error(req, "unknown key identity");
        if (req.payload.at("commitments") != rec->at("commitments")) {
            emit_log(env_, role_, "system", req, "service_key_commitment_mismatch");
            return make_plain_error(req, "commitment mismatch; share withheld");
        }
        Json out = {{"value", rec->at("value")}, {"blind", rec->at("blind")}};
        return make_reply(req, msg::kShare, out);
    }

  public:
    static CommitmentVector commitments_from_json(const Json& arr) {
        CommitmentVector cv;
        for (const auto& e : arr) cv.c.push_back(from_hex(e.get<std::string>()));
        return cv;
    }

    static Json commitments_to_json(const CommitmentVector& cv) {
        Json arr = Json::array();
        for (const auto& c : cv.c) arr.push_back(to_hex(c));
        return arr;
    }

  private:
    struct Suspicion {
        int consecutive_mismatches = 0;
        uint64_t suspended_until = 0;
    };

    std::string role_;
    GroupParams params_;
    NodeEnv env_;
    RecordStore store_;
    UserLocks locks_;
    std::map<std::string, Suspicion> suspicion_;
    std::mutex susp_mu_;
};

}  // namespace splitauth
