// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "splitauth/crypto.hpp"
#include "splitauth/group.hpp"
#include "splitauth/logging.hpp"
#include "splitauth/message.hpp"
#include "splitauth/pedersen.hpp"
#include "splitauth/rng.hpp"
#include "splitauth/store.hpp"
#include "splitauth/transport.hpp"

namespace splitauth {

// Message types on the wire.
namespace msg {
// sharing phase
inline constexpr const char* kSignupInit = "signup_init";        // client -> dealer
inline constexpr const char* kSignupStoreMc = "signup_store_mc"; // dealer -> service
inline constexpr const char* kSignupRequestMs = "signup_request_ms";  // client -> service
inline constexpr const char* kSignupDeal = "signup_deal";        // client -> dealer
inline constexpr const char* kStoreShare = "store_share";        // dealer -> shareholder
inline constexpr const char* kCommitBroadcast = "commit_bcast";  // dealer -> all shareholders
inline constexpr const char* kDiscardUser = "discard_user";      // dealer -> shareholder
// reconstruction phase
inline constexpr const char* kLoginRequest = "login_request";    // client -> dealer
inline constexpr const char* kReleaseShare = "release_share";    // dealer -> shareholder
inline constexpr const char* kStoreEms = "store_ems";            // dealer -> service
inline constexpr const char* kLoginVerify = "login_verify";      // client -> service
inline constexpr const char* kLoginFinalize = "login_finalize";  // client -> service
inline constexpr const char* kReport = "report";                 // service -> dealer
// service key sub-protocol
inline constexpr const char* kKeyBackup = "key_backup";          // service -> dealer
inline constexpr const char* kKeyStore = "key_store";            // dealer -> shareholder
inline constexpr const char* kKeyRestore = "key_restore";        // service -> dealer
inline constexpr const char* kKeyRelease = "key_release";        // dealer -> shareholder
// logging
inline constexpr const char* kLog = "log";                       // any -> logger
// replies
inline constexpr const char* kAck = "ack";
inline constexpr const char* kAbscissae = "abscissae";
inline constexpr const char* kShare = "share";
inline constexpr const char* kMsIssued = "ms_issued";
inline constexpr const char* kKprimeEnvelope = "kprime_env";
inline constexpr const char* kSession = "session";
inline constexpr const char* kKeyShares = "key_shares";
inline constexpr const char* kReportText = "report_text";
}  // namespace msg

struct PeerDirectory {
    std::string dealer;
    std::string service;
    std::string logger;
    std::vector<std::string> shareholders;
};

/// Everything an engine needs from its host: transport, log sink, clock,
/// randomness. The host (node daemon, simnet, test) wires these up.
struct NodeEnv {
    Transport* net = nullptr;
    LogSink* log = nullptr;
    RandomSource* rng = nullptr;
    std::function<uint64_t()> now_ms = [] { return uint64_t{0}; };
};

inline void emit_log(const NodeEnv& env, const std::string& role, const std::string& phase,
                     const Message& ctx, const std::string& event,
                     std::optional<ErrorCode> code = std::nullopt, const std::string& detail = "") {
    if (!env.log) return;
    LogRecord r;
    r.timestamp_ms = env.now_ms();
    r.role = role;
    r.username = ctx.username;
    r.session_id = ctx.session_id;
    r.phase = phase;
    r.event = event;
    r.code = code;
    r.detail = detail;
    env.log->emit(r);
}

/// Per-username serialization. Engines hold the guard for the duration of one
/// message; distinct usernames proceed concurrently.
///
/// Nested-lock discipline, strictly one-directional: dealer guards may be
/// held while calling the service or shareholders, service guards while
/// calling shareholders (through the dealer's lock-free key relay), and
/// shareholder handlers never call out. The service's finalize path drops
/// its guard before the disclosure report so no service guard is ever held
/// across a call that takes a dealer guard.
class UserLocks {
  public:
    std::unique_lock<std::mutex> acquire(const std::string& username) {
        std::mutex* m;
        {
            std::lock_guard<std::mutex> g(mu_);
            auto& slot = locks_[username];
            if (!slot) slot = std::make_unique<std::mutex>();
            m = slot.get();
        }
        return std::unique_lock<std::mutex>(*m);
    }

  private:
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Group elements dealt as shares live mod q; this is the dealt image of a
/// mod-p element.
inline mpz_class to_exponent(const mpz_class& group_element, const GroupParams& params) {
    return mod(group_element, params.q);
}

}  // namespace splitauth
