// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "splitauth/protocol/common.hpp"

namespace splitauth {

/// Everything the client keeps between sessions (the browser-local-storage
/// analogue). Replaced wholesale on every successful login; the password
/// itself never appears here.
struct CredentialState {
    static constexpr int kFormatVersion = 1;

    std::string username;
    mpz_class r;        // blinding nonce of S'
    mpz_class r_prime;  // nonce inside MC
    SymKey k{};         // client symmetric key
    Bytes mc;
    Bytes ms;
    std::vector<mpz_class> abscissae;

    Json to_json() const {
        Json xs = Json::array();
        for (const auto& x : abscissae) xs.push_back(to_hex(x));
        Json j;
        j["format_version"] = kFormatVersion;
        j["username"] = username;
        j["r"] = to_hex(r);
        j["r_prime"] = to_hex(r_prime);
        j["k"] = base64_encode(Bytes(k.begin(), k.end()));
        j["mc"] = base64_encode(mc);
        j["ms"] = base64_encode(ms);
        j["abscissae"] = xs;
        return j;
    }

    static CredentialState from_json(const Json& j) {
        if (j.value("format_version", 0) != kFormatVersion)
            throw std::invalid_argument("credential state: unsupported format version");
        CredentialState s;
        s.username = j.at("username").get<std::string>();
        s.r = from_hex(j.at("r").get<std::string>());
        s.r_prime = from_hex(j.at("r_prime").get<std::string>());
        Bytes kb = base64_decode(j.at("k").get<std::string>());
        if (kb.size() != s.k.size()) throw std::invalid_argument("credential state: bad key length");
        std::copy(kb.begin(), kb.end(), s.k.begin());
        s.mc = base64_decode(j.at("mc").get<std::string>());
        s.ms = base64_decode(j.at("ms").get<std::string>());
        for (const auto& e : j.at("abscissae")) s.abscissae.push_back(from_hex(e.get<std::string>()));
        return s;
    }
};

struct ClientOutcome {
    bool ok = false;
    std::optional<ErrorCode> code;  // protocol error code when one came back
    std::string detail;
    std::string token;  // login only
};

struct ClientConfig {
    std::string dealer;
    std::string service;
    int ms_retry = 3;  // COD170 is non-fatal: retry the service after a beat
};

namespace detail {

inline Message client_msg(const std::string& type, const std::string& session_id,
                          const std::string& username) {
    Message m;
    m.type = type;
    m.session_id = session_id;
    m.username = username;
    return m;
}

inline ClientOutcome failure_from(const Message& reply, const std::string& where) {
    ClientOutcome out;
    out.ok = false;
    out.code = reply.error_code();
    out.detail = where + ": " + reply.error_detail();
    return out;
}

}  // namespace detail

/// Sharing phase, client side. On success fills `state`; on failure `state`
/// is untouched and the outcome carries the protocol error.
inline ClientOutcome client_signup(Transport& net, const ClientConfig& cfg, const NodeEnv& env,
                                   const GroupParams& params, const std::string& session_id,
                                   const std::string& username, const std::string& password,
                                   CredentialState& state) {
    mpz_class secret = password_to_scalar(password, params.q);
    mpz_class r = random_scalar(params.q, *env.rng);
    mpz_class r_prime = random_scalar(params.q, *env.rng);
    SymKey k = random_key(*env.rng);
    BlindedSecret s_prime = blind_secret(secret, r, params);
    mpz_class w = commit_scalar(to_exponent(s_prime.value, params), r_prime, params);
    Bytes mc = sym_encrypt(k, str_bytes(to_hex(w)), *env.rng);

    Message init = detail::client_msg(msg::kSignupInit, session_id, username);
    put_bytes(init.payload, "mc", mc);
    Message ack;
    try {
        ack = net.call(cfg.dealer, init);
    } catch (const TransportTimeout&) {
        return {false, std::nullopt, "dealer unreachable", ""};
    }
    if (ack.is_error()) return detail::failure_from(ack, "signup_init");

    Message ms_req = detail::client_msg(msg::kSignupRequestMs, session_id, username);
    put_bytes(ms_req.payload, "mc", mc);
    Message ms_reply;
    for (int attempt = 0;; attempt++) {
        try {
            ms_reply = net.call(cfg.service, ms_req);
        } catch (const TransportTimeout&) {
            return {false, std::nullopt, "service unreachable", ""};
        }
        if (ms_reply.is_error() && ms_reply.error_code() == ErrorCode::Cod170 &&
            attempt < cfg.ms_retry)
            continue;
        break;
    }
    if (ms_reply.is_error()) return detail::failure_from(ms_reply, "signup_request_ms");
    Bytes ms = get_bytes(ms_reply.payload, "ms");

    Message deal = detail::client_msg(msg::kSignupDeal, session_id, username);
    put_mpz(deal.payload, "s_prime", s_prime.value);
    Message dealt;
    try {
        dealt = net.call(cfg.dealer, deal);
    } catch (const TransportTimeout&) {
        return {false, std::nullopt, "dealer unreachable", ""};
    }
    if (dealt.is_error()) return detail::failure_from(dealt, "signup_deal");

    state.username = username;
    state.r = r;
    state.r_prime = r_prime;
    state.k = k;
    state.mc = mc;
    state.ms = ms;
    state.abscissae.clear();
    for (const auto& e : dealt.payload.at("abscissae"))
        state.abscissae.push_back(from_hex(e.get<std::string>()));
    return {true, std::nullopt, "", ""};
}

/// All the fresh material a login carries, kept until the session either
/// rotates the state or dies.
struct LoginAttempt {
    Message request;            // login_request to the dealer
    Bytes ems;                  // resent to the service for the byte-equality check
    Bytes mc_prime;             // next-session MC
    mpz_class r_dprime;         // next r
    mpz_class r_tprime;         // next r'
    SymKey k_dprime{};          // next k
};

inline LoginAttempt client_login_prepare(const NodeEnv& env, const GroupParams& params,
                                         const std::string& session_id,
                                         const CredentialState& state,
                                         const std::string& password) {
    mpz_class secret = password_to_scalar(password, params.q);
    BlindedSecret s_prime = blind_secret(secret, state.r, params);
    mpz_class w = commit_scalar(to_exponent(s_prime.value, params), state.r_prime, params);

    LoginAttempt attempt;
    do {
        attempt.r_dprime = random_scalar(params.q, *env.rng);
    } while (attempt.r_dprime == state.r);  // S'' must differ from S'
    attempt.r_tprime = random_scalar(params.q, *env.rng);
    attempt.k_dprime = random_key(*env.rng);
    BlindedSecret s_dprime = blind_secret(secret, attempt.r_dprime, params);
    mpz_class w_next = commit_scalar(to_exponent(s_dprime.value, params), attempt.r_tprime, params);
    attempt.mc_prime = sym_encrypt(attempt.k_dprime, str_bytes(to_hex(w_next)), *env.rng);

    Json inner;
    inner["k"] = base64_encode(Bytes(state.k.begin(), state.k.end()));
    inner["w"] = to_hex(w);
    attempt.ems = sym_encrypt(derive_key(state.ms), str_bytes(inner.dump()), *env.rng);

    Message req = detail::client_msg(msg::kLoginRequest, session_id, state.username);
    put_mpz(req.payload, "s_prime", s_prime.value);
    put_mpz(req.payload, "s_dprime", s_dprime.value);
    Json xs = Json::array();
    for (const auto& x : state.abscissae) xs.push_back(to_hex(x));
    req.payload["abscissae"] = xs;
    put_bytes(req.payload, "mc_prime", attempt.mc_prime);
    put_bytes(req.payload, "ems", attempt.ems);
    attempt.request = req;
    return attempt;
}

/// Check six: the returned envelope must hold a k' under which MS opens back
/// to MC. Returns the service key scalar, or nothing if someone is lying.
inline std::optional<mpz_class> client_verify_service(const Bytes& envelope,
                                                      const CredentialState& state) {
    auto opened = sym_decrypt(derive_key(state.ms), envelope);
    if (!opened) return std::nullopt;
    mpz_class kprime;
    try {
        kprime = from_hex(bytes_str(*opened));
    } catch (...) {
        return std::nullopt;
    }
    auto mc_candidate = sym_decrypt(derive_key(*opened), state.ms);
    if (!mc_candidate || *mc_candidate != state.mc) return std::nullopt;
    return kprime;
}

/// The three client legs of the reconstruction phase against an already
/// prepared request. On success `state` holds the rotated values; on any
/// fatal error it is left exactly as it was.
inline ClientOutcome client_login_complete(Transport& net, const ClientConfig& cfg,
                                           const NodeEnv& env, CredentialState& state,
                                           const LoginAttempt& attempt) {
    const std::string& session_id = attempt.request.session_id;
    Message dealt;
    try {
        dealt = net.call(cfg.dealer, attempt.request);
    } catch (const TransportTimeout&) {
        return {false, std::nullopt, "dealer unreachable", ""};
    }
    if (dealt.is_error()) return detail::failure_from(dealt, "login_request");
    std::vector<mpz_class> next_abscissae;
    for (const auto& e : dealt.payload.at("abscissae"))
        next_abscissae.push_back(from_hex(e.get<std::string>()));

    Message verify = detail::client_msg(msg::kLoginVerify, session_id, state.username);
    put_bytes(verify.payload, "ems", attempt.ems);
    Message env_reply;
    try {
        env_reply = net.call(cfg.service, verify);
    } catch (const TransportTimeout&) {
        return {false, std::nullopt, "service unreachable", ""};
    }
    if (env_reply.is_error()) return detail::failure_from(env_reply, "login_verify");

    auto kprime = client_verify_service(get_bytes(env_reply.payload, "env"), state);
    if (!kprime) {
        emit_log(env, "client", "reconstruction", attempt.request, "service_key_check_failed",
                 ErrorCode::Cod2000, "MS does not open back to MC under returned k'");
        return {false, ErrorCode::Cod2000, "dealer or service lied about k'", ""};
    }

    Message fin = detail::client_msg(msg::kLoginFinalize, session_id, state.username);
    put_bytes(fin.payload, "mc_prime", attempt.mc_prime);
    Message sess;
    try {
        sess = net.call(cfg.service, fin);
    } catch (const TransportTimeout&) {
        return {false, std::nullopt, "service unreachable", ""};
    }
    if (sess.is_error()) return detail::failure_from(sess, "login_finalize");

    state.r = attempt.r_dprime;
    state.r_prime = attempt.r_tprime;
    state.k = attempt.k_dprime;
    state.mc = attempt.mc_prime;
    state.ms = get_bytes(sess.payload, "ms_prime");
    state.abscissae = next_abscissae;
    ClientOutcome out;
    out.ok = true;
    out.token = sess.payload.at("token").get<std::string>();
    return out;
}

/// Reconstruction phase, client side, end to end.
inline ClientOutcome client_login(Transport& net, const ClientConfig& cfg, const NodeEnv& env,
                                  const GroupParams& params, const std::string& session_id,
                                  CredentialState& state, const std::string& password) {
    LoginAttempt attempt = client_login_prepare(env, params, session_id, state, password);
    return client_login_complete(net, cfg, env, state, attempt);
}

}  // namespace splitauth
