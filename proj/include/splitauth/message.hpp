// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "splitauth/bigint.hpp"
#include "splitauth/encoding.hpp"
#include "splitauth/errors.hpp"

namespace splitauth {

using Json = nlohmann::json;

/// One tagged protocol document. Canonical bytes are the JSON dump with
/// sorted field names, so two equal messages serialize byte-identically;
/// the protocol's byte-equality checks (stored vs resent ciphertexts)
/// depend on that.
struct Message {
    std::string type;
    std::string session_id;
    std::string username;
    Json payload = Json::object();

    Bytes canonical_bytes() const {
        // nlohmann::json keeps object keys sorted; dump() is canonical here
        Json doc = {{"type", type},
                    {"session_id", session_id},
                    {"username", username},
                    {"payload", payload}};
        std::string s = doc.dump();
        return Bytes(s.begin(), s.end());
    }

    static Message parse(const Bytes& raw) {
        Json doc = Json::parse(bytes_str(raw));
        Message m;
        m.type = doc.at("type").get<std::string>();
        m.session_id = doc.at("session_id").get<std::string>();
        m.username = doc.at("username").get<std::string>();
        m.payload = doc.at("payload");
        return m;
    }

    bool is_error() const { return type == "error"; }

    std::optional<ErrorCode> error_code() const {
        if (!is_error() || !payload.contains("code")) return std::nullopt;
        return parse_error_code(payload.at("code").get<std::string>());
    }

    std::string error_detail() const {
        return payload.value("detail", std::string());
    }
};

inline Message make_error(const Message& req, ErrorCode code, const std::string& detail) {
    Message m;
    m.type = "error";
    m.session_id = req.session_id;
    m.username = req.username;
    m.payload = {{"code", error_code_name(code)}, {"detail", detail}};
    return m;
}

/// Protocol failures that carry no taxonomy code (local refusals, transport
/// trouble, suspicion lockout) still travel as error messages.
inline Message make_plain_error(const Message& req, const std::string& detail) {
    Message m;
    m.type = "error";
    m.session_id = req.session_id;
    m.username = req.username;
    m.payload = {{"detail", detail}};
    return m;
}

inline Message make_reply(const Message& req, const std::string& type, Json payload = Json::object()) {
    Message m;
    m.type = type;
    m.session_id = req.session_id;
    m.username = req.username;
    m.payload = std::move(payload);
    return m;
}

// Payload field helpers: big integers ride as lowercase hex, byte strings as
// base64.

inline void put_mpz(Json& payload, const std::string& key, const mpz_class& v) {
    payload[key] = to_hex(v);
}

inline mpz_class get_mpz(const Json& payload, const std::string& key) {
    return from_hex(payload.at(key).get<std::string>());
}

inline void put_bytes(Json& payload, const std::string& key, const Bytes& b) {
    payload[key] = base64_encode(b);
}

inline Bytes get_bytes(const Json& payload, const std::string& key) {
    return base64_decode(payload.at(key).get<std::string>());
}

// Wire framing: 4-byte big-endian length prefix, then the canonical bytes.

constexpr uint32_t kMaxFrameLen = 1u << 24;

inline Bytes frame_message(const Message& m) {
    Bytes body = m.canonical_bytes();
    if (body.size() > kMaxFrameLen) throw std::length_error("frame_message: oversized message");
    Bytes out(4 + body.size());
    uint32_t len = static_cast<uint32_t>(body.size());
    out[0] = static_cast<uint8_t>(len >> 24);
    out[1] = static_cast<uint8_t>(len >> 16);
    out[2] = static_cast<uint8_t>(len >> 8);
    out[3] = static_cast<uint8_t>(len);
    std::copy(body.begin(), body.end(), out.begin() + 4);
    return out;
}

inline uint32_t parse_frame_length(const uint8_t header[4]) {
    return (static_cast<uint32_t>(header[0]) << 24) | (static_cast<uint32_t>(header[1]) << 16) |
           (static_cast<uint32_t>(header[2]) << 8) | static_cast<uint32_t>(header[3]);
}

}  // namespace splitauth
