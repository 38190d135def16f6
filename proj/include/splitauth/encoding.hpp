// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "splitauth/bigint.hpp"

namespace splitauth {

inline std::string hex_encode(const Bytes& data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline Bytes hex_decode(const std::string& hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("hex_decode: odd length");
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("hex_decode: bad digit");
    };
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); i++)
        out[i] = static_cast<uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
    return out;
}

inline std::string base64_encode(const Bytes& data) {
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<uint8_t*>(out.data()), data.data(),
                            static_cast<int>(data.size()));
    out.resize(n);
    return out;
}

inline Bytes base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw std::invalid_argument("base64_decode: bad length");
    Bytes out(3 * (text.size() / 4));
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const uint8_t*>(text.data()),
                            static_cast<int>(text.size()));
    if (n < 0) throw std::invalid_argument("base64_decode: bad input");
    // EVP_DecodeBlock ignores '=' padding in its length accounting
    size_t pad = 0;
    if (!text.empty() && text[text.size() - 1] == '=') pad++;
    if (text.size() > 1 && text[text.size() - 2] == '=') pad++;
    out.resize(static_cast<size_t>(n) - pad);
    return out;
}

inline Bytes str_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

inline std::string bytes_str(const Bytes& b) { return std::string(b.begin(), b.end()); }

}  // namespace splitauth
