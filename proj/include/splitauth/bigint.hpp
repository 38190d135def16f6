// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace splitauth {

using Bytes = std::vector<uint8_t>;

/// Lowercase hex, no leading zeros ("0" for zero). The canonical wire and
/// store encoding of every big integer in the system.
inline std::string to_hex(const mpz_class& v) {
    if (v < 0) throw std::invalid_argument("to_hex: negative value");
    char* s = mpz_get_str(nullptr, 16, v.get_mpz_t());
    std::string out(s);
    void (*freefn)(void*, size_t);
    mp_get_memory_functions(nullptr, nullptr, &freefn);
    freefn(s, out.size() + 1);
    return out;
}

inline mpz_class from_hex(const std::string& hex) {
    if (hex.empty()) throw std::invalid_argument("from_hex: empty string");
    mpz_class v;
    if (mpz_set_str(v.get_mpz_t(), hex.c_str(), 16) != 0 || v < 0)
        throw std::invalid_argument("from_hex: not a hex integer: " + hex);
    return v;
}

/// Big-endian byte export; zero exports as a single 0x00 byte.
inline Bytes to_bytes(const mpz_class& v) {
    if (v < 0) throw std::invalid_argument("to_bytes: negative value");
    if (v == 0) return Bytes{0};
    size_t count = 0;
    Bytes out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

inline mpz_class from_bytes(const uint8_t* data, size_t len) {
    mpz_class v;
    mpz_import(v.get_mpz_t(), len, 1, 1, 1, 0, data);
    return v;
}

inline mpz_class from_bytes(const Bytes& b) { return from_bytes(b.data(), b.size()); }

inline size_t bit_length(const mpz_class& v) {
    return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

/// value mod m, result always in [0, m).
inline mpz_class mod(const mpz_class& value, const mpz_class& m) {
    mpz_class r;
    mpz_mod(r.get_mpz_t(), value.get_mpz_t(), m.get_mpz_t());
    return r;
}

}  // namespace splitauth
