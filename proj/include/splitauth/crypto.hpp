// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "splitauth/bigint.hpp"
#include "splitauth/encoding.hpp"
#include "splitauth/rng.hpp"

namespace splitauth {

using SymKey = std::array<uint8_t, 32>;

inline Bytes sha256(const Bytes& data) {
    Bytes out(SHA256_DIGEST_LENGTH);
    SHA256(data.data(), data.size(), out.data());
    return out;
}

inline Bytes sha256(const std::string& data) { return sha256(str_bytes(data)); }

/// Keys are 256-bit everywhere; anything key-like that is not already 32
/// bytes (MS, which the protocol reuses as a key) goes through this.
inline SymKey derive_key(const Bytes& material) {
    Bytes d = sha256(material);
    SymKey k{};
    std::copy(d.begin(), d.end(), k.begin());
    return k;
}

inline SymKey random_key(RandomSource& rng) {
    SymKey k{};
    rng.fill(k.data(), k.size());
    return k;
}

namespace detail {
constexpr size_t kGcmNonceLen = 12;
constexpr size_t kGcmTagLen = 16;

struct CipherCtx {
    EVP_CIPHER_CTX* ctx;
    CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
        if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    }
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};
}  // namespace detail

/// AES-256-GCM, fresh random nonce per call. Layout: nonce || ciphertext || tag.
inline Bytes sym_encrypt(const SymKey& key, const Bytes& plaintext, RandomSource& rng) {
    detail::CipherCtx c;
    Bytes nonce = rng.bytes(detail::kGcmNonceLen);
    Bytes out(detail::kGcmNonceLen + plaintext.size() + detail::kGcmTagLen);
    std::copy(nonce.begin(), nonce.end(), out.begin());
    int len = 0;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1 ||
        EVP_EncryptUpdate(c.ctx, out.data() + detail::kGcmNonceLen, &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1)
        throw std::runtime_error("sym_encrypt failed");
    int fin = 0;
    if (EVP_EncryptFinal_ex(c.ctx, out.data() + detail::kGcmNonceLen + len, &fin) != 1)
        throw std::runtime_error("sym_encrypt failed");
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, detail::kGcmTagLen,
                            out.data() + detail::kGcmNonceLen + plaintext.size()) != 1)
        throw std::runtime_error("sym_encrypt: tag failed");
    return out;
}

/// Returns nullopt on tamper or wrong key; the protocol's decrypt-and-compare
/// checks branch on that outcome.
inline std::optional<Bytes> sym_decrypt(const SymKey& key, const Bytes& ciphertext) {
    if (ciphertext.size() < detail::kGcmNonceLen + detail::kGcmTagLen) return std::nullopt;
    detail::CipherCtx c;
    size_t body = ciphertext.size() - detail::kGcmNonceLen - detail::kGcmTagLen;
    Bytes out(body);
    int len = 0;
    if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(), ciphertext.data()) != 1)
        return std::nullopt;
    if (body > 0 &&
        EVP_DecryptUpdate(c.ctx, out.data(), &len, ciphertext.data() + detail::kGcmNonceLen,
                          static_cast<int>(body)) != 1)
        return std::nullopt;
    Bytes tag(ciphertext.end() - detail::kGcmTagLen, ciphertext.end());
    if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, detail::kGcmTagLen, tag.data()) != 1)
        return std::nullopt;
    int fin = 0;
    if (EVP_DecryptFinal_ex(c.ctx, out.data() + len, &fin) != 1) return std::nullopt;
    return out;
}

/// Deterministic 256-bit digest of the password reduced into the exponent
/// field. The password itself never travels or persists.
inline mpz_class password_to_scalar(const std::string& password, const mpz_class& q) {
    if (password.empty()) throw std::invalid_argument("password_to_scalar: empty password");
    return mod(from_bytes(sha256(password)), q);
}

}  // namespace splitauth
