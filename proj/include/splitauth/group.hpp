// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "splitauth/bigint.hpp"
#include "splitauth/rng.hpp"

namespace splitauth {

// 40 Miller-Rabin rounds: error probability < 4^-40 < 2^-80.
constexpr int kPrimalityRounds = 40;

struct GenerationTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Public algebraic setting: prime modulus p, prime subgroup order q | p-1,
/// and two order-q generators g, h with log_g(h) unknown to everyone after
/// setup. Exponents and shares live mod q; group elements live mod p.
struct GroupParams {
    mpz_class p;
    mpz_class q;
    mpz_class g;
    mpz_class h;
    unsigned p_bits = 0;

    bool operator==(const GroupParams&) const = default;
};

/// base^exponent mod p. Constant-pattern ladder for nonzero exponents.
inline mpz_class mod_exp(const mpz_class& base, const mpz_class& exponent, const mpz_class& p) {
    if (p <= 1) throw std::invalid_argument("mod_exp: modulus must exceed 1");
    if (exponent < 0) throw std::invalid_argument("mod_exp: negative exponent");
    if (exponent == 0) return 1;
    mpz_class b = mod(base, p);
    if (b == 0) return 0;
    mpz_class r;
    // powm_sec requires odd modulus and positive exponent; all protocol
    // moduli are odd primes.
    if (mpz_odd_p(p.get_mpz_t()))
        mpz_powm_sec(r.get_mpz_t(), b.get_mpz_t(), exponent.get_mpz_t(), p.get_mpz_t());
    else
        mpz_powm(r.get_mpz_t(), b.get_mpz_t(), exponent.get_mpz_t(), p.get_mpz_t());
    return r;
}

struct NotInvertible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Multiplicative inverse mod a prime modulus.
inline mpz_class mod_inv(const mpz_class& value, const mpz_class& modulus) {
    mpz_class v = mod(value, modulus);
    if (v == 0) throw NotInvertible("mod_inv: zero has no inverse");
    mpz_class r;
    if (mpz_invert(r.get_mpz_t(), v.get_mpz_t(), modulus.get_mpz_t()) == 0)
        throw NotInvertible("mod_inv: value not invertible");
    return r;
}

/// Uniform draw over [0, modulus). Rejection sampling: no modulo bias at all.
inline mpz_class random_scalar(const mpz_class& modulus, RandomSource& rng) {
    if (modulus <= 0) throw std::invalid_argument("random_scalar: modulus must be positive");
    if (modulus == 1) return 0;
    size_t bits = bit_length(modulus);
    size_t nbytes = (bits + 7) / 8;
    unsigned topmask = bits % 8 == 0 ? 0xff : (1u << (bits % 8)) - 1;
    for (;;) {
        Bytes buf = rng.bytes(nbytes);
        buf[0] &= static_cast<uint8_t>(topmask);
        mpz_class v = from_bytes(buf);
        if (v < modulus) return v;
    }
}

/// Uniform draw over [1, modulus).
inline mpz_class random_nonzero_scalar(const mpz_class& modulus, RandomSource& rng) {
    if (modulus <= 1) throw std::invalid_argument("random_nonzero_scalar: modulus too small");
    for (;;) {
        mpz_class v = random_scalar(modulus, rng);
        if (v != 0) return v;
    }
}

inline bool is_probable_prime(const mpz_class& v) {
    return mpz_probab_prime_p(v.get_mpz_t(), kPrimalityRounds) != 0;
}

inline bool validate_params(const GroupParams& params) {
    const mpz_class &p = params.p, &q = params.q, &g = params.g, &h = params.h;
    if (p <= 3 || q <= 1 || q >= p) return false;
    if (!is_probable_prime(p) || !is_probable_prime(q)) return false;
    if (mod(p - 1, q) != 0) return false;
    if (g <= 1 || g >= p || mod_exp(g, q, p) != 1) return false;
    if (h <= 1 || h >= p || mod_exp(h, q, p) != 1) return false;
    if (params.p_bits != 0 && bit_length(p) != params.p_bits) return false;
    return true;
}

namespace detail {

inline mpz_class random_prime(unsigned bits, RandomSource& rng, unsigned long& budget) {
    if (bits < 2) throw std::invalid_argument("random_prime: need at least 2 bits");
    mpz_class lo = mpz_class(1) << (bits - 1);
    for (; budget > 0; budget--) {
        mpz_class c = lo + random_scalar(lo, rng);
        mpz_setbit(c.get_mpz_t(), 0);
        if (is_probable_prime(c)) return c;
    }
    throw GenerationTimeout("prime search exhausted its attempt budget");
}

}  // namespace detail

struct GroupParamsWithTrapdoor {
    GroupParams params;
    mpz_class trapdoor;  // a with h = g^a; retained only by test fixtures
};

/// Pick q prime, then search p = q*c + 1 of the requested width; when the
/// cofactor window holds no prime (narrow p_bits - q_bits gaps) q is drawn
/// again. g is a random element raised to (p-1)/q, h = g^a for a fresh
/// secret a.
inline GroupParamsWithTrapdoor generate_params_with_trapdoor(unsigned p_bits, unsigned q_bits,
                                                             RandomSource& rng,
                                                             unsigned long attempt_budget = 400000) {
    if (q_bits < 2 || q_bits >= p_bits)
        throw std::invalid_argument("generate_params: need 2 <= q_bits < p_bits");
    unsigned long budget = attempt_budget;
    GroupParams params;
    params.p_bits = p_bits;
    const unsigned c_bits = p_bits - q_bits;
    const mpz_class c_lo = c_bits > 1 ? mpz_class(mpz_class(1) << (c_bits - 1)) : mpz_class(1);
    const mpz_class c_hi = mpz_class(1) << (c_bits + 1);
    bool found = false;
    while (!found) {
        params.q = detail::random_prime(q_bits, rng, budget);
        if (c_hi - c_lo < 8192) {
            // window small enough to sweep; odd cofactors give even p, skip them
            for (mpz_class c = c_lo; c < c_hi && !found; c++) {
                if (mpz_odd_p(c.get_mpz_t())) continue;
                mpz_class p = params.q * c + 1;
                if (bit_length(p) != p_bits) continue;
                if (budget == 0) throw GenerationTimeout("prime search exhausted its attempt budget");
                budget--;
                if (!is_probable_prime(p)) continue;
                params.p = p;
                found = true;
            }
        } else {
            for (unsigned long i = 0; i < 4ul * p_bits + 100 && !found; i++) {
                mpz_class c = c_lo + random_scalar(c_hi - c_lo, rng);
                mpz_clrbit(c.get_mpz_t(), 0);
                mpz_class p = params.q * c + 1;
                if (bit_length(p) != p_bits) continue;
                if (budget == 0) throw GenerationTimeout("prime search exhausted its attempt budget");
                budget--;
                if (!is_probable_prime(p)) continue;
                params.p = p;
                found = true;
            }
        }
    }
    mpz_class cofactor = (params.p - 1) / params.q;
    for (;; budget--) {
        if (budget == 0) throw GenerationTimeout("generator search exhausted its attempt budget");
        mpz_class u = 2 + random_scalar(params.p - 3, rng);
        mpz_class g = mod_exp(u, cofactor, params.p);
        if (g != 1) {
            params.g = g;
            break;
        }
    }
    mpz_class a = random_nonzero_scalar(params.q, rng);
    params.h = mod_exp(params.g, a, params.p);
    return {params, a};
}

/// Production entry point: the trapdoor a is generated, used, and dropped.
inline GroupParams generate_params(unsigned p_bits, unsigned q_bits, RandomSource& rng,
                                   unsigned long attempt_budget = 400000) {
    return generate_params_with_trapdoor(p_bits, q_bits, rng, attempt_budget).params;
}

// Parameter file: flat key-value lines, hex values, distributed identically
// to every node at setup.

inline void save_params(const GroupParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write params file: " + path);
    out << "p = " << to_hex(params.p) << "\n"
        << "q = " << to_hex(params.q) << "\n"
        << "g = " << to_hex(params.g) << "\n"
        << "h = " << to_hex(params.h) << "\n"
        << "p_bits = " << params.p_bits << "\n";
}

inline std::map<std::string, std::string> parse_kv_file(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

inline GroupParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read params file: " + path);
    auto kv = parse_kv_file(in);
    for (const char* key : {"p", "q", "g", "h"})
        if (!kv.count(key)) throw std::runtime_error("params file missing field: " + std::string(key));
    GroupParams params;
    params.p = from_hex(kv["p"]);
    params.q = from_hex(kv["q"]);
    params.g = from_hex(kv["g"]);
    params.h = from_hex(kv["h"]);
    params.p_bits = kv.count("p_bits") ? static_cast<unsigned>(std::stoul(kv["p_bits"])) : 0;
    return params;
}

}  // namespace splitauth
