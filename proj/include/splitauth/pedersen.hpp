// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "splitauth/bigint.hpp"
#include "splitauth/crypto.hpp"
#include "splitauth/group.hpp"
#include "splitauth/shamir.hpp"

namespace splitauth {

/// c_j = g^{a_j} h^{b_j} mod p for the value polynomial F and the companion
/// blinding polynomial K. Broadcast once per dealing; binds both polynomials.
struct CommitmentVector {
    std::vector<mpz_class> c;

    bool operator==(const CommitmentVector&) const = default;
};

/// One holder's (x, F(x), K(x)). x itself is never retained server-side;
/// the holder keeps (value, blind) plus a digest of x.
struct DualShare {
    mpz_class x;
    mpz_class value;  // F(x)
    mpz_class blind;  // K(x)
};

/// g^S h^r mod p: the only form in which a password-derived secret moves.
/// Perfectly hiding in S for uniform r.
struct BlindedSecret {
    mpz_class value;

    bool operator==(const BlindedSecret&) const = default;
};

inline mpz_class commit_scalar(const mpz_class& s, const mpz_class& t_val,
                               const GroupParams& params) {
    mpz_class gs = mod_exp(params.g, mod(s, params.q), params.p);
    mpz_class ht = mod_exp(params.h, mod(t_val, params.q), params.p);
    return mod(gs * ht, params.p);
}

inline BlindedSecret blind_secret(const mpz_class& s, const mpz_class& r,
                                  const GroupParams& params) {
    return BlindedSecret{commit_scalar(s, r, params)};
}

struct CommittedDealing {
    std::vector<DualShare> shares;  // abscissae included; hand them to the caller, keep nothing
    CommitmentVector commitments;
};

/// Dealing over caller-chosen abscissae; share rotation re-deals onto the
/// vector already handed to the client.
inline CommittedDealing deal_committed_at(const mpz_class& secret, size_t t,
                                          const std::vector<mpz_class>& abscissae,
                                          const GroupParams& params, RandomSource& rng) {
    if (t < 1 || t > abscissae.size())
        throw std::invalid_argument("deal_committed: need 1 <= t <= n");
    SecretPolynomial value_poly = sample_polynomial(mod(secret, params.q), t, params.q, rng);
    SecretPolynomial blind_poly = sample_polynomial(random_scalar(params.q, rng), t, params.q, rng);

    CommittedDealing out;
    out.shares.reserve(abscissae.size());
    for (const auto& x : abscissae)
        out.shares.push_back({x, eval_polynomial(value_poly, x), eval_polynomial(blind_poly, x)});
    out.commitments.c.reserve(t);
    for (size_t j = 0; j < t; j++)
        out.commitments.c.push_back(
            commit_scalar(value_poly.coefficients[j], blind_poly.coefficients[j], params));
    return out;
}

/// Sample F (constant term = secret) and K, evaluate both on n hidden random
/// abscissae, and commit to every coefficient pair.
inline CommittedDealing deal_committed(const mpz_class& secret, size_t t, size_t n,
                                       const GroupParams& params, RandomSource& rng) {
    if (mpz_class(n) >= params.q) throw std::invalid_argument("deal_committed: n must be below q");
    return deal_committed_at(secret, t, draw_abscissae(n, params.q, rng), params, rng);
}

/// g^s h^t == prod_j c_j^{x^j} mod p. A wrong value, blind, or abscissa all
/// flip the result.
inline bool verify_share(const DualShare& share, const CommitmentVector& commitments,
                         const GroupParams& params) {
    if (commitments.c.empty()) return false;
    mpz_class lhs = commit_scalar(share.value, share.blind, params);
    mpz_class rhs = 1;
    mpz_class xpow = 1;  // x^j reduced mod q: exponents of order-q elements
    for (const auto& cj : commitments.c) {
        rhs = mod(rhs * mod_exp(cj, xpow, params.p), params.p);
        xpow = mod(xpow * share.x, params.q);
    }
    return lhs == rhs;
}

/// The perfect-hiding witness: t' = (s - s') a^-1 + t mod q opens the same
/// commitment to any s'. Only meaningful with the setup trapdoor a, which
/// production parameter generation discards.
inline mpz_class hiding_witness(const mpz_class& s, const mpz_class& t_val, const mpz_class& s_prime,
                                const mpz_class& trapdoor, const mpz_class& q) {
    if (mod(trapdoor, q) == 0) throw std::invalid_argument("hiding_witness: zero trapdoor");
    return mod((s - s_prime) * mod_inv(trapdoor, q) + t_val, q);
}

/// Binding reduction: two openings of one commitment reveal the trapdoor.
inline mpz_class recover_trapdoor(const mpz_class& s, const mpz_class& t_val, const mpz_class& s_prime,
                                  const mpz_class& t_prime, const mpz_class& q) {
    return mod((s_prime - s) * mod_inv(t_val - t_prime, q), q);
}

/// 32-byte digest of the canonical hex encoding; what shareholders store in
/// place of the abscissa itself.
inline Bytes hash_abscissa(const mpz_class& x) { return sha256(to_hex(x)); }

}  // namespace splitauth
