// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "splitauth/bigint.hpp"
#include "splitauth/group.hpp"

namespace splitauth {

struct InsufficientShares : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegeneratePointSet : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Degree <= t-1 polynomial over Z_m whose constant term is the shared secret.
struct SecretPolynomial {
    std::vector<mpz_class> coefficients;  // a_0 .. a_{t-1}
    mpz_class modulus;

    size_t threshold() const { return coefficients.size(); }
};

/// One participant's evaluation point. The abscissa is the secret half: it is
/// handed to the client and never stored server-side in the clear.
struct SharePoint {
    mpz_class x;
    mpz_class y;
};

struct LagrangeWeights {
    std::vector<mpz_class> weights;
    mpz_class modulus;
};

inline SecretPolynomial sample_polynomial(const mpz_class& secret, size_t t, const mpz_class& m,
                                          RandomSource& rng) {
    if (t == 0) throw std::invalid_argument("sample_polynomial: threshold must be >= 1");
    if (secret < 0 || secret >= m) throw std::invalid_argument("sample_polynomial: secret not in field");
    SecretPolynomial poly;
    poly.modulus = m;
    poly.coefficients.reserve(t);
    poly.coefficients.push_back(secret);
    for (size_t j = 1; j < t; j++) poly.coefficients.push_back(random_scalar(m, rng));
    return poly;
}

/// Horner evaluation mod m.
inline mpz_class eval_polynomial(const SecretPolynomial& poly, const mpz_class& x) {
    mpz_class acc = 0;
    for (auto it = poly.coefficients.rbegin(); it != poly.coefficients.rend(); ++it)
        acc = mod(acc * x + *it, poly.modulus);
    return acc;
}

/// n pairwise-distinct nonzero abscissae. Callers must treat the result as
/// secret material: it goes to the client and nowhere else.
inline std::vector<mpz_class> draw_abscissae(size_t n, const mpz_class& m, RandomSource& rng) {
    if (mpz_class(n) >= m) throw std::invalid_argument("draw_abscissae: n must be below the modulus");
    std::vector<mpz_class> xs;
    xs.reserve(n);
    while (xs.size() < n) {
        mpz_class x = random_nonzero_scalar(m, rng);
        if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    }
    return xs;
}

/// v_j = prod_{k != j} x_k * (x_k - x_j)^-1 mod m, the basis evaluated at 0.
/// The weights always sum to 1 mod m.
inline LagrangeWeights lagrange_weights(const std::vector<mpz_class>& abscissae, const mpz_class& m) {
    for (size_t i = 0; i < abscissae.size(); i++) {
        if (mod(abscissae[i], m) == 0)
            throw DegeneratePointSet("lagrange_weights: zero abscissa");
        for (size_t j = i + 1; j < abscissae.size(); j++)
            if (mod(abscissae[i] - abscissae[j], m) == 0)
                throw DegeneratePointSet("lagrange_weights: repeated abscissa");
    }
    LagrangeWeights out;
    out.modulus = m;
    out.weights.reserve(abscissae.size());
    for (size_t j = 0; j < abscissae.size(); j++) {
        mpz_class w = 1;
        for (size_t k = 0; k < abscissae.size(); k++) {
            if (k == j) continue;
            w = mod(w * abscissae[k], m);
            w = mod(w * mod_inv(abscissae[k] - abscissae[j], m), m);
        }
        out.weights.push_back(w);
    }
    return out;
}

/// Lagrange combination at x = 0 over exactly t points; in transport order,
/// the first t distinct abscissae win.
inline mpz_class reconstruct_at_zero(const std::vector<SharePoint>& points, size_t t,
                                     const mpz_class& m) {
    std::vector<SharePoint> chosen;
    for (const auto& pt : points) {
        bool dup = false;
        for (const auto& c : chosen)
            if (mod(c.x - pt.x, m) == 0) dup = true;
        if (!dup) chosen.push_back(pt);
        if (chosen.size() == t) break;
    }
    if (chosen.size() < t)
        throw InsufficientShares("reconstruct_at_zero: fewer than t distinct abscissae");
    std::vector<mpz_class> xs;
    xs.reserve(t);
    for (const auto& c : chosen) xs.push_back(c.x);
    LagrangeWeights w = lagrange_weights(xs, m);
    mpz_class acc = 0;
    for (size_t j = 0; j < t; j++) acc = mod(acc + chosen[j].y * w.weights[j], m);
    return acc;
}

/// Full coefficient recovery by Gaussian elimination on the Vandermonde
/// system; the independent second route against reconstruct_at_zero.
inline SecretPolynomial reconstruct_linear_system(const std::vector<SharePoint>& points,
                                                  const mpz_class& m) {
    const size_t t = points.size();
    if (t == 0) throw InsufficientShares("reconstruct_linear_system: no points");
    for (size_t i = 0; i < t; i++)
        for (size_t j = i + 1; j < t; j++)
            if (mod(points[i].x - points[j].x, m) == 0)
                throw DegeneratePointSet("reconstruct_linear_system: repeated abscissa");

    // Augmented [V | y] rows: 1, x_i, x_i^2, ..., x_i^{t-1}, y_i
    std::vector<std::vector<mpz_class>> rows(t, std::vector<mpz_class>(t + 1));
    for (size_t i = 0; i < t; i++) {
        mpz_class pw = 1;
        for (size_t j = 0; j < t; j++) {
            rows[i][j] = pw;
            pw = mod(pw * points[i].x, m);
        }
        rows[i][t] = mod(points[i].y, m);
    }

    for (size_t col = 0; col < t; col++) {
        size_t pivot = col;
        while (pivot < t && rows[pivot][col] == 0) pivot++;
        if (pivot == t)
            throw DegeneratePointSet("reconstruct_linear_system: singular system");
        std::swap(rows[col], rows[pivot]);
        mpz_class inv = mod_inv(rows[col][col], m);
        for (size_t j = col; j <= t; j++) rows[col][j] = mod(rows[col][j] * inv, m);
        for (size_t r = 0; r < t; r++) {
            if (r == col || rows[r][col] == 0) continue;
            mpz_class f = rows[r][col];
            for (size_t j = col; j <= t; j++)
                rows[r][j] = mod(rows[r][j] - f * rows[col][j], m);
        }
    }

    SecretPolynomial poly;
    poly.modulus = m;
    poly.coefficients.reserve(t);
    for (size_t i = 0; i < t; i++) poly.coefficients.push_back(rows[i][t]);
    return poly;
}

}  // namespace splitauth
