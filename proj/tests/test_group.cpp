// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "splitauth/group.hpp"

using namespace splitauth;

namespace {
GroupParams small_fixture() {
    GroupParams p;
    p.p = 23;
    p.q = 11;
    p.g = 2;
    p.h = 8;  // 2^3 mod 23; trapdoor a = 3 known to the test suite only
    return p;
}
}  // namespace

TEST_CASE("mod_exp matches brute-force repeated multiplication") {
    CHECK(mod_exp(2, 11, 23) == 1);
    CHECK(mod_exp(2, 5, 23) == 9);
    CHECK(mod_exp(7, 0, 23) == 1);

    SeededRng rng(7);
    for (int i = 0; i < 50; i++) {
        mpz_class base = 1 + random_scalar(22, rng);
        mpz_class exp = random_scalar(40, rng);
        mpz_class expect = 1;
        for (mpz_class j = 0; j < exp; j++) expect = mod(expect * base, 23);
        CHECK(mod_exp(base, exp, 23) == expect);
    }
}

TEST_CASE("mod_inv reproduces the worked inverses") {
    CHECK(mod_inv(15, 17) == 8);
    CHECK(mod_inv(13, 17) == 4);
    CHECK(mod_inv(1, 101) == 1);
    CHECK_THROWS_AS(mod_inv(0, 17), NotInvertible);
    CHECK_THROWS_AS(mod_inv(17, 17), NotInvertible);
}

TEST_CASE("mod_inv is a two-sided inverse on random values") {
    SeededRng rng(11);
    for (mpz_class m : {mpz_class(17), mpz_class(23), mpz_class(1000003)}) {
        for (int i = 0; i < 1000; i++) {
            mpz_class v = random_nonzero_scalar(m, rng);
            CHECK(mod(v * mod_inv(v, m), m) == 1);
        }
    }
}

TEST_CASE("validate_params accepts the fixture and rejects broken settings") {
    GroupParams good = small_fixture();
    CHECK(mod_exp(good.g, good.q, good.p) == 1);
    CHECK(mod_exp(good.h, good.q, good.p) == 1);
    CHECK(validate_params(good));

    GroupParams bad_div = good;
    bad_div.q = 7;  // 7 does not divide 22
    CHECK_FALSE(validate_params(bad_div));

    GroupParams bad_prime = good;
    bad_prime.p = 17;
    bad_prime.q = 16;  // composite order
    CHECK_FALSE(validate_params(bad_prime));

    GroupParams bad_gen = good;
    bad_gen.g = 1;
    CHECK_FALSE(validate_params(bad_gen));

    GroupParams bad_h = good;
    bad_h.h = 5;  // 5^11 mod 23 = 22 != 1
    CHECK_FALSE(validate_params(bad_h));
}

TEST_CASE("generate_params yields valid groups of the requested width") {
    SeededRng rng(99);
    for (auto [pb, qb] : {std::pair<unsigned, unsigned>{32, 16},
                          {64, 32},
                          {166, 160}}) {
        GroupParams params = generate_params(pb, qb, rng);
        CHECK(bit_length(params.p) == pb);
        CHECK(bit_length(params.q) == qb);
        CHECK(validate_params(params));
    }
}

TEST_CASE("generate_params covers the large deployment widths") {
    SeededRng rng(1);
    for (auto [pb, qb] : {std::pair<unsigned, unsigned>{830, 256}, {2325, 256}}) {
        GroupParams params = generate_params(pb, qb, rng);
        CHECK(bit_length(params.p) == pb);
        CHECK(validate_params(params));
    }
}

TEST_CASE("generate_params is deterministic under a fixed seed") {
    SeededRng a(5), b(5);
    GroupParams pa = generate_params(64, 32, a);
    GroupParams pb = generate_params(64, 32, b);
    CHECK(pa == pb);
}

TEST_CASE("generate_params rejects q_bits >= p_bits") {
    SeededRng rng(1);
    CHECK_THROWS_AS(generate_params(8, 16, rng), std::invalid_argument);
}

TEST_CASE("generate_params surfaces an exhausted attempt budget") {
    SeededRng rng(1);
    CHECK_THROWS_AS(generate_params(166, 160, rng, 1), GenerationTimeout);
}

TEST_CASE("trapdoor variant exposes h = g^a") {
    SeededRng rng(3);
    auto [params, a] = generate_params_with_trapdoor(48, 24, rng);
    CHECK(mod_exp(params.g, a, params.p) == params.h);
}

TEST_CASE("subgroup members have order dividing q") {
    SeededRng rng(21);
    GroupParams params = generate_params(48, 24, rng);
    for (int i = 0; i < 20; i++) {
        mpz_class e = random_scalar(params.q, rng);
        mpz_class x = mod_exp(params.g, e, params.p);
        CHECK(mod_exp(x, params.q, params.p) == 1);
    }
}

TEST_CASE("random_scalar is deterministic under a seed and unbiased over Z_17") {
    SeededRng a(42), b(42);
    for (int i = 0; i < 20; i++) CHECK(random_scalar(1000003, a) == random_scalar(1000003, b));

    CHECK(random_scalar(1, a) == 0);

    SeededRng rng(1234);
    const int draws = 10000;
    std::array<int, 17> freq{};
    for (int i = 0; i < draws; i++) freq[random_scalar(17, rng).get_ui()]++;
    double expect = draws / 17.0;
    double sigma = std::sqrt(draws * (1.0 / 17.0) * (16.0 / 17.0));
    for (int f : freq) CHECK(std::abs(f - expect) < 5 * sigma);
}

TEST_CASE("parameter file round trip") {
    SeededRng rng(8);
    GroupParams params = generate_params(64, 32, rng);
    std::string path = (std::filesystem::temp_directory_path() / "splitauth_params_test.txt").string();
    save_params(params, path);
    GroupParams loaded = load_params(path);
    CHECK(loaded == params);
    std::filesystem::remove(path);
}
