#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "multcorr/charsum.hpp"
#include "multcorr/errors.hpp"

using namespace multcorr;

namespace {

bool near(std::complex<double> a, std::complex<double> b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("character groups: size, orthogonality, multiplicativity") {
    for (uint64_t q = 1; q <= 120; ++q) {
        CharacterGroup G(q);
        REQUIRE(G.size() == euler_phi(q));
        std::vector<int64_t> units;
        for (uint64_t n = 0; n < q; ++n)
            if (std::gcd(n, q) == 1) units.push_back(int64_t(n));
        if (q == 1) units = {0};
        for (uint64_t chi = 0; chi < G.size(); ++chi) {
            std::complex<double> s = 0;
            for (auto n : units) s += G.value(chi, n);
            CHECK(near(s, chi == 0 ? double(G.size()) : 0.0));
            CHECK(near(G.value(G.conjugate(chi), 5 % int64_t(q) + int64_t(q)), std::conj(G.value(chi, 5))));
        }
        for (auto n : units) {
            std::complex<double> s = 0;
            for (uint64_t chi = 0; chi < G.size(); ++chi) s += G.value(chi, n);
            CHECK(near(s, (n % int64_t(q)) == (1 % int64_t(q)) ? double(G.size()) : 0.0));
        }
        if (q % 6 == 0) {
            CHECK_FALSE(G.angle(1 % G.size(), 2).has_value());
            CHECK(G.value(0, 3) == std::complex<double>(0.0, 0.0));
        }
        for (uint64_t chi = 0; chi < G.size(); chi += 3)
            for (size_t i = 0; i < units.size(); i += 2)
                for (size_t j = 0; j < units.size(); j += 3)
                    CHECK(near(G.value(chi, units[i] * units[j]), G.value(chi, units[i]) * G.value(chi, units[j])));
    }
}

TEST_CASE("characters mod a prime agree with a primitive-root construction") {
    for (uint64_t q : {3, 5, 7, 11, 13, 101, 257}) {
        uint64_t g = 2;
        for (;; ++g) {
            uint64_t x = 1, order = 0;
            do {
                x = x * g % q;
                ++order;
            } while (x != 1);
            if (order == q - 1) break;
        }
        std::vector<uint64_t> dlog(q, 0);
        for (uint64_t k = 0, x = 1; k < q - 1; ++k, x = x * g % q) dlog[x] = k;
        std::vector<std::vector<uint64_t>> brute, got;
        CharacterGroup G(q);
        REQUIRE(G.exponent() == q - 1);
        for (uint64_t j = 0; j < q - 1; ++j) {
            std::vector<uint64_t> a, b;
            for (uint64_t n = 1; n < q; ++n) {
                a.push_back(j * dlog[n] % (q - 1));
                b.push_back(*G.angle(j, int64_t(n)));
            }
            brute.push_back(a);
            got.push_back(b);
        }
        std::sort(brute.begin(), brute.end());
        std::sort(got.begin(), got.end());
        CHECK(brute == got);
    }
}

TEST_CASE("induced and restricted characters partition the group") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        uint64_t W = 1 + rng() % 30, q0 = 1 + rng() % 12;
        CharacterGroup G(q0 * W);
        auto R = restricted_characters(G, W);
        CHECK(R.induced.size() == euler_phi(W));
        CHECK(R.members.size() + R.induced.size() == G.size());
        // induced characters only see n mod W
        for (auto chi : R.induced)
            for (int64_t n = 1; n < int64_t(q0 * W); ++n) {
                auto a = G.angle(chi, n);
                if (!a) continue;
                for (int64_t m = n % int64_t(W); m < int64_t(q0 * W); m += int64_t(W))
                    if (auto b = G.angle(chi, m)) CHECK(*a == *b);
            }
    }
    CHECK_THROWS_AS(restricted_characters(CharacterGroup(12), 5), DomainError);
}

TEST_CASE("twisted mean equals a direct sum") {
    std::vector<double> v(501);
    for (size_t n = 0; n < v.size(); ++n) v[n] = std::sin(double(n));
    TableView tv{v, 500};
    CharacterGroup G(20);
    for (uint64_t chi = 0; chi < G.size(); ++chi) {
        std::complex<double> s = 0;
        for (uint64_t n = 1; n <= 500; ++n) s += v[n] * std::conj(G.value(chi, int64_t(n)));
        CHECK(near(twisted_mean(tv, 500, G, chi), s));
    }
}

TEST_CASE("restricted identity holds with the correction term") {
    std::mt19937_64 rng(29);
    std::vector<double> v(3001);
    for (size_t n = 0; n < v.size(); ++n) v[n] = double(rng() % 1000) / 250.0 - 2.0;
    TableView tv{v, 3000};
    for (int trial = 0; trial < 40; ++trial) {
        uint64_t W = 1 + rng() % 24, q0 = 1 + rng() % 9, q = q0 * W;
        int64_t A;
        do A = int64_t(rng() % q);
        while (std::gcd(uint64_t(A), q) != 1);
        auto rep = restricted_identity_check(tv, 1000 + rng() % 2000, q0, W, A);
        CHECK(rep.residual <= 1e-9);
        bool compat = true;
        for (auto [p, k] : factorize(q0)) compat = compat && W % p == 0;
        CHECK(rep.compatible == compat);
        if (compat) CHECK(std::abs(rep.correction) <= 1e-9);
    }
}

TEST_CASE("restricted identity worked example") {
    std::vector<double> ones(1001, 1.0);
    TableView tv{ones, 1000};
    auto rep = restricted_identity_check(tv, 1000, 3, 2, 1);
    CHECK(rep.lhs == doctest::Approx(-0.002).epsilon(1e-12));
    CHECK(rep.lhs + rep.uncorrected_residual == doctest::Approx(0.003).epsilon(1e-9));  // the uncorrected formula gives +0.003
    CHECK_FALSE(rep.compatible);
    auto one = restricted_identity_check(tv, 1000, 1, 2, 1);
    CHECK(one.lhs == 0.0);
    CHECK(one.restricted_term == 0.0);
    CHECK(one.compatible);
    CHECK_THROWS_AS(restricted_identity_check(tv, 1000, 3, 2, 3), DomainError);
}

TEST_CASE("major arc probe for the constant function") {
    SieveTable ones(make_function("all_one"), 100000);
    auto rep = major_arc_probe(ones, 100000, 3, 2, 1, 1.0);
    CHECK(rep.interval_length == uint64_t(std::floor(1e5 / std::log(1e5))) + 1);
    CHECK(rep.rows.size() == 32);
    CHECK(rep.rows.front().first == 1);
    CHECK(rep.rows.back().first == 100000 - rep.interval_length + 1);
    CHECK(rep.max_normalized < 0.01);
    CHECK_THROWS_AS(major_arc_probe(ones, 100000, 13, 2, 1, 1.0), DomainError);  // q0 > log x
}
