#include <doctest.h>

#include <cmath>
#include <map>

#include "multcorr/errors.hpp"
#include "multcorr/wtrick.hpp"

using namespace multcorr;

namespace {

bool contains(const std::vector<std::string>& audit, const std::string& needle) {
    for (const auto& a : audit)
        if (a.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("W context") {
    auto c = make_wcontext(10000);
    CHECK(c.primes == std::vector<uint64_t>{2});
    CHECK(c.W == 2);
    CHECK(c.W_tilde == 2);
    CHECK(c.w_of_x == doctest::Approx(std::log(std::log(10000.0))));

    auto small = make_wcontext(100);
    CHECK(small.w_of_x == 2.0);
    CHECK(small.W == 2);
    CHECK(contains(small.audit, "clamped"));

    auto big = make_wcontext(uint64_t(1) << 62);  // log log x ~ 3.76
    CHECK(big.W == 6);

    auto q = make_wcontext(10000, {.q_star = 8});
    CHECK(q.W_tilde == 16);
    CHECK_THROWS_AS(make_wcontext(10000, {.q_star = 3}), DomainError);  // not w-smooth
    CHECK_THROWS_AS(make_wcontext(10000, {.q_star = uint64_t(1) << 22}), InvariantError);
    CHECK_THROWS_AS(make_wcontext(1000000, {.w_of_x = 30.0}), InvariantError);
    CHECK_THROWS_AS(make_wcontext(15), DomainError);

    // W~ too large for (log x)^B1: w drops to the previous prime
    auto red = make_wcontext(1000000000, {.q_star = uint64_t(1) << 24});
    CHECK(red.W == 2);
    CHECK(red.W_tilde == (uint64_t(1) << 25));
    CHECK(contains(red.audit, "reduced"));
}

TEST_CASE("exceptional prime squares match a direct search") {
    const uint64_t T = 5000;
    for (double C : {1.0, 1.5, 2.0}) {
        const double bound = std::pow(std::log(double(T)), C);
        for (uint64_t n = 1; n <= T; ++n) {
            bool expect = false;
            for (uint64_t d = 1; d * d <= n; ++d)
                if (n % (d * d) == 0 && double(d) > bound) expect = true;
            CHECK(exceptional_prime_square(n, T, C) == expect);
        }
    }
    CHECK_THROWS_AS(exceptional_prime_square(T + 1, T, 2.0), DomainError);
}

TEST_CASE("smooth part and truncation split") {
    std::vector<uint64_t> primes{2, 3};
    for (uint64_t n = 1; n <= 5000; ++n) {
        uint64_t w = smooth_part(n, primes);
        CHECK(n % w == 0);
        CHECK((n / w) % 2 != 0);
        CHECK((n / w) % 3 != 0);
        uint64_t m = w;
        while (m % 2 == 0) m /= 2;
        while (m % 3 == 0) m /= 3;
        CHECK(m == 1);
    }
    auto ctx = make_wcontext(1000000000);
    REQUIRE(ctx.primes == std::vector<uint64_t>{2, 3});
    for (uint64_t w : {1ull, 12ull, 72ull, 3ull << 20, 1ull << 33, 3ull * (1ull << 31)}) {
        auto t = smooth_truncation_check(w, ctx);
        CHECK(t.w1 * t.w2 * t.w2 == w);
        for (uint64_t p : {2ull, 3ull}) CHECK(t.w1 % (p * p) != 0);
        const double lt = std::log(1e9);
        CHECK(t.applicable == (double(w) > std::pow(lt, 3 * ctx.C)));
    }
    CHECK_THROWS_AS(smooth_truncation_check(10, ctx), DomainError);
}

TEST_CASE("residue mean table") {
    std::vector<double> v(1001);
    for (size_t n = 0; n < v.size(); ++n) v[n] = double(n % 7);
    TableView tv{v, 1000};
    auto ctx = make_wcontext(1000);
    auto t = residue_mean_table(tv, 1000, 6, ctx);
    CHECK(t.keys == std::vector<uint64_t>{1, 3, 5});
    for (uint64_t A : t.keys) {
        double s = 0.0;
        for (uint64_t n = 1; n <= 1000; ++n)
            if (n % 6 == A) s += v[n];
        CHECK(t.at(A) == doctest::Approx(6.0 * s / 1000.0).epsilon(1e-14));
        CHECK(t.at(A + 6) == t.at(A));
    }
    CHECK_THROWS_AS(t.at(2), DomainError);
    CHECK_THROWS_AS(residue_mean_table(tv, 1001, 6, ctx), DomainError);
}

TEST_CASE("smooth partition of the constant function counts exact 2-adic valuations") {
    std::vector<double> ones(1001, 1.0);
    std::vector<TableView> tabs{{ones, 1000}};
    LinearSystem sys({{{1}, 0}});
    auto K = ConvexBody::interval(0, 1, -1, 0);
    auto ctx = make_wcontext(1000);
    auto rep = exact_smooth_partition(tabs, sys, K, 1000, ctx, 3);
    CHECK(rep.lattice_count == 1000);
    CHECK(rep.total == 1000.0);
    CHECK(rep.correlation == 1000.0);
    CHECK(rep.identity_holds);
    std::map<uint64_t, uint64_t> expect;
    for (uint64_t n = 1; n <= 1000; ++n) ++expect[smooth_part(n, {2})];
    REQUIRE(rep.groups.size() == expect.size());
    for (const auto& g : rep.groups) CHECK(g.count == expect[g.w[0]]);
}

TEST_CASE("smooth partition on two variables matches grouped direct sums") {
    std::vector<double> v(2001);
    for (size_t n = 0; n < v.size(); ++n) v[n] = 1.0 / double(1 + n % 11);
    std::vector<TableView> tabs{{v, 2000}, {v, 2000}};
    LinearSystem sys({{{1, 0}, 0}, {{1, 1}, 0}});
    ConvexBody K(2, {{{-1, 0}, 0, -1}, {{0, -1}, 0, -1}, {{1, 0}, 1, 0}, {{0, 1}, 1, 0}});
    auto ctx = make_wcontext(1000000000);  // primes 2 and 3
    auto rep = exact_smooth_partition(tabs, sys, K, 60, ctx, 2);
    std::map<std::vector<uint64_t>, double> expect;
    for (int64_t a = 1; a <= 60; ++a)
        for (int64_t b = 1; b <= 60; ++b)
            expect[{smooth_part(uint64_t(a), ctx.primes), smooth_part(uint64_t(a + b), ctx.primes)}] +=
                v[a] * v[a + b];
    REQUIRE(rep.groups.size() == expect.size());
    for (const auto& g : rep.groups) CHECK(g.sum == doctest::Approx(expect[g.w]).epsilon(1e-12));
    CHECK(rep.relative_error <= 1e-12);
}

TEST_CASE("stability scan and envelope") {
    SieveTable ones(make_function("all_one"), 100000);
    auto rep = stability_scan(ones, 100000, 2.0, 4, 1);
    CHECK(rep.max_normalized < 0.01);
    CHECK(rep.rows.size() >= 32);
    for (size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].x_prime > rep.rows[i - 1].x_prime);
    double lp = 0.0;
    for (uint64_t p : primes_up_to(100000))
        if (p != 2) lp += std::log1p(1.0 / double(p));
    CHECK(rep.envelope == doctest::Approx(2.0 / std::log(1e5) * std::exp(lp)).epsilon(1e-12));
    CHECK_THROWS_AS(stability_scan(ones, 100000, 2.0, 4, 2), DomainError);
    CHECK_THROWS_AS(stability_scan(ones, 100000, 1.0, 13, 1), DomainError);  // q >= log x
}
