#include <doctest.h>

#include <cstring>
#include <random>

#include "multcorr/errors.hpp"
#include "multcorr/linsys.hpp"

using namespace multcorr;

namespace {

// n in (num/den) K, checked exactly with the half-space data itself
bool inside(const ConvexBody& K, std::span<const int64_t> n, int64_t num, int64_t den) {
    for (const auto& h : K.halfspaces()) {
        Rational lhs = 0;
        for (size_t k = 0; k < n.size(); ++k) lhs += h.normal[k] * n[k];
        if (lhs > Rational(num, den) * h.offset + h.slack) return false;
    }
    return true;
}

std::vector<std::vector<int64_t>> box_scan(const ConvexBody& K, int64_t num, int64_t den) {
    const size_t s = K.dim();
    const int64_t R = num / den + 1;
    std::vector<std::vector<int64_t>> out;
    std::vector<int64_t> n(s, -R);
    while (true) {
        if (inside(K, n, num, den)) out.push_back(n);
        size_t j = s;
        while (j > 0) {
            --j;
            if (++n[j] <= R) break;
            n[j] = -R;
            if (j == 0) return out;
        }
    }
}

ConvexBody random_body(std::mt19937_64& rng, size_t s) {
    auto pick = [&](int lo, int hi) { return lo + int(rng() % uint64_t(hi - lo + 1)); };
    while (true) {
        std::vector<Halfspace> hs;
        const int m = pick(1, 4);
        for (int i = 0; i < m; ++i) {
            Halfspace h;
            bool nonzero = false;
            for (size_t k = 0; k < s; ++k) {
                h.normal.push_back(Rational(pick(-3, 3), pick(1, 2)));
                nonzero = nonzero || h.normal.back() != Rational(0);
            }
            if (!nonzero) continue;
            h.offset = Rational(pick(-2, 4), pick(1, 3));
            h.slack = pick(-2, 2);
            hs.push_back(h);
        }
        try {
            return ConvexBody(s, hs);
        } catch (const DomainError&) {
        }
    }
}

}  // namespace

TEST_CASE("parse_rational") {
    CHECK(parse_rational("3/4") == Rational(3, 4));
    CHECK(parse_rational("-2") == Rational(-2));
    CHECK(parse_rational("0.125") == Rational(1, 8));
    CHECK(parse_rational("-1.5") == Rational(-3, 2));
    CHECK_THROWS(parse_rational("x"));
    CHECK_THROWS(parse_rational("1/0"));
}

TEST_CASE("linear systems validate their forms") {
    CHECK_NOTHROW(LinearSystem({{{1, 0}, 0}, {{0, 1}, 1}, {{1, 1}, 0}}));
    CHECK_THROWS_AS(LinearSystem({{{1, 2}, 0}, {{2, 4}, 1}}), DomainError);  // proportional
    CHECK_THROWS_AS(LinearSystem({{{1}, 0}, {{1}, 2}}), DomainError);
    LinearSystem twin({{{1}, 0}, {{1}, 2}}, true);
    CHECK_FALSE(twin.pairwise_independent());
    CHECK_THROWS_AS(LinearSystem({{{0, 0}, 3}}), DomainError);            // zero form
    CHECK_THROWS_AS(LinearSystem({{{1, 0}, 0}, {{1}, 0}}), DomainError);  // ragged
    LinearForm f{{3, -2}, 5};
    std::vector<int64_t> n{4, 1};
    CHECK(f(n) == 15);
    LinearForm huge{{INT64_MAX / 2, INT64_MAX / 2}, 0};
    std::vector<int64_t> m{3, 3};
    CHECK_THROWS_AS(huge(m), OverflowError);
}

TEST_CASE("bodies need an interior point") {
    CHECK_THROWS_AS(ConvexBody(1, {{{1}, 0, 0}, {{-1}, 0, 0}}), DomainError);
    CHECK_THROWS_AS(ConvexBody(2, {{{1, 1}, -3, 0}}), DomainError);  // misses [-1,1]^2
    auto sq = ConvexBody::box(2, 0, 1);
    auto V = sq.dilate(10).vertices();
    CHECK(V.size() == 4);
    for (const auto& v : V)
        for (const auto& c : v) CHECK((c == 0 || c == 10));
    for (const auto& c : sq.interior_point()) CHECK(c == BigRational(1, 2));
}

TEST_CASE("lattice enumeration matches a box scan on random bodies") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 120; ++trial) {
        const size_t s = 1 + trial % 3;
        auto K = random_body(rng, s);
        const int64_t num = 1 + int64_t(rng() % (s == 3 ? 6 : 15)), den = 1 + int64_t(rng() % 2);
        auto expect = box_scan(K, num, den);
        std::vector<std::vector<int64_t>> got;
        auto P = K.dilate(num, den);
        P.for_each_point([&](std::span<const int64_t> n) { got.emplace_back(n.begin(), n.end()); });
        REQUIRE(got == expect);  // same points, lexicographic order
        CHECK(P.count_points() == expect.size());
    }
}

TEST_CASE("correlation sums equal a direct loop and do not depend on threads") {
    std::mt19937_64 rng(11);
    std::vector<double> vals(4001);
    for (auto& v : vals) v = double(rng() % 1000) / 999.0;
    TableView tv{vals, 4000};
    LinearSystem sys({{{1, 0}, 1}, {{0, 1}, 2}, {{1, 1}, 3}});
    auto K = ConvexBody(2, {{{-1, 0}, 0, 0}, {{0, -1}, 0, 0}, {{1, 1}, 1, 0}});
    std::vector<TableView> tabs(3, tv);
    for (uint64_t T : {1, 5, 37, 200}) {
        double direct = 0.0;
        uint64_t count = 0;
        for (const auto& n : box_scan(K, int64_t(T), 1)) {
            double prod = 1.0;
            for (size_t i = 0; i < 3; ++i) prod *= vals[sys[i](n)];
            direct += prod;
            ++count;
        }
        auto r1 = correlation_sum(tabs, sys, K, T, 1);
        auto r4 = correlation_sum(tabs, sys, K, T, 4);
        CHECK(r1.lattice_count == count);
        CHECK(r1.raw_sum == doctest::Approx(direct).epsilon(1e-12));
        CHECK(std::memcmp(&r1.raw_sum, &r4.raw_sum, sizeof(double)) == 0);
        CHECK(r1.vanishing == r4.vanishing);
    }
}

TEST_CASE("all-one correlation counts lattice points") {
    std::vector<double> ones(3001, 1.0);
    std::vector<TableView> tabs(2, TableView{ones, 3000});
    LinearSystem sys({{{1, 0}, 1}, {{1, 1}, 1}});
    auto K = ConvexBody::box(2, 0, 1);
    auto r = correlation_sum(tabs, sys, K, 1000, 2);
    CHECK(r.raw_sum == double(r.lattice_count));
    CHECK(r.lattice_count == 1001 * 1001);
}

TEST_CASE("W-tricked correlation evaluates h(W phi + A) on the body dilated by T/W'") {
    std::vector<double> vals(5001);
    for (size_t n = 0; n < vals.size(); ++n) vals[n] = 1.0 / double(1 + n % 17);
    std::vector<TableView> tabs(2, TableView{vals, 5000});
    LinearSystem sys({{{1, 0}, 0}, {{1, 1}, 0}});
    auto K = ConvexBody::box(2, 0, 1);
    WTrickData wt{{6, 6}, {1, 5}, 6};
    const uint64_t T = 600;  // dilation 100
    double direct = 0.0;
    for (const auto& n : box_scan(K, int64_t(T), 6))
        direct += vals[6 * sys[0](n) + 1] * vals[6 * sys[1](n) + 5];
    auto r = correlation_sum_wtricked(tabs, sys, K, T, wt, 3);
    CHECK(r.lattice_count == 101 * 101);
    CHECK(r.raw_sum == doctest::Approx(direct).epsilon(1e-12));
    WTrickData bad{{6, 6}, {2, 5}, 6};
    CHECK_THROWS_AS(correlation_sum_wtricked(tabs, sys, K, T, bad), DomainError);
}

TEST_CASE("form ranges are checked at the vertices") {
    LinearSystem sys({{{1}, 0}, {{1}, 2}}, true);
    auto K = ConvexBody::interval(0, 1, -1, 0);  // 1 <= n <= T
    auto P = K.dilate(100);
    CHECK_NOTHROW(check_form_ranges(P, sys, {1, 1}, {0, 0}, {100, 102}));
    CHECK_THROWS_WITH_AS(check_form_ranges(P, sys, {1, 1}, {0, 0}, {100, 101}), doctest::Contains("form 2"),
                         DomainError);
    std::vector<double> vals(101, 1.0);
    std::vector<TableView> tabs(2, TableView{vals, 100});
    CHECK_THROWS_AS(correlation_sum(tabs, sys, K, 100), DomainError);
}
