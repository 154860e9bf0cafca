#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "multcorr/arith.hpp"
#include "multcorr/multfunc.hpp"
#include "multcorr/parallel.hpp"

namespace multcorr {

// Compare Rational only against Rational: with Boost 1.74 in C++20 mode,
// rational == integer recurses forever through the rewritten operators.
using Rational = boost::rational<int64_t>;
using BigRational = boost::multiprecision::cpp_rational;

Rational parse_rational(const std::string& s);

struct LinearForm {
    std::vector<int64_t> coeffs;
    int64_t constant = 0;

    int64_t operator()(std::span<const int64_t> n) const;  // checked
    std::string str() const;
};

class LinearSystem {
public:
    // With allow_proportional the pairwise-independence check is skipped;
    // used for one-variable systems such as (n, n+2).
    explicit LinearSystem(std::vector<LinearForm> forms, bool allow_proportional = false);

    size_t r() const { return forms_.size(); }
    size_t s() const { return s_; }
    const LinearForm& operator[](size_t i) const { return forms_[i]; }
    const std::vector<LinearForm>& forms() const { return forms_; }
    bool pairwise_independent() const { return independent_; }

private:
    std::vector<LinearForm> forms_;
    size_t s_ = 0;
    bool independent_ = true;
};

// <normal, x> <= offset on the unit body; on the dilation by T the lattice
// constraint is <normal, n> <= T*offset + slack.
struct Halfspace {
    std::vector<Rational> normal;
    Rational offset;
    Rational slack{0};
};

// Integer constraint <a, n> <= rhs.
struct Constraint {
    std::vector<i128> a;
    i128 rhs;
};

class Polytope {
public:
    Polytope(size_t s, std::vector<Constraint> cons);

    size_t dim() const { return s_; }
    const std::vector<Constraint>& constraints() const { return orig_; }
    std::vector<std::vector<BigRational>> vertices() const;
    // Integer range of the first coordinate; lo > hi when empty.
    std::pair<int64_t, int64_t> first_range() const;

    // Calls fn(prefix, lo, hi) for every row of lattice points: prefix holds
    // n_1..n_{s-1} and the last coordinate runs over [lo, hi]. Only rows with
    // n_1 in [a, b] are visited; order is lexicographic.
    template <class Fn>
    void for_each_row(int64_t a, int64_t b, Fn&& fn) const {
        std::vector<int64_t> x(s_, 0);
        if (s_ == 1) {
            auto [lo, hi] = bounds(0, x);
            lo = std::max(lo, a);
            hi = std::min(hi, b);
            if (lo <= hi) fn(std::span<const int64_t>(x.data(), 0), lo, hi);
            return;
        }
        recurse(0, x, a, b, fn);
    }
    template <class Fn>
    void for_each_point(Fn&& fn) const {
        auto [a, b] = first_range();
        for_each_row(a, b, [&](std::span<const int64_t> prefix, int64_t lo, int64_t hi) {
            std::vector<int64_t> n(prefix.begin(), prefix.end());
            n.push_back(0);
            for (int64_t t = lo; t <= hi; ++t) {
                n.back() = t;
                fn(std::span<const int64_t>(n));
            }
        });
    }
    uint64_t count_points() const;

private:
    std::pair<int64_t, int64_t> bounds(size_t level, const std::vector<int64_t>& x) const;

    template <class Fn>
    void recurse(size_t j, std::vector<int64_t>& x, int64_t a, int64_t b, Fn& fn) const {
        auto [lo, hi] = bounds(j, x);
        if (j == 0) {
            lo = std::max(lo, a);
            hi = std::min(hi, b);
        }
        if (j + 1 == s_) {
            if (lo <= hi) fn(std::span<const int64_t>(x.data(), s_ - 1), lo, hi);
            return;
        }
        for (int64_t t = lo; t <= hi; ++t) {
            x[j] = t;
            recurse(j + 1, x, a, b, fn);
        }
    }

    size_t s_;
    // levels_[j] constrains n_1..n_{j+1} only (Fourier-Motzkin projections).
    std::vector<std::vector<Constraint>> levels_;
    std::vector<Constraint> orig_;
};

class ConvexBody {
public:
    // The box [-1,1]^s is always added; the unit body must have an interior point.
    ConvexBody(size_t s, std::vector<Halfspace> halfspaces);

    size_t dim() const { return s_; }
    const std::vector<Halfspace>& halfspaces() const { return hs_; }
    const std::vector<BigRational>& interior_point() const { return interior_; }
    // Lattice points n with <a,n> <= scale*b + slack for every half-space.
    Polytope dilate(int64_t num, int64_t den = 1) const;
    // Convenience: [lo, hi] with integer slacks on the lattice.
    static ConvexBody interval(Rational lo, Rational hi, Rational lo_slack = 0, Rational hi_slack = 0);
    static ConvexBody box(size_t s, Rational lo, Rational hi);

private:
    size_t s_;
    std::vector<Halfspace> hs_;
    std::vector<BigRational> interior_;
};

// Lexicographic stream of Z^s ∩ T*body.
void enumerate_lattice(const ConvexBody& body, uint64_t T, const std::function<void(std::span<const int64_t>)>& fn);

struct CorrelationResult {
    uint64_t T = 0;
    double raw_sum = 0.0;
    uint64_t lattice_count = 0;
    // points where the factor of form i vanished
    std::vector<uint64_t> vanishing;
};

struct WTrickData {
    std::vector<int64_t> W;  // W_i >= 1
    std::vector<int64_t> A;
    uint64_t W_of_T = 1;  // A_i must be coprime to this
};

CorrelationResult correlation_sum(std::span<const TableView> tables, const LinearSystem& sys,
                                  const ConvexBody& body, uint64_t T, unsigned threads = 1);
CorrelationResult correlation_sum_wtricked(std::span<const TableView> tables, const LinearSystem& sys,
                                           const ConvexBody& body, uint64_t T, const WTrickData& wt,
                                           unsigned threads = 1);

// Throws DomainError naming the form and a witness vertex when some
// W_i*phi_i + A_i leaves [1, limit_i] on the polytope.
void check_form_ranges(const Polytope& P, const LinearSystem& sys, const std::vector<int64_t>& W,
                       const std::vector<int64_t>& A, const std::vector<uint64_t>& limits);

}  // namespace multcorr
