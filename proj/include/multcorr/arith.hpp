#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "multcorr/errors.hpp"

namespace multcorr {

using i128 = __int128;
using u128 = unsigned __int128;

std::string to_string(i128 v);

inline int64_t checked_add(int64_t a, int64_t b) {
    int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("int64 addition overflow");
    return r;
}

inline int64_t checked_mul(int64_t a, int64_t b) {
    int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("int64 multiplication overflow");
    return r;
}

inline i128 checked_add(i128 a, i128 b) {
    i128 r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("int128 addition overflow");
    return r;
}

inline i128 checked_mul(i128 a, i128 b) {
    i128 r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("int128 multiplication overflow");
    return r;
}

inline uint64_t checked_mul(uint64_t a, uint64_t b) {
    uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("uint64 multiplication overflow");
    return r;
}

uint64_t ipow(uint64_t base, unsigned exp);  // throws on overflow

// floor(a/b), ceil(a/b) for b != 0
i128 floor_div(i128 a, i128 b);
i128 ceil_div(i128 a, i128 b);

// v_p(n) for n != 0
int valuation(i128 n, uint64_t p);

struct PrimePower {
    uint64_t p;
    int k;
    bool operator==(const PrimePower&) const = default;
};

using Factorization = std::vector<PrimePower>;

Factorization factorize(uint64_t n);
uint64_t from_factorization(const Factorization& f);
std::vector<uint64_t> divisors(const Factorization& f);  // sorted
bool is_prime(uint64_t n);
std::vector<uint64_t> primes_up_to(uint64_t n);
uint64_t euler_phi(uint64_t n);
uint64_t radical(uint64_t n);

// Smallest prime factor of every m <= n; spf[0] = spf[1] = 0.
class SpfTable {
public:
    explicit SpfTable(uint64_t n);
    uint64_t limit() const { return n_; }
    uint32_t spf(uint64_t m) const { return spf_[m]; }
    Factorization factorize(uint64_t m) const;
    std::span<const uint32_t> raw() const { return spf_; }

private:
    uint64_t n_;
    std::vector<uint32_t> spf_;
};

// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    void add(const CompensatedSum& o) {
        add(o.sum_);
        add(o.comp_);
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace multcorr
