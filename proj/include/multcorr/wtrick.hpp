#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multcorr/linsys.hpp"
#include "multcorr/multfunc.hpp"

namespace multcorr {

struct WOverrides {
    std::optional<double> w_of_x;
    std::optional<uint64_t> q_star;
    std::optional<double> C;
    std::optional<double> B1;
    std::optional<double> B2;
};

struct WContext {
    uint64_t x = 0;
    double w_of_x = 0.0;
    uint64_t W = 1;
    uint64_t q_star = 1;
    uint64_t W_tilde = 1;
    double C = 2.0;
    double B1 = 6.0;
    double B2 = 10.0;
    std::vector<uint64_t> primes;  // primes <= w(x), i.e. the prime factors of W
    std::vector<std::string> audit;
};

WContext make_wcontext(uint64_t x, const WOverrides& o = {});

// True iff d^2 | n for some d > (log T)^C.
bool exceptional_prime_square(uint64_t n, uint64_t T, double C);
bool exceptional_prime_square(const Factorization& f, uint64_t T, double C);

struct SmoothTruncation {
    bool applicable = false;  // w > (log T)^{3C}
    bool holds = false;       // w_2^2 > (log T)^{2C}
    uint64_t w1 = 1, w2 = 1;  // w = w1 * w2^2, w1 squarefree
};
SmoothTruncation smooth_truncation_check(uint64_t w, const WContext& ctx);

struct ResidueMeanTable {
    uint64_t modulus = 1;
    uint64_t x = 0;
    std::vector<uint64_t> keys;  // residues coprime to W, ascending
    std::vector<double> dense;   // dense[A] = S_f(x; modulus, A); 0 for non-keys
    double at(uint64_t A) const;
};
ResidueMeanTable residue_mean_table(const TableView& t, uint64_t x, uint64_t modulus, const WContext& ctx);

struct PartitionGroup {
    std::vector<uint64_t> w;
    double sum = 0.0;
    uint64_t count = 0;
    bool truncated = false;  // some w_i > (log T)^{B2}
};

struct PartitionReport {
    std::vector<PartitionGroup> groups;  // ordered by w tuple
    double total = 0.0;                  // sum of group sums
    double correlation = 0.0;            // independent correlation_sum
    uint64_t lattice_count = 0;
    double relative_error = 0.0;
    double truncated_mass = 0.0;
    bool identity_holds = false;  // relative error <= 1e-9
};

// W-smooth part of n: the w with w | n and gcd(W, n/w) = 1.
uint64_t smooth_part(uint64_t n, const std::vector<uint64_t>& primes);

PartitionReport exact_smooth_partition(std::span<const TableView> tables, const LinearSystem& sys,
                                       const ConvexBody& body, uint64_t T, const WContext& ctx,
                                       unsigned threads = 1);

struct StabilityRow {
    uint64_t x_prime;
    double raw_delta;
    double normalized_delta;
};
struct StabilityReport {
    double envelope = 0.0;
    double max_normalized = 0.0;
    std::vector<StabilityRow> rows;
};
StabilityReport stability_scan(const SieveTable& t, uint64_t x, double C, uint64_t q, int64_t A,
                               size_t grid_points = 64);

// (q/phi(q)) (1/log x) prod_{p<=x, p !| q} (1 + |f(p)|/p)
double progression_envelope(const SieveTable& t, uint64_t x, uint64_t q);

}  // namespace multcorr
