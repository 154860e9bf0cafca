#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <span>
#include <vector>

#include "multcorr/linsys.hpp"
#include "multcorr/multfunc.hpp"

namespace multcorr {

struct WContext;

// Residue vectors up to this many points are counted directly.
inline constexpr uint64_t kAlphaEnumerationBudget = uint64_t(1) << 20;

// Density of u in (Z/p^m)^s with p^{c_i} | phi_i(u) for all i.
BigRational alpha_local(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps);
BigRational alpha_local_enumerated(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps);
BigRational alpha_composite(const LinearSystem& sys, const std::vector<uint64_t>& moduli);
// Density of u with p^{a_i} || phi_i(u) for all i (inclusion-exclusion over alpha).
BigRational exact_divisibility_density(const LinearSystem& sys, uint64_t p, const std::vector<int>& a);

template <class Scalar>
struct BetaReport {
    uint64_t p = 0;
    Scalar value{};
    int A_max = 0;
    double tail_bound = 0.0;  // +inf when the growth bound gives no decay
};

BetaReport<double> beta_p(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs, uint64_t p, int A_max);
BetaReport<BigRational> beta_p_exact(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs,
                                     uint64_t p, int A_max);

// lattice_count * (log T)^{-r} * prod_j prod_{p <= T} (1 + f_j(p)/p)
double beta_infinity(uint64_t lattice_count, std::span<const MultiplicativeFunction> fs, uint64_t T);

struct CorollaryReport {
    uint64_t T = 0;
    uint64_t P_max = 0;
    int A_max = 0;
    double beta_inf = 0.0;
    std::vector<BetaReport<double>> primes;
    double product = 1.0;
    double prediction = 0.0;
    double max_scaled_deviation = 0.0;  // max_p |beta_p - 1| p^2
    double tail_sum = 0.0;              // sum of per-prime tail bounds
};

CorollaryReport predict_main_term_corollary(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs,
                                            uint64_t lattice_count, uint64_t T, int A_max, uint64_t P_max,
                                            unsigned threads = 1);

struct TheoremReport {
    double normalized = 0.0;  // the double sum (mean of the product over the body)
    double prediction = 0.0;  // lattice_count * normalized
    uint64_t tuples = 0;      // smooth tuples with nonzero weight
    uint64_t residue_classes = 0;
};

// residue_means[i][A] = S_{h_i}(T; W~, A) for A coprime to W~ (other entries ignored).
TheoremReport predict_main_term_theorem(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs,
                                        const WContext& wctx, const std::vector<std::vector<double>>& residue_means,
                                        uint64_t lattice_count, double B2, uint64_t budget = 200'000'000);

// Numbers <= limit whose prime factors all lie in primes (sorted).
std::vector<uint64_t> smooth_numbers(const std::vector<uint64_t>& primes, uint64_t limit);

}  // namespace multcorr
