#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "multcorr/linsys.hpp"
#include "multcorr/multfunc.hpp"
#include "multcorr/wtrick.hpp"

namespace multcorr {

struct SharpFlatSplit {
    MultiplicativeFunction base;
    MultiplicativeFunction sharp;  // max(1, |h(p)|, ..., |h(p^k)|)
    MultiplicativeFunction flat;   // min(1, |h(p^k)|)
};
SharpFlatSplit split(const MultiplicativeFunction& h);

// e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) on [0,1], clamped outside.
double smooth_step(double t);

// 0 outside [support_lo, support_hi], 1 on [plateau_lo, plateau_hi], smooth_step in between.
struct SmoothCutoff {
    double support_lo, plateau_lo, plateau_hi, support_hi;
    double operator()(double x) const;
    static SmoothCutoff chi() { return {-1.0, -0.5, 0.5, 1.0}; }
    static SmoothCutoff lambda(double gamma) { return {gamma / 2, gamma, 2 * gamma, 4 * gamma}; }
};

struct MajorantParams {
    double gamma = 0.25;
    double C1 = 20.0;
    uint64_t T = 0;
    SmoothCutoff chi = SmoothCutoff::chi();
    SmoothCutoff lambda = SmoothCutoff::lambda(0.25);

    static MajorantParams make(uint64_t T, double gamma = 0.25, double C1 = 20.0);
};

struct USetSpec {
    int kappa;
    int lambda;
    int omega;  // 0 marks the base case U = {1}
    double I_lo, I_hi;
};
// Every (kappa, lambda) pair contributing to nu_sharp. The base pair
// (ceil(4/gamma), ceil(log2 kappa - 2)) is always present.
std::vector<USetSpec> u_set_specs(const MajorantParams& P);

// Largest prefix product prod_{p<=Q} p^{v_p(n)} not exceeding x^gamma; needs x^gamma <= n <= x.
uint64_t erdos_divisor(uint64_t n, uint64_t x, double gamma);
// The two-branch variant applied to the flat-prime part of n.
uint64_t erdos_divisor_flat(uint64_t n, uint64_t x, double gamma, const std::function<bool(uint64_t)>& flat_prime);

// (sum_{d | m, d in <P_flat>} mu(d) chi(log d / log Q))^2
double sigma_flat(double Q, const Factorization& m, const std::function<bool(uint64_t)>& flat_prime,
                  const SmoothCutoff& chi);

class Majorant {
public:
    Majorant(const MultiplicativeFunction& h, const MajorantParams& P);

    const MajorantParams& params() const { return P_; }
    const std::vector<USetSpec>& specs() const { return specs_; }
    uint64_t limit() const { return P_.T; }
    bool flat_prime(uint64_t p) const { return base_[p] < 1.0; }
    double h(uint64_t n) const { return base_[n]; }
    double sharp(uint64_t n) const { return sharp_[n]; }
    double flat(uint64_t n) const { return flat_[n]; }
    Factorization factorize(uint64_t n) const { return spf_->factorize(n); }

    // sum_{d | m} g(d) chi(log d / log T^gamma), g = mu * h_sharp
    double truncated_divisor_sum(const Factorization& m) const;
    bool in_S(const Factorization& n) const;
    double nu_sharp(const Factorization& n) const;
    double nu_flat(const Factorization& n, uint64_t x) const;
    double nu(uint64_t n) const;  // nu_sharp * nu_flat at x = T

    // nu(n) for n = 1..limit, index 0 unused
    std::vector<double> table(unsigned threads = 1) const;

private:
    MajorantParams P_;
    SharpFlatSplit split_;
    SieveTable base_, sharp_, flat_, g_;
    std::shared_ptr<SpfTable> spf_;
    std::vector<USetSpec> specs_;
    double log_T_, loglog_T_;
};

struct AverageOrderReport {
    uint64_t T = 0;
    double S_h = 0.0;
    double S_nu = 0.0;
    double envelope = 0.0;
    double lower_ratio = 0.0;  // |S_h| / S_nu
    double upper_ratio = 0.0;  // S_nu / envelope
};

// nu_values[n] = nu(n) for n <= T
AverageOrderReport majorant_average_order(const SieveTable& h, std::span<const double> nu_values,
                                          const WContext& ctx, uint64_t T, int64_t A);

struct LinearFormsRatio {
    double joint = 0.0;
    std::vector<double> marginals;
    double ratio = 0.0;
    uint64_t lattice_count = 0;
};

LinearFormsRatio linear_forms_ratio(std::span<const TableView> nu_tables, const LinearSystem& sys,
                                    const ConvexBody& body, uint64_t T, const WTrickData& wt,
                                    unsigned threads = 1);

}  // namespace multcorr
