#include "multcorr/padic.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <limits>

namespace multcorr {

namespace {

template <class Int>
struct Ring {
    uint64_t p;
    int E;
    Int mod;

    Int norm(Int x) const {
        x %= mod;
        return x < 0 ? Int(x + mod) : x;
    }
    Int mul(const Int& a, const Int& b) const { return norm(a * b); }
    int val(Int x) const {
        if (x == 0) return E;
        int v = 0;
        while (x % Int(p) == 0) {
            x /= Int(p);
            ++v;
        }
        return v;
    }
    Int inverse(const Int& u) const {
        Int a = norm(u), b = mod, x0 = 1, x1 = 0;
        while (b != 0) {
            Int q = a / b, t = a - q * b;
            a = b;
            b = t;
            t = x0 - q * x1;
            x0 = x1;
            x1 = t;
        }
        if (a != 1) throw InvariantError("inverse of a non-unit");
        return norm(x0);
    }
};

template <class Int>
std::optional<int> solve(const std::vector<Congruence>& system, size_t s, uint64_t p, int E) {
    Int mod = 1;
    for (int i = 0; i < E; ++i) mod *= Int(p);
    Ring<Int> R{p, E, mod};
    // Lift every row to modulus p^E: multiply by p^{E-e}.
    const size_t m = system.size();
    std::vector<std::vector<Int>> M(m, std::vector<Int>(s));
    std::vector<Int> b(m);
    for (size_t i = 0; i < m; ++i) {
        Int scale = 1;
        for (int k = system[i].e; k < E; ++k) scale *= Int(p);
        for (size_t j = 0; j < s; ++j) M[i][j] = R.mul(R.norm(Int(system[i].a[j])), scale);
        b[i] = R.mul(R.norm(Int(system[i].target)), scale);
    }
    int k = 0;
    size_t rank = 0;
    for (; rank < std::min(m, s); ++rank) {
        int best = E;
        size_t pr = 0, pc = 0;
        for (size_t i = rank; i < m; ++i)
            for (size_t j = rank; j < s; ++j)
                if (int v = R.val(M[i][j]); v < best) {
                    best = v;
                    pr = i;
                    pc = j;
                }
        if (best >= E) break;
        std::swap(M[pr], M[rank]);
        std::swap(b[pr], b[rank]);
        for (auto& row : M) std::swap(row[pc], row[rank]);
        Int pv = 1;
        for (int t = 0; t < best; ++t) pv *= Int(p);
        const Int uinv = R.inverse(Int(M[rank][rank] / pv));
        for (size_t i = rank + 1; i < m; ++i) {
            if (M[i][rank] == 0) continue;
            Int f = R.mul(Int(M[i][rank] / pv), uinv);
            for (size_t j = rank; j < s; ++j) M[i][j] = R.norm(Int(M[i][j] - R.mul(f, M[rank][j])));
            b[i] = R.norm(Int(b[i] - R.mul(f, b[rank])));
        }
        // column operations are a change of variables and leave b alone
        for (size_t j = rank + 1; j < s; ++j) M[rank][j] = 0;
        if (R.val(b[rank]) < best) return std::nullopt;
        k += E - best;
    }
    for (size_t i = rank; i < m; ++i)
        if (b[i] != 0) return std::nullopt;
    return k;
}

}  // namespace

std::optional<int> congruence_density_exponent(const std::vector<Congruence>& system, size_t s, uint64_t p) {
    int E = 0;
    for (const auto& c : system) {
        if (c.a.size() != s) throw DomainError("congruence of wrong dimension");
        if (c.e < 0) throw DomainError("negative exponent");
        E = std::max(E, c.e);
    }
    if (E == 0) return 0;
    if (p < 2) throw DomainError("modulus prime must be >= 2");
    const double bits = E * std::log2(double(p));
    if (bits > 4096) throw BudgetError("p^E exceeds 2^4096");
    // 128-bit arithmetic while products of residues fit, arbitrary precision beyond
    if (bits < 62) return solve<i128>(system, s, p, E);
    return solve<boost::multiprecision::cpp_int>(system, s, p, E);
}

}  // namespace multcorr
