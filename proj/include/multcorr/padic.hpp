#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "multcorr/arith.hpp"

namespace multcorr {

// One congruence  sum_k a[k] u_k = target  (mod p^e).
struct Congruence {
    std::vector<int64_t> a;
    int64_t target;
    int e;
};

// Density of u in Z_p^s satisfying every congruence, as p^{-k}; nullopt when
// the system has no solution. Exact: Smith-style elimination over Z/p^E with
// E = max e; 128-bit arithmetic below p^E = 2^62, arbitrary precision above.
std::optional<int> congruence_density_exponent(const std::vector<Congruence>& system, size_t s, uint64_t p);

}  // namespace multcorr
