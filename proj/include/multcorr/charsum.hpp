#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "multcorr/multfunc.hpp"

namespace multcorr {

// Dirichlet characters mod q. Character j is addressed by its exponent
// tuple (mixed radix over the cyclic components of (Z/q)^*); index 0 is
// the principal character.
class CharacterGroup {
public:
    explicit CharacterGroup(uint64_t q);

    uint64_t modulus() const { return q_; }
    uint64_t size() const { return size_; }
    uint64_t exponent() const { return L_; }  // lcm of component orders
    const std::vector<uint64_t>& component_orders() const { return orders_; }
    const std::vector<uint64_t>& generators() const { return gens_; }

    std::vector<uint64_t> exponents_of(uint64_t chi) const;
    // chi(n) = e(angle/L); nullopt when gcd(n, q) > 1
    std::optional<uint64_t> angle(uint64_t chi, int64_t n) const;
    std::complex<double> value(uint64_t chi, int64_t n) const;
    uint64_t conjugate(uint64_t chi) const;
    // discrete logs of n in each component (n coprime to q)
    std::vector<uint64_t> logs(int64_t n) const;

private:
    uint64_t q_;
    uint64_t size_ = 1;
    uint64_t L_ = 1;
    std::vector<uint64_t> orders_, gens_;
    struct Component {
        uint64_t modulus;                       // prime power
        std::vector<int32_t> log_a, log_b;      // per residue; -1 if not a unit
        std::vector<size_t> slots;              // indices into orders_
    };
    std::vector<Component> comps_;
    std::vector<std::complex<double>> roots_;
};

struct RestrictedCharSet {
    uint64_t ambient = 1;  // q0 * W~
    uint64_t sub = 1;      // W~
    std::vector<uint64_t> members;  // not induced from characters mod W~
    std::vector<uint64_t> induced;
};
RestrictedCharSet restricted_characters(const CharacterGroup& G, uint64_t sub_modulus);

// sum_{n<=x} f(n) conj(chi(n))
std::complex<double> twisted_mean(const TableView& t, uint64_t x, const CharacterGroup& G, uint64_t chi);

struct IdentityReport {
    double lhs = 0.0;
    double restricted_term = 0.0;  // -(q0 W~/y)/phi(q0 W~) sum* chi(A) sum f conj(chi)
    double correction = 0.0;       // zero when every prime of q0 divides W~
    double residual = 0.0;         // |lhs - restricted_term - correction|
    double uncorrected_residual = 0.0; // |lhs - (q0 W~/y)/phi(q0 W~) sum*|: no sign flip, no correction
    bool compatible = false;
};
IdentityReport restricted_identity_check(const TableView& t, uint64_t y, uint64_t q0, uint64_t W_tilde, int64_t A);

struct MajorArcReport {
    uint64_t interval_length = 0;
    double envelope = 0.0;
    double max_normalized = 0.0;
    std::vector<std::pair<uint64_t, double>> rows;  // interval start, normalized deviation
};
MajorArcReport major_arc_probe(const SieveTable& t, uint64_t x, uint64_t q0, uint64_t W_tilde, int64_t A,
                               double theta, size_t grid_points = 32);

}  // namespace multcorr
