#include "multcorr/arith.hpp"

#include <algorithm>

namespace multcorr {

std::string to_string(i128 v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    u128 u = neg ? u128(-(v + 1)) + 1 : u128(v);
    std::string s;
    while (u > 0) {
        s.push_back(char('0' + int(u % 10)));
        u /= 10;
    }
    if (neg) s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
}

uint64_t ipow(uint64_t base, unsigned exp) {
    uint64_t r = 1;
    for (unsigned i = 0; i < exp; ++i) r = checked_mul(r, base);
    return r;
}

i128 floor_div(i128 a, i128 b) {
    i128 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

i128 ceil_div(i128 a, i128 b) {
    i128 q = a / b;
    if ((a % b != 0) && ((a < 0) == (b < 0))) ++q;
    return q;
}

int valuation(i128 n, uint64_t p) {
    if (n == 0) throw DomainError("valuation of zero");
    int v = 0;
    while (n % i128(p) == 0) {
        n /= i128(p);
        ++v;
    }
    return v;
}

Factorization factorize(uint64_t n) {
    if (n == 0) throw DomainError("factorize(0)");
    Factorization f;
    for (uint64_t p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
        if (n % p) continue;
        int k = 0;
        while (n % p == 0) {
            n /= p;
            ++k;
        }
        f.push_back({p, k});
    }
    if (n > 1) f.push_back({n, 1});
    return f;
}

uint64_t from_factorization(const Factorization& f) {
    uint64_t n = 1;
    for (auto [p, k] : f) n = checked_mul(n, ipow(p, unsigned(k)));
    return n;
}

std::vector<uint64_t> divisors(const Factorization& f) {
    std::vector<uint64_t> d{1};
    for (auto [p, k] : f) {
        size_t base = d.size();
        uint64_t pk = 1;
        for (int e = 1; e <= k; ++e) {
            pk *= p;
            for (size_t i = 0; i < base; ++i) d.push_back(d[i] * pk);
        }
    }
    std::sort(d.begin(), d.end());
    return d;
}

bool is_prime(uint64_t n) {
    if (n < 2) return false;
    for (uint64_t p = 2; p * p <= n; ++p)
        if (n % p == 0) return false;
    return true;
}

std::vector<uint64_t> primes_up_to(uint64_t n) {
    std::vector<uint64_t> ps;
    if (n < 2) return ps;
    std::vector<bool> comp(n + 1, false);
    for (uint64_t i = 2; i <= n; ++i) {
        if (comp[i]) continue;
        ps.push_back(i);
        for (uint64_t j = i * i; j <= n; j += i) comp[j] = true;
    }
    return ps;
}

uint64_t euler_phi(uint64_t n) {
    uint64_t r = n;
    for (auto [p, k] : factorize(n)) r = r / p * (p - 1);
    return r;
}

uint64_t radical(uint64_t n) {
    uint64_t r = 1;
    for (auto [p, k] : factorize(n)) r *= p;
    return r;
}

SpfTable::SpfTable(uint64_t n) : n_(n), spf_(n + 1, 0) {
    if (n > 0xFFFFFFFFull) throw DomainError("SpfTable limit exceeds 2^32");
    for (uint64_t i = 2; i <= n; ++i) {
        if (spf_[i]) continue;
        spf_[i] = uint32_t(i);
        if (i * i > n) continue;
        for (uint64_t j = i * i; j <= n; j += i)
            if (!spf_[j]) spf_[j] = uint32_t(i);
    }
}

Factorization SpfTable::factorize(uint64_t m) const {
    if (m == 0 || m > n_) throw DomainError("SpfTable::factorize out of range: " + std::to_string(m));
    Factorization f;
    while (m > 1) {
        uint64_t p = spf_[m];
        int k = 0;
        while (m % p == 0) {
            m /= p;
            ++k;
        }
        f.push_back({p, k});
    }
    return f;
}

}  // namespace multcorr
