#include "multcorr/charsum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "multcorr/wtrick.hpp"

namespace multcorr {

namespace {

uint64_t powmod(uint64_t b, uint64_t e, uint64_t m) {
    u128 r = 1, x = b % m;
    for (; e; e >>= 1) {
        if (e & 1) r = r * x % m;
        x = x * x % m;
    }
    return uint64_t(r);
}

uint64_t primitive_root(uint64_t p) {
    if (p == 2) return 1;
    const auto fac = factorize(p - 1);
    for (uint64_t g = 2;; ++g) {
        bool ok = true;
        for (auto [l, k] : fac)
            if (powmod(g, (p - 1) / l, p) == 1) ok = false;
        if (ok) return g;
    }
}

// x = a mod m1, x = b mod m2, coprime moduli
uint64_t crt(uint64_t a, uint64_t m1, uint64_t b, uint64_t m2) {
    for (uint64_t x = a; x < m1 * m2; x += m1)
        if (x % m2 == b) return x;
    throw InvariantError("crt failed");
}

}  // namespace

CharacterGroup::CharacterGroup(uint64_t q) : q_(q) {
    if (q < 1) throw DomainError("character modulus must be >= 1");
    if (q > 50'000'000) throw BudgetError("character modulus too large");
    for (auto [p, e] : factorize(q == 1 ? 1 : q)) {
        if (q == 1) break;
        Component c;
        c.modulus = ipow(p, unsigned(e));
        const uint64_t pe = c.modulus;
        c.log_a.assign(pe, -1);
        auto lift = [&](uint64_t g) { return crt(g % pe, pe, 1 % (q / pe), q / pe); };
        if (p != 2) {
            uint64_t g = primitive_root(p);
            if (e >= 2 && powmod(g, p - 1, p * p) == 1) g += p;
            const uint64_t ord = pe / p * (p - 1);
            uint64_t x = 1;
            for (uint64_t i = 0; i < ord; ++i) {
                c.log_a[x] = int32_t(i);
                x = uint64_t(u128(x) * g % pe);
            }
            c.slots.push_back(orders_.size());
            orders_.push_back(ord);
            gens_.push_back(lift(g));
        } else if (e == 1) {
            c.log_a[1] = 0;
        } else if (e == 2) {
            c.log_a[1] = 0;
            c.log_a[3] = 1;
            c.slots.push_back(orders_.size());
            orders_.push_back(2);
            gens_.push_back(lift(3));
        } else {
            c.log_b.assign(pe, -1);
            const uint64_t ob = pe / 4;
            uint64_t x = 1;
            for (uint64_t b = 0; b < ob; ++b) {
                c.log_a[x] = 0;
                c.log_b[x] = int32_t(b);
                c.log_a[pe - x] = 1;
                c.log_b[pe - x] = int32_t(b);
                x = x * 5 % pe;
            }
            c.slots.push_back(orders_.size());
            orders_.push_back(2);
            gens_.push_back(lift(pe - 1));
            c.slots.push_back(orders_.size());
            orders_.push_back(ob);
            gens_.push_back(lift(5));
        }
        comps_.push_back(std::move(c));
    }
    for (auto o : orders_) {
        size_ *= o;
        L_ = std::lcm(L_, o);
    }
    roots_.resize(L_);
    for (uint64_t k = 0; k < L_; ++k) {
        // exact values at the quarter turns
        if (4 * k % L_ == 0) {
            static const std::complex<double> quarter[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
            roots_[k] = quarter[4 * k / L_];
        } else {
            double a = 2.0 * M_PI * double(k) / double(L_);
            roots_[k] = {std::cos(a), std::sin(a)};
        }
    }
}

std::vector<uint64_t> CharacterGroup::exponents_of(uint64_t chi) const {
    if (chi >= size_) throw DomainError("character index out of range");
    std::vector<uint64_t> j(orders_.size());
    for (size_t s = 0; s < orders_.size(); ++s) {
        j[s] = chi % orders_[s];
        chi /= orders_[s];
    }
    return j;
}

std::vector<uint64_t> CharacterGroup::logs(int64_t n) const {
    std::vector<uint64_t> out(orders_.size(), 0);
    for (const auto& c : comps_) {
        int64_t r = n % int64_t(c.modulus);
        if (r < 0) r += int64_t(c.modulus);
        if (c.log_a[r] < 0) throw DomainError("logs of a non-unit");
        if (!c.slots.empty()) out[c.slots[0]] = uint64_t(c.log_a[r]);
        if (c.slots.size() > 1) out[c.slots[1]] = uint64_t(c.log_b[r]);
    }
    return out;
}

std::optional<uint64_t> CharacterGroup::angle(uint64_t chi, int64_t n) const {
    int64_t r = n % int64_t(q_);
    if (r < 0) r += int64_t(q_);
    if (std::gcd(uint64_t(r), q_) != 1) return std::nullopt;
    const auto j = exponents_of(chi);
    const auto lg = logs(r);
    u128 a = 0;
    for (size_t s = 0; s < orders_.size(); ++s) a += u128(j[s]) * lg[s] % orders_[s] * (L_ / orders_[s]);
    return uint64_t(a % L_);
}

std::complex<double> CharacterGroup::value(uint64_t chi, int64_t n) const {
    auto a = angle(chi, n);
    return a ? roots_[*a] : std::complex<double>(0, 0);
}

uint64_t CharacterGroup::conjugate(uint64_t chi) const {
    auto j = exponents_of(chi);
    uint64_t idx = 0, mul = 1;
    for (size_t s = 0; s < orders_.size(); ++s) {
        idx += ((orders_[s] - j[s]) % orders_[s]) * mul;
        mul *= orders_[s];
    }
    return idx;
}

RestrictedCharSet restricted_characters(const CharacterGroup& G, uint64_t sub) {
    const uint64_t q = G.modulus();
    if (sub < 1 || q % sub) throw DomainError("sub-modulus must divide the character modulus");
    std::vector<uint64_t> kernel;
    for (uint64_t n = 1 % q; n < std::max<uint64_t>(q, 1); n += sub)
        if (std::gcd(n, q) == 1) kernel.push_back(n);
    RestrictedCharSet R;
    R.ambient = q;
    R.sub = sub;
    for (uint64_t chi = 0; chi < G.size(); ++chi) {
        bool trivial = std::all_of(kernel.begin(), kernel.end(), [&](uint64_t k) { return *G.angle(chi, int64_t(k)) == 0; });
        (trivial ? R.induced : R.members).push_back(chi);
    }
    return R;
}

namespace {

struct ComplexSum {
    CompensatedSum re, im;
    void add(std::complex<double> z) {
        re.add(z.real());
        im.add(z.imag());
    }
    std::complex<double> value() const { return {re.value(), im.value()}; }
};

}  // namespace

std::complex<double> twisted_mean(const TableView& t, uint64_t x, const CharacterGroup& G, uint64_t chi) {
    if (x > t.limit) throw DomainError("twisted_mean: x beyond table");
    ComplexSum s;
    for (uint64_t n = 1; n <= x; ++n) {
        if (t.values[n] == 0.0) continue;
        s.add(t.values[n] * std::conj(G.value(chi, int64_t(n))));
    }
    return s.value();
}

IdentityReport restricted_identity_check(const TableView& t, uint64_t y, uint64_t q0, uint64_t Wt, int64_t A) {
    if (q0 < 1 || Wt < 1) throw DomainError("q0 and W~ must be positive");
    const uint64_t q = checked_mul(q0, Wt);
    int64_t a = A % int64_t(q);
    if (a < 0) a += int64_t(q);
    if (std::gcd(uint64_t(a), q) != 1) throw DomainError("restricted_identity_check needs gcd(A, q0 W~) = 1");
    if (y < 1 || y > t.limit) throw DomainError("y outside the table");

    IdentityReport rep;
    rep.lhs = mean_value_progression(t, y, Wt, a) - mean_value_progression(t, y, q, a);

    CharacterGroup G(q);
    const auto R = restricted_characters(G, Wt);
    std::vector<CompensatedSum> rs(q);
    CompensatedSum nonunit;
    for (uint64_t n = 1; n <= y; ++n) {
        rs[n % q].add(t.values[n]);
        if (n % Wt == uint64_t(a) % Wt && std::gcd(n, q) != 1) nonunit.add(t.values[n]);
    }
    auto inner = [&](uint64_t chi) {
        ComplexSum s;
        for (uint64_t r = 0; r < q; ++r)
            if (auto ang = G.angle(chi, int64_t(r))) s.add(rs[r].value() * std::conj(G.value(chi, int64_t(r))));
        return s.value();
    };
    ComplexSum star, ind;
    for (auto chi : R.members) star.add(G.value(chi, a) * inner(chi));
    for (auto chi : R.induced) ind.add(G.value(chi, a) * inner(chi));
    const double phi_q = double(G.size()), phi_W = double(euler_phi(Wt));
    const double pref = double(q) / double(y) / phi_q;
    rep.restricted_term = -pref * star.value().real();
    rep.correction = (phi_q / phi_W - double(q0)) * double(Wt) / (double(y) * phi_q) * ind.value().real() +
                     double(Wt) / double(y) * nonunit.value();
    rep.residual = std::abs(rep.lhs - rep.restricted_term - rep.correction);
    rep.uncorrected_residual = std::abs(rep.lhs - pref * star.value().real());
    rep.compatible = true;
    for (auto [p, k] : factorize(q0 == 1 ? 1 : q0))
        if (q0 != 1 && Wt % p) rep.compatible = false;
    return rep;
}

MajorArcReport major_arc_probe(const SieveTable& t, uint64_t x, uint64_t q0, uint64_t Wt, int64_t A, double theta,
                               size_t grid_points) {
    if (x < 16 || x > t.T()) throw DomainError("major_arc_probe: x outside the table");
    const uint64_t q = checked_mul(q0, Wt);
    int64_t a = A % int64_t(q);
    if (a < 0) a += int64_t(q);
    if (std::gcd(uint64_t(a), q) != 1) throw DomainError("major_arc_probe needs gcd(A, q0 W~) = 1");
    const double lx = std::log(double(x));
    if (q0 < 1 || double(q0) > std::pow(lx, theta)) throw DomainError("major_arc_probe needs 0 < q0 <= (log x)^theta");
    MajorArcReport rep;
    rep.interval_length = uint64_t(std::floor(double(x) * std::pow(lx, -theta))) + 1;
    if (rep.interval_length > x) throw DomainError("interval longer than [1, x]");
    const double ref = mean_value_progression(t.view(), x, Wt, a);
    // prefix[k] = sum of f over the first k terms a0, a0+q, ...
    const uint64_t a0 = a == 0 ? q : uint64_t(a);
    std::vector<double> prefix{0.0};
    CompensatedSum acc;
    for (uint64_t n = a0; n <= x; n += q) {
        acc.add(t[n]);
        prefix.push_back(acc.value());
    }
    auto count_upto = [&](uint64_t m) -> uint64_t { return m < a0 ? 0 : (m - a0) / q + 1; };
    rep.envelope = progression_envelope(t, x, q);
    const uint64_t L = rep.interval_length, last = x - L + 1;
    for (size_t j = 0; j < grid_points; ++j) {
        uint64_t s = 1 + (grid_points > 1 ? (last - 1) * j / (grid_points - 1) : 0);
        double sum = prefix[count_upto(s + L - 1)] - prefix[count_upto(s - 1)];
        double dev = std::abs(double(q) * sum / double(L) - ref) / rep.envelope;
        rep.rows.push_back({s, dev});
        rep.max_normalized = std::max(rep.max_normalized, dev);
    }
    return rep;
}

}  // namespace multcorr
