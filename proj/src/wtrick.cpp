#include "multcorr/wtrick.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "multcorr/parallel.hpp"

namespace multcorr {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

WContext make_wcontext(uint64_t x, const WOverrides& o) {
    if (x < 16) throw DomainError("W-trick context needs x >= 16");
    WContext c;
    c.x = x;
    c.C = o.C.value_or(2.0);
    c.B1 = o.B1.value_or(6.0);
    c.B2 = o.B2.value_or(10.0);
    if (!(c.C > 0.0) || !(c.B1 > 0.0) || !(c.B2 > 0.0)) throw DomainError("C, B1, B2 must be positive");
    const double lx = std::log(double(x));
    c.w_of_x = o.w_of_x.value_or(std::log(lx));
    if (!o.w_of_x) c.audit.push_back("w(x) = log log x = " + fmt(c.w_of_x));
    if (c.w_of_x < 2.0) {
        c.audit.push_back("w(x) = " + fmt(c.w_of_x) + " clamped to 2");
        c.w_of_x = 2.0;
    }
    auto fill = [&] {
        c.primes = primes_up_to(uint64_t(std::floor(c.w_of_x)));
        c.W = 1;
        for (auto p : c.primes) c.W = checked_mul(c.W, p);
    };
    fill();
    c.q_star = o.q_star.value_or(1);
    if (c.q_star < 1) throw DomainError("q* must be >= 1");
    for (auto [p, k] : factorize(c.q_star))
        if (p > c.w_of_x) throw DomainError("q* = " + std::to_string(c.q_star) + " is not w(x)-smooth");
    c.W_tilde = checked_mul(c.q_star, c.W);
    const double cap = std::pow(lx, c.B1);
    while (double(c.W_tilde) > cap) {
        if (o.w_of_x || c.primes.size() <= 1)
            throw InvariantError("W~ = " + std::to_string(c.W_tilde) + " exceeds (log x)^B1 = " + fmt(cap));
        double reduced = double(c.primes[c.primes.size() - 2]);
        c.audit.push_back("w(x) reduced from " + fmt(c.w_of_x) + " to " + fmt(reduced) + " so that W~ <= (log x)^B1");
        c.w_of_x = reduced;
        fill();
        c.W_tilde = checked_mul(c.q_star, c.W);
    }
    return c;
}

bool exceptional_prime_square(const Factorization& f, uint64_t T, double C) {
    double root = 1.0;
    for (auto [p, k] : f) root *= std::pow(double(p), double(k / 2));
    return root > std::pow(std::log(double(T)), C);
}

bool exceptional_prime_square(uint64_t n, uint64_t T, double C) {
    if (n < 1 || n > T) throw DomainError("exceptional_prime_square needs 1 <= n <= T");
    return exceptional_prime_square(factorize(n), T, C);
}

SmoothTruncation smooth_truncation_check(uint64_t w, const WContext& ctx) {
    if (w < 1) throw DomainError("w must be positive");
    if (!(ctx.C > 1.0)) throw DomainError("smooth truncation needs C > 1");
    SmoothTruncation r;
    for (auto [p, k] : factorize(w)) {
        if (std::find(ctx.primes.begin(), ctx.primes.end(), p) == ctx.primes.end())
            throw DomainError(std::to_string(w) + " is not w(T)-smooth");
        r.w1 *= (k % 2) ? p : 1;
        r.w2 *= ipow(p, unsigned(k / 2));
    }
    const double lt = std::log(double(ctx.x));
    r.applicable = double(w) > std::pow(lt, 3.0 * ctx.C);
    r.holds = r.applicable && double(r.w2) * double(r.w2) > std::pow(lt, 2.0 * ctx.C);
    return r;
}

double ResidueMeanTable::at(uint64_t A) const {
    if (!std::binary_search(keys.begin(), keys.end(), A % modulus))
        throw DomainError("residue " + std::to_string(A) + " not in the table");
    return dense[A % modulus];
}

ResidueMeanTable residue_mean_table(const TableView& t, uint64_t x, uint64_t modulus, const WContext& ctx) {
    if (modulus < 1) throw DomainError("modulus must be >= 1");
    if (x < 1 || x > t.limit) throw DomainError("x outside the table");
    std::vector<CompensatedSum> sums(modulus);
    for (uint64_t n = 1; n <= x; ++n) sums[n % modulus].add(t.values[n]);
    ResidueMeanTable r;
    r.modulus = modulus;
    r.x = x;
    r.dense.assign(modulus, 0.0);
    for (uint64_t A = 0; A < modulus; ++A) {
        if (std::gcd(A, ctx.W) != 1) continue;
        r.keys.push_back(A);
        r.dense[A] = double(modulus) * sums[A].value() / double(x);
    }
    return r;
}

uint64_t smooth_part(uint64_t n, const std::vector<uint64_t>& primes) {
    uint64_t w = 1;
    for (uint64_t p : primes)
        while (n % p == 0) {
            n /= p;
            w *= p;
        }
    return w;
}

PartitionReport exact_smooth_partition(std::span<const TableView> tables, const LinearSystem& sys,
                                       const ConvexBody& body, uint64_t T, const WContext& ctx, unsigned threads) {
    const size_t r = sys.r(), s = sys.s();
    if (tables.size() != r) throw DomainError("need one table per form");
    const Polytope P = body.dilate(int64_t(T));
    std::vector<uint64_t> limits;
    for (auto& t : tables) limits.push_back(t.limit);
    check_form_ranges(P, sys, std::vector<int64_t>(r, 1), std::vector<int64_t>(r, 0), limits);

    // key: 8 bits of exponent per (form, prime)
    const size_t k = ctx.primes.size();
    if (r * k * 8 > 64) throw BudgetError("too many (form, prime) pairs for the partition key");
    struct Acc {
        CompensatedSum sum;
        uint64_t count = 0;
    };
    using Map = std::unordered_map<uint64_t, Acc>;
    std::vector<Map> parts(kReductionChunks);
    auto [a, b] = P.first_range();
    const i128 span = a <= b ? i128(b) - a + 1 : 0;
    for_each_chunk(kReductionChunks, threads, [&](size_t c) {
        if (span == 0) return;
        int64_t ca = int64_t(a + span * i128(c) / i128(kReductionChunks));
        int64_t cb = int64_t(a + span * i128(c + 1) / i128(kReductionChunks) - 1);
        if (ca > cb) return;
        Map& m = parts[c];
        std::vector<int64_t> pt(s);
        P.for_each_row(ca, cb, [&](std::span<const int64_t> prefix, int64_t lo, int64_t hi) {
            std::copy(prefix.begin(), prefix.end(), pt.begin());
            for (int64_t t = lo; t <= hi; ++t) {
                pt[s - 1] = t;
                uint64_t key = 0;
                double prod = 1.0;
                for (size_t i = 0; i < r; ++i) {
                    int64_t v = sys[i](pt);
                    if (v < 1 || uint64_t(v) > limits[i]) throw DomainError("form out of range inside the body");
                    prod *= tables[i].values[v];
                    for (size_t j = 0; j < k; ++j) {
                        uint64_t e = 0, p = ctx.primes[j];
                        if (p == 2) {
                            e = uint64_t(__builtin_ctzll(uint64_t(v)));
                        } else {
                            while (v % int64_t(p) == 0) {
                                v /= int64_t(p);
                                ++e;
                            }
                        }
                        key = (key << 8) | e;
                    }
                }
                Acc& acc = m[key];
                acc.sum.add(prod);
                ++acc.count;
            }
        });
    });
    std::map<uint64_t, Acc> merged;
    for (auto& m : parts) {
        std::vector<uint64_t> keys;
        for (auto& [key, acc] : m) keys.push_back(key);
        std::sort(keys.begin(), keys.end());
        for (auto key : keys) {
            Acc& dst = merged[key];
            dst.sum.add(m[key].sum);
            dst.count += m[key].count;
        }
    }
    PartitionReport rep;
    const double cap = std::pow(std::log(double(T)), ctx.B2);
    CompensatedSum total;
    for (auto& [key, acc] : merged) {
        PartitionGroup g;
        g.w.assign(r, 1);
        uint64_t kk = key;
        for (size_t i = r; i-- > 0;)
            for (size_t j = k; j-- > 0;) {
                g.w[i] *= ipow(ctx.primes[j], unsigned(kk & 0xFF));
                kk >>= 8;
            }
        g.sum = acc.sum.value();
        g.count = acc.count;
        g.truncated = std::any_of(g.w.begin(), g.w.end(), [&](uint64_t w) { return double(w) > cap; });
        total.add(acc.sum);
        if (g.truncated) rep.truncated_mass += g.sum;
        rep.lattice_count += g.count;
        rep.groups.push_back(std::move(g));
    }
    std::sort(rep.groups.begin(), rep.groups.end(), [](const auto& x, const auto& y) { return x.w < y.w; });
    rep.total = total.value();
    rep.correlation = correlation_sum(tables, sys, body, T, threads).raw_sum;
    const double denom = std::max(std::abs(rep.correlation), 1e-300);
    rep.relative_error = std::abs(rep.total - rep.correlation) / denom;
    rep.identity_holds = rep.relative_error <= 1e-9;
    return rep;
}

double progression_envelope(const SieveTable& t, uint64_t x, uint64_t q) {
    if (x < 2 || x > t.T()) throw DomainError("envelope: x outside [2, T]");
    const auto& spf = t.spf();
    double lp = 0.0;
    for (uint64_t p = 2; p <= x; ++p)
        if (spf.spf(p) == p && q % p != 0) lp += std::log1p(std::abs(t[p]) / double(p));
    return double(q) / double(euler_phi(q)) / std::log(double(x)) * std::exp(lp);
}

StabilityReport stability_scan(const SieveTable& t, uint64_t x, double C, uint64_t q, int64_t A, size_t grid_points) {
    if (x < 3 || x > t.T()) throw DomainError("stability_scan: x outside the table");
    if (q < 1) throw DomainError("modulus must be positive");
    int64_t a = A % int64_t(q);
    if (a < 0) a += int64_t(q);
    if (std::gcd(uint64_t(a), q) != 1) throw DomainError("stability_scan needs gcd(q, A) = 1");
    const double lx = std::log(double(x));
    if (!(double(q) < std::pow(lx, C))) throw DomainError("stability_scan needs q < (log x)^C");
    const double lo = double(x) * std::pow(lx, -C);
    std::vector<uint64_t> grid;
    for (size_t k = 1; k <= grid_points; ++k) {
        uint64_t g = uint64_t(lo * std::pow(double(x) / lo, double(k) / double(grid_points + 1)));
        if (g >= 1 && double(g) > lo && g < x && (grid.empty() || g > grid.back())) grid.push_back(g);
    }
    grid.push_back(x);
    std::vector<double> S(grid.size());
    CompensatedSum acc;
    size_t gi = 0;
    uint64_t n = a == 0 ? q : uint64_t(a);
    for (; gi < grid.size(); ++gi) {
        for (; n <= grid[gi]; n += q) acc.add(t[n]);
        S[gi] = double(q) * acc.value() / double(grid[gi]);
    }
    StabilityReport rep;
    rep.envelope = progression_envelope(t, x, q);
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        double d = S[i] - S.back();
        rep.rows.push_back({grid[i], d, std::abs(d) / rep.envelope});
        rep.max_normalized = std::max(rep.max_normalized, std::abs(d) / rep.envelope);
    }
    return rep;
}

}  // namespace multcorr
