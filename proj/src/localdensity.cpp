#include "multcorr/localdensity.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "multcorr/padic.hpp"
#include "multcorr/parallel.hpp"
#include "multcorr/wtrick.hpp"

namespace multcorr {

namespace {

using boost::multiprecision::cpp_int;

void check_local_args(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps) {
    if (!is_prime(p)) throw DomainError(std::to_string(p) + " is not prime");
    if (exps.size() != sys.r()) throw DomainError("need one exponent per form");
    for (int c : exps)
        if (c < 0) throw DomainError("exponents must be nonnegative");
}

std::optional<int> alpha_exponent(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps) {
    std::vector<Congruence> rows;
    for (size_t i = 0; i < sys.r(); ++i)
        if (exps[i] > 0) rows.push_back({sys[i].coeffs, -sys[i].constant, exps[i]});
    return congruence_density_exponent(rows, sys.s(), p);
}

BigRational inverse_power(uint64_t p, int k) { return BigRational(1, boost::multiprecision::pow(cpp_int(p), unsigned(k))); }

template <class Scalar>
Scalar power_density(uint64_t p, int k);

template <>
double power_density<double>(uint64_t p, int k) {
    return std::pow(double(p), -double(k));
}
template <>
BigRational power_density<BigRational>(uint64_t p, int k) {
    return inverse_power(p, k);
}

template <class Scalar>
Scalar to_scalar(double v);
template <>
double to_scalar<double>(double v) {
    return v;
}
template <>
BigRational to_scalar<BigRational>(double v) {
    return BigRational(v);
}

template <class Scalar>
BetaReport<Scalar> beta_impl(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs, uint64_t p,
                             int A_max) {
    const size_t r = sys.r();
    if (fs.size() != r) throw DomainError("need one function per form");
    if (A_max < 1) throw DomainError("A_max must be >= 1");
    if (!is_prime(p)) throw DomainError(std::to_string(p) + " is not prime");
    for (const auto& f : fs)
        if (!f.nonnegative()) throw DomainError(f.name() + " is not declared nonnegative");

    // alpha at every exponent vector in [0, A_max+1]^r
    const int B = A_max + 2;
    size_t cells = 1;
    for (size_t i = 0; i < r; ++i) cells *= size_t(B);
    std::vector<Scalar> alpha(cells);
    std::vector<int> e(r, 0);
    for (size_t idx = 0; idx < cells; ++idx) {
        size_t t = idx;
        for (size_t i = 0; i < r; ++i) {
            e[i] = int(t % B);
            t /= B;
        }
        auto k = alpha_exponent(sys, p, e);
        alpha[idx] = k ? power_density<Scalar>(p, *k) : Scalar(0);
    }
    std::vector<std::vector<Scalar>> hv(r, std::vector<Scalar>(size_t(A_max) + 1));
    Scalar norm = 1;
    double Hmax = 1.0;
    for (size_t j = 0; j < r; ++j) {
        hv[j][0] = 1;
        for (int a = 1; a <= A_max; ++a) hv[j][a] = to_scalar<Scalar>(fs[j].at_prime_power(p, a));
        norm = norm / (Scalar(1) + hv[j][1] / Scalar(p));
        Hmax = std::max(Hmax, fs[j].H());
    }

    Scalar value = 0;
    const size_t A1 = size_t(A_max) + 1;
    size_t tuples = 1;
    for (size_t i = 0; i < r; ++i) tuples *= A1;
    for (size_t idx = 0; idx < tuples; ++idx) {
        size_t t = idx;
        Scalar w = 1;
        for (size_t i = 0; i < r; ++i) {
            e[i] = int(t % A1);
            t /= A1;
            w *= hv[i][e[i]];
        }
        if (w == 0) continue;
        // density of p^{a_i} || phi_i for all i
        Scalar dens = 0;
        for (size_t mask = 0; mask < (size_t(1) << r); ++mask) {
            size_t cell = 0, mul = 1;
            for (size_t i = 0; i < r; ++i) {
                cell += size_t(e[i] + ((mask >> i) & 1)) * mul;
                mul *= size_t(B);
            }
            if (__builtin_popcountll(mask) % 2)
                dens -= alpha[cell];
            else
                dens += alpha[cell];
        }
        value += w * dens;
    }

    BetaReport<Scalar> rep;
    rep.p = p;
    rep.value = value * norm;
    rep.A_max = A_max;
    int g = 0;
    for (size_t i = 0; i < r; ++i) {
        int64_t content = 0;
        for (auto c : sys[i].coeffs) content = std::gcd(content, c);
        g = std::max(g, valuation(content, p));
    }
    const double rho = std::pow(Hmax, double(r)) / double(p);
    double nrm;
    if constexpr (std::is_same_v<Scalar, double>)
        nrm = norm;
    else
        nrm = norm.template convert_to<double>();
    rep.tail_bound = rho >= 1.0 ? std::numeric_limits<double>::infinity()
                                : nrm * double(r) * std::pow(double(p), g) * std::pow(rho, A_max + 1) / (1.0 - rho);
    return rep;
}

}  // namespace

BigRational alpha_local_enumerated(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps) {
    check_local_args(sys, p, exps);
    int m = 0;
    for (int c : exps) m = std::max(m, c);
    const uint64_t pm = ipow(p, unsigned(m));
    uint64_t total = 1;
    for (size_t j = 0; j < sys.s(); ++j) {
        total = checked_mul(total, pm);
        if (total > (uint64_t(1) << 32)) throw BudgetError("residue enumeration too large; use smaller exponents");
    }
    std::vector<int64_t> mods(sys.r());
    for (size_t i = 0; i < sys.r(); ++i) mods[i] = int64_t(ipow(p, unsigned(exps[i])));
    std::vector<int64_t> u(sys.s(), 0);
    uint64_t hits = 0;
    for (uint64_t idx = 0; idx < total; ++idx) {
        uint64_t t = idx;
        for (size_t j = 0; j < sys.s(); ++j) {
            u[j] = int64_t(t % pm);
            t /= pm;
        }
        bool ok = true;
        for (size_t i = 0; i < sys.r() && ok; ++i) {
            i128 v = sys[i].constant;
            for (size_t j = 0; j < sys.s(); ++j) v += i128(sys[i].coeffs[j]) * u[j];
            ok = v % mods[i] == 0;
        }
        hits += ok;
    }
    return BigRational(cpp_int(hits), cpp_int(total));
}

BigRational alpha_local(const LinearSystem& sys, uint64_t p, const std::vector<int>& exps) {
    check_local_args(sys, p, exps);
    int m = 0;
    for (int c : exps) m = std::max(m, c);
    if (m == 0) return 1;
    double points = std::pow(double(p), double(m) * double(sys.s()));
    if (points <= double(uint64_t(1) << 12)) return alpha_local_enumerated(sys, p, exps);
    auto k = alpha_exponent(sys, p, exps);
    return k ? inverse_power(p, *k) : BigRational(0);
}

BigRational alpha_composite(const LinearSystem& sys, const std::vector<uint64_t>& moduli) {
    if (moduli.size() != sys.r()) throw DomainError("need one modulus per form");
    uint64_t L = 1;
    for (auto m : moduli) {
        if (m < 1) throw DomainError("moduli must be >= 1");
        L = std::lcm(L, m);
    }
    BigRational prod = 1;
    for (auto [p, k] : factorize(L)) {
        std::vector<int> e;
        for (auto m : moduli) e.push_back(m % p ? 0 : valuation(i128(m), p));
        prod *= alpha_local(sys, p, e);
    }
    return prod;
}

BigRational exact_divisibility_density(const LinearSystem& sys, uint64_t p, const std::vector<int>& a) {
    check_local_args(sys, p, a);
    const size_t r = sys.r();
    BigRational d = 0;
    for (size_t mask = 0; mask < (size_t(1) << r); ++mask) {
        std::vector<int> e = a;
        for (size_t i = 0; i < r; ++i) e[i] += int((mask >> i) & 1);
        auto k = alpha_exponent(sys, p, e);
        BigRational v = k ? inverse_power(p, *k) : BigRational(0);
        if (__builtin_popcountll(mask) % 2)
            d -= v;
        else
            d += v;
    }
    return d;
}

BetaReport<double> beta_p(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs, uint64_t p, int A_max) {
    return beta_impl<double>(sys, fs, p, A_max);
}

BetaReport<BigRational> beta_p_exact(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs, uint64_t p,
                                     int A_max) {
    return beta_impl<BigRational>(sys, fs, p, A_max);
}

double beta_infinity(uint64_t lattice_count, std::span<const MultiplicativeFunction> fs, uint64_t T) {
    if (fs.empty()) return double(lattice_count);
    if (T < 2) throw DomainError("beta_infinity needs T >= 2");
    double log_prod = 0.0;
    const auto ps = primes_up_to(T);
    for (const auto& f : fs)
        for (uint64_t p : ps) log_prod += std::log1p(f.at_prime_power(p, 1) / double(p));
    return double(lattice_count) * std::exp(log_prod - double(fs.size()) * std::log(std::log(double(T))));
}

CorollaryReport predict_main_term_corollary(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs,
                                            uint64_t lattice_count, uint64_t T, int A_max, uint64_t P_max,
                                            unsigned threads) {
    CorollaryReport rep;
    rep.T = T;
    rep.P_max = P_max;
    rep.A_max = A_max;
    rep.beta_inf = beta_infinity(lattice_count, fs, T);
    const auto ps = primes_up_to(P_max);
    rep.primes.resize(ps.size());
    const size_t chunks = std::min<size_t>(kReductionChunks, std::max<size_t>(ps.size(), 1));
    for_each_chunk(chunks, threads, [&](size_t c) {
        for (size_t i = c; i < ps.size(); i += chunks) rep.primes[i] = beta_p(sys, fs, ps[i], A_max);
    });
    double log_prod = 0.0;
    for (const auto& b : rep.primes) {
        log_prod += std::log(b.value);
        rep.max_scaled_deviation = std::max(rep.max_scaled_deviation, std::abs(b.value - 1.0) * double(b.p) * double(b.p));
        rep.tail_sum += b.tail_bound;
    }
    rep.product = std::exp(log_prod);
    rep.prediction = rep.beta_inf * rep.product;
    return rep;
}

std::vector<uint64_t> smooth_numbers(const std::vector<uint64_t>& primes, uint64_t limit) {
    std::vector<uint64_t> out;
    if (limit < 1) return out;
    out.push_back(1);
    // generate by multiplying with primes in nondecreasing index order
    std::vector<std::pair<uint64_t, size_t>> work{{1, 0}};
    while (!work.empty()) {
        auto [n, i0] = work.back();
        work.pop_back();
        for (size_t i = i0; i < primes.size(); ++i) {
            if (n > limit / primes[i]) continue;
            uint64_t m = n * primes[i];
            out.push_back(m);
            work.push_back({m, i});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

TheoremReport predict_main_term_theorem(const LinearSystem& sys, std::span<const MultiplicativeFunction> fs,
                                        const WContext& wctx, const std::vector<std::vector<double>>& residue_means,
                                        uint64_t lattice_count, double B2, uint64_t budget) {
    const size_t r = sys.r(), s = sys.s();
    if (fs.size() != r || residue_means.size() != r) throw DomainError("need one function and residue table per form");
    const uint64_t Wt = wctx.W_tilde;
    for (const auto& t : residue_means)
        if (t.size() != Wt) throw DomainError("residue tables must be indexed modulo W~");
    const double Lw = std::pow(std::log(double(wctx.x)), B2);
    const uint64_t limit = Lw >= 4e18 ? uint64_t(4e18) : uint64_t(Lw);
    const auto smooth = smooth_numbers(wctx.primes, limit);

    std::vector<uint64_t> units;
    for (uint64_t A = 0; A < Wt; ++A)
        if (std::gcd(A, Wt) == 1) units.push_back(A);

    // prime data: exponent of p in W~ and each unit's local residue mod p^b
    struct PrimeData {
        uint64_t p;
        int b;
        uint64_t pb;
    };
    std::vector<PrimeData> pd;
    for (uint64_t p : wctx.primes) {
        int b = Wt % p ? 0 : valuation(i128(Wt), p);
        pd.push_back({p, b, ipow(p, unsigned(b))});
    }

    std::vector<std::vector<double>> hv(r, std::vector<double>(smooth.size()));
    for (size_t j = 0; j < r; ++j)
        for (size_t k = 0; k < smooth.size(); ++k) hv[j][k] = fs[j](smooth[k]);

    uint64_t tuples = 1;
    for (size_t j = 0; j < r; ++j) tuples = checked_mul(tuples, uint64_t(smooth.size()));
    uint64_t unit_tuples = 1;
    for (size_t j = 0; j < r; ++j) unit_tuples = checked_mul(unit_tuples, uint64_t(units.size()));
    if (tuples > budget / std::max<uint64_t>(unit_tuples, 1)) {
        std::ostringstream os;
        os << "residue enumeration budget exceeded: " << tuples << " smooth tuples (largest w = " << smooth.back()
           << ") times " << unit_tuples << " residue tuples for W~ = " << Wt;
        throw BudgetError(os.str());
    }

    // cache of local density tables keyed by (prime index, a_j, u_j mod p^b)
    std::map<std::vector<int64_t>, std::vector<double>> cache;
    auto local_table = [&](size_t pi, const std::vector<uint64_t>& w) -> const std::vector<double>& {
        const auto& P = pd[pi];
        std::vector<int64_t> key{int64_t(pi)};
        std::vector<int> a(r);
        std::vector<uint64_t> u(r);
        for (size_t j = 0; j < r; ++j) {
            a[j] = w[j] % P.p ? 0 : valuation(i128(w[j]), P.p);
            u[j] = w[j] / ipow(P.p, unsigned(a[j]));
            key.push_back(a[j]);
            key.push_back(int64_t(u[j] % P.pb));
        }
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        std::vector<double> tab(unit_tuples, 0.0);
        std::vector<Congruence> rows(r);
        for (size_t ti = 0; ti < unit_tuples; ++ti) {
            size_t t = ti;
            for (size_t j = 0; j < r; ++j) {
                uint64_t A = units[t % units.size()];
                t /= units.size();
                const int e = a[j] + P.b;
                const uint64_t mod = ipow(P.p, unsigned(e));
                uint64_t target = uint64_t((u128(ipow(P.p, unsigned(a[j]))) * (u[j] % P.pb) * (A % P.pb)) % mod);
                int64_t tgt = int64_t(target) - sys[j].constant % int64_t(mod);
                rows[j] = {sys[j].coeffs, tgt, e};
            }
            auto k = congruence_density_exponent(rows, s, P.p);
            tab[ti] = k ? std::pow(double(P.p), -double(*k)) : 0.0;
        }
        return cache.emplace(std::move(key), std::move(tab)).first->second;
    };

    // prod_j S_j(A_j) for every unit tuple
    std::vector<double> Sprod(unit_tuples, 1.0);
    for (size_t ti = 0; ti < unit_tuples; ++ti) {
        size_t t = ti;
        for (size_t j = 0; j < r; ++j) {
            Sprod[ti] *= residue_means[j][units[t % units.size()]];
            t /= units.size();
        }
    }

    TheoremReport rep;
    rep.residue_classes = unit_tuples;
    CompensatedSum total;
    std::vector<size_t> idx(r, 0);
    std::vector<uint64_t> w(r);
    for (uint64_t n = 0; n < tuples; ++n) {
        uint64_t t = n;
        double weight = 1.0;
        for (size_t j = 0; j < r; ++j) {
            idx[j] = t % smooth.size();
            t /= smooth.size();
            w[j] = smooth[idx[j]];
            weight *= hv[j][idx[j]];
        }
        if (weight == 0.0) continue;
        ++rep.tuples;
        std::vector<const std::vector<double>*> loc;
        for (size_t pi = 0; pi < pd.size(); ++pi) loc.push_back(&local_table(pi, w));
        CompensatedSum inner;
        for (size_t ti = 0; ti < unit_tuples; ++ti) {
            double v = Sprod[ti];
            for (auto* L : loc) v *= (*L)[ti];
            inner.add(v);
        }
        total.add(weight * inner.value());
    }
    rep.normalized = total.value();
    rep.prediction = double(lattice_count) * rep.normalized;
    return rep;
}

}  // namespace multcorr
