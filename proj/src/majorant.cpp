#include "multcorr/majorant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "multcorr/parallel.hpp"

namespace multcorr {

SharpFlatSplit split(const MultiplicativeFunction& h) {
    auto sharp_rule = [h](uint64_t p, int k) {
        double m = 1.0;
        for (int j = 1; j <= k; ++j) m = std::max(m, std::abs(h.at_prime_power(p, j)));
        return m;
    };
    auto flat_rule = [h](uint64_t p, int k) { return std::min(1.0, std::abs(h.at_prime_power(p, k))); };
    auto prep = [h](uint64_t T) { h.prepare(T); };
    return {h, MultiplicativeFunction(h.name() + "#sharp", sharp_rule, h.H(), true, std::nullopt, prep),
            MultiplicativeFunction(h.name() + "#flat", flat_rule, 1.0, true, std::nullopt, prep)};
}

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double SmoothCutoff::operator()(double x) const {
    if (x <= support_lo || x >= support_hi) return 0.0;
    if (x >= plateau_lo && x <= plateau_hi) return 1.0;
    if (x < plateau_lo) return smooth_step((x - support_lo) / (plateau_lo - support_lo));
    return 1.0 - smooth_step((x - plateau_hi) / (support_hi - plateau_hi));
}

MajorantParams MajorantParams::make(uint64_t T, double gamma, double C1) {
    if (!(gamma > 0.0 && gamma < 0.5)) throw DomainError("gamma must lie in (0, 1/2)");
    if (T < 16) throw DomainError("majorant needs T >= 16");
    MajorantParams P;
    P.gamma = gamma;
    P.C1 = C1;
    P.T = T;
    P.lambda = SmoothCutoff::lambda(gamma);
    return P;
}

std::vector<USetSpec> u_set_specs(const MajorantParams& P) {
    const double lt = std::log(double(P.T)), llt3 = std::pow(std::log(lt), 3.0);
    const int k0 = int(std::ceil(4.0 / P.gamma - 1e-12));
    const int kmax = std::max(k0, int(std::floor(llt3)));
    const int lmax_raw = llt3 >= 1.0 ? int(std::floor(std::log2(llt3))) : 0;
    std::vector<USetSpec> out;
    for (int k = k0; k <= kmax; ++k) {
        const int l0 = int(std::ceil(std::log2(double(k)) - 2.0 - 1e-12));
        if (k == k0) {
            out.push_back({k, l0, 0, 1.0, 1.0});
            continue;
        }
        for (int l = l0; l <= std::max(l0, lmax_raw); ++l) {
            int omega = int(std::ceil(P.gamma * k * (l + 3 - std::log2(double(k))) / 200.0));
            double lo = std::exp(lt / std::pow(2.0, l + 1)), hi = std::exp(lt / std::pow(2.0, l));
            out.push_back({k, l, std::max(omega, 1), lo, hi});
        }
    }
    return out;
}

uint64_t erdos_divisor(uint64_t n, uint64_t x, double gamma) {
    const double X = std::pow(double(x), gamma);
    if (double(n) < X * (1 - 1e-12) || n > x) throw DomainError("erdos_divisor needs x^gamma <= n <= x");
    uint64_t best = 1, prod = 1;
    for (auto [p, k] : factorize(n)) {
        prod *= ipow(p, unsigned(k));
        if (double(prod) > X * (1 + 1e-12)) break;
        best = prod;
    }
    return best;
}

uint64_t erdos_divisor_flat(uint64_t n, uint64_t x, double gamma, const std::function<bool(uint64_t)>& flat_prime) {
    if (n < 1 || n > x) throw DomainError("erdos_divisor_flat needs 1 <= n <= x");
    uint64_t m = 1;
    for (auto [p, k] : factorize(n))
        if (flat_prime(p)) m *= ipow(p, unsigned(k));
    if (double(m) <= std::pow(double(x), gamma) * (1 + 1e-12)) return m;
    return erdos_divisor(m, x, gamma);
}

namespace {

// sum over squarefree d | m built from the listed primes of mu(d) chi(log d / log Q)
double restricted_mobius(const std::vector<uint64_t>& primes, double logQ, const SmoothCutoff& chi) {
    double s = 0.0;
    const size_t k = primes.size();
    // prune: chi vanishes once log d >= log Q
    std::function<void(size_t, double, int)> rec = [&](size_t i, double logd, int sign) {
        if (logd >= logQ) return;
        if (i == k) {
            s += sign * chi(logd / logQ);
            return;
        }
        rec(i + 1, logd, sign);
        rec(i + 1, logd + std::log(double(primes[i])), -sign);
    };
    rec(0, 0.0, 1);
    return s;
}

}  // namespace

double sigma_flat(double Q, const Factorization& m, const std::function<bool(uint64_t)>& flat_prime,
                  const SmoothCutoff& chi) {
    if (!(Q > 1.0)) throw DomainError("sigma_flat needs Q > 1");
    std::vector<uint64_t> ps;
    for (auto [p, k] : m)
        if (flat_prime(p)) ps.push_back(p);
    double s = restricted_mobius(ps, std::log(Q), chi);
    return s * s;
}

namespace {

MultiplicativeFunction mobius_of(const MultiplicativeFunction& f) {
    return MultiplicativeFunction(
        f.name() + "#g",
        [f](uint64_t p, int k) { return f.at_prime_power(p, k) - (k == 1 ? 1.0 : f.at_prime_power(p, k - 1)); },
        std::max(2.0, f.H()), false, std::nullopt);
}

}  // namespace

Majorant::Majorant(const MultiplicativeFunction& h, const MajorantParams& P)
    : P_(P),
      split_(split(h)),
      base_(h, P.T),
      sharp_(split_.sharp, P.T),
      flat_(split_.flat, P.T),
      g_(mobius_of(split_.sharp), P.T),
      spf_(std::make_shared<SpfTable>(P.T)),
      specs_(u_set_specs(P)) {
    log_T_ = std::log(double(P.T));
    loglog_T_ = std::log(log_T_);
}

double Majorant::truncated_divisor_sum(const Factorization& m) const {
    const double scale = P_.gamma * log_T_;
    double s = 0.0;
    std::function<void(size_t, uint64_t, double)> rec = [&](size_t i, uint64_t d, double logd) {
        if (logd >= scale) return;  // chi(>= 1) = 0
        if (i == m.size()) {
            s += g_[d] * P_.chi(logd / scale);
            return;
        }
        rec(i + 1, d, logd);
        uint64_t pk = 1;
        for (int k = 1; k <= m[i].k; ++k) {
            pk *= m[i].p;
            if (g_[pk] != 0.0) rec(i + 1, d * pk, logd + std::log(double(pk)));
        }
    };
    rec(0, 1, 0.0);
    return s;
}

bool Majorant::in_S(const Factorization& n) const {
    const double small = std::exp(log_T_ / std::pow(loglog_T_, 3.0));
    double smooth_log = 0.0;
    for (auto [p, k] : n) {
        const double lp = std::log(double(p));
        if (k >= std::max(2.0, P_.C1 * loglog_T_ / lp)) return true;
        if (double(p) <= small) smooth_log += k * lp;
    }
    return smooth_log >= P_.gamma * log_T_ / loglog_T_;
}

double Majorant::nu_sharp(const Factorization& n) const {
    const double H = split_.base.H();
    double total = 0.0;
    std::vector<size_t> admissible;
    for (const auto& u : specs_) {
        const double w = std::pow(H, u.kappa);
        if (u.omega == 0) {
            total += w * truncated_divisor_sum(n);
            continue;
        }
        admissible.clear();
        for (size_t i = 0; i < n.size(); ++i) {
            double p = double(n[i].p);
            if (p >= u.I_lo && p <= u.I_hi && sharp_[n[i].p] != 1.0) admissible.push_back(i);
        }
        if (admissible.size() < size_t(u.omega)) continue;
        // every omega-subset of the admissible primes
        std::vector<bool> pick(admissible.size(), false);
        std::fill(pick.begin(), pick.begin() + u.omega, true);
        do {
            double hu = 1.0;
            Factorization rest;
            for (size_t i = 0, a = 0; i < n.size(); ++i) {
                bool chosen = a < admissible.size() && admissible[a] == i && pick[a];
                if (a < admissible.size() && admissible[a] == i) ++a;
                if (chosen)
                    hu *= sharp_[n[i].p];
                else
                    rest.push_back(n[i]);
            }
            total += w * hu * truncated_divisor_sum(rest);
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    if (in_S(n)) total += sharp_[from_factorization(n)];
    return total;
}

double Majorant::nu_flat(const Factorization& n, uint64_t x) const {
    const double lx = std::log(double(x)), logXg = P_.gamma * lx;
    auto is_flat = [&](uint64_t p) { return flat_prime(p); };

    // first term: m | n inside <P_flat>
    Factorization flat_part;
    for (auto pk : n)
        if (flat_prime(pk.p)) flat_part.push_back(pk);
    double first = 0.0;
    std::function<void(size_t, uint64_t, double, Factorization&)> rec = [&](size_t i, uint64_t m, double logm,
                                                                            Factorization& cof) {
        if (logm >= logXg) return;
        if (i == flat_part.size()) {
            double hm = flat_[m];
            if (hm == 0.0) return;
            // cofactor n/m: flat primes with their remaining exponents
            first += hm * P_.chi(logm / logXg) * sigma_flat(std::exp(logXg), cof, is_flat, P_.chi);
            return;
        }
        auto [p, k] = flat_part[i];
        uint64_t pj = 1;
        for (int j = 0; j <= k; ++j) {
            if (j > 0) pj *= p;
            if (j < k) cof.push_back({p, k - j});
            rec(i + 1, m * pj, logm + std::log(double(pj)), cof);
            if (j < k) cof.pop_back();
        }
    };
    Factorization cof;
    rec(0, 1, 0.0, cof);

    // second term: a large prime Q | n and m | n built from primes below Q
    double second = 0.0;
    const double qmin = std::exp(logXg / std::pow(loglog_T_, 3.0));
    for (size_t qi = 0; qi < n.size(); ++qi) {
        const uint64_t Q = n[qi].p;
        if (double(Q) <= qmin) continue;
        const double hQ = flat_[Q];
        if (hQ == 0.0) continue;
        const double logQ = std::log(double(Q));
        std::function<void(size_t, uint64_t, double, Factorization&)> rec2 = [&](size_t i, uint64_t m, double logm,
                                                                                 Factorization& rest) {
            const double lq = logQ + logm;
            if (lq >= 4.0 * logXg) return;
            if (i == qi) {
                // primes >= Q stay whole in the cofactor; Q keeps k-1 copies
                Factorization c = rest;
                if (n[qi].k > 1) c.push_back({Q, n[qi].k - 1});
                for (size_t t = qi + 1; t < n.size(); ++t) c.push_back(n[t]);
                double hm = flat_[m];
                if (hm != 0.0) second += hQ * hm * P_.lambda(lq / lx) * sigma_flat(double(Q), c, is_flat, P_.chi);
                return;
            }
            auto [p, k] = n[i];
            uint64_t pj = 1;
            for (int j = 0; j <= k; ++j) {
                if (j > 0) pj *= p;
                if (j < k) rest.push_back({p, k - j});
                rec2(i + 1, m * pj, logm + std::log(double(pj)), rest);
                if (j < k) rest.pop_back();
            }
        };
        Factorization rest;
        rec2(0, 1, 0.0, rest);
    }
    return first + second;
}

double Majorant::nu(uint64_t n) const {
    if (n < 1 || n > P_.T) throw DomainError("nu(n) needs 1 <= n <= T");
    auto f = spf_->factorize(n);
    return nu_sharp(f) * nu_flat(f, P_.T);
}

std::vector<double> Majorant::table(unsigned threads) const {
    std::vector<double> v(P_.T + 1, 0.0);
    const uint64_t N = P_.T;
    for_each_chunk(kReductionChunks, threads, [&](size_t c) {
        uint64_t a = 1 + N * c / kReductionChunks, b = N * (c + 1) / kReductionChunks;
        for (uint64_t n = a; n <= b; ++n) v[n] = nu(n);
    });
    return v;
}

AverageOrderReport majorant_average_order(const SieveTable& h, std::span<const double> nu_values, const WContext& ctx,
                                          uint64_t T, int64_t A) {
    if (std::gcd(uint64_t(std::abs(A)), ctx.W) != 1) throw DomainError("majorant_average_order needs gcd(A, W) = 1");
    if (T > h.T() || T >= nu_values.size()) throw DomainError("tables too short for T");
    AverageOrderReport r;
    r.T = T;
    const uint64_t q = ctx.W_tilde;
    r.S_h = mean_value_progression(h.view(), T, q, A);
    r.S_nu = mean_value_progression(TableView{nu_values, nu_values.size() - 1}, T, q, A);
    const double w = ctx.w_of_x;
    double lp = 0.0;
    for (uint64_t p : primes_up_to(T - 1))
        if (double(p) > w) lp += std::log1p(std::abs(h[p]) / double(p));
    r.envelope = std::log(w) / std::log(double(T)) * std::exp(lp);
    r.lower_ratio = std::abs(r.S_h) / r.S_nu;
    r.upper_ratio = r.S_nu / r.envelope;
    return r;
}

LinearFormsRatio linear_forms_ratio(std::span<const TableView> nu_tables, const LinearSystem& sys,
                                    const ConvexBody& body, uint64_t T, const WTrickData& wt, unsigned threads) {
    int64_t Wp = 1;
    for (auto w : wt.W) Wp = std::lcm(Wp, w);
    auto res = correlation_sum_wtricked(nu_tables, sys, body, checked_mul(T, uint64_t(Wp)), wt, threads);
    LinearFormsRatio out;
    out.lattice_count = res.lattice_count;
    out.joint = res.raw_sum / double(res.lattice_count);
    out.ratio = out.joint;
    for (size_t i = 0; i < sys.r(); ++i) {
        CompensatedSum s;
        for (uint64_t n = 1; n <= T; ++n) {
            uint64_t m = uint64_t(wt.W[i]) * n + uint64_t(wt.A[i]);
            s.add(nu_tables[i].at(m));
        }
        out.marginals.push_back(s.value() / double(T));
        out.ratio /= out.marginals.back();
    }
    return out;
}

}  // namespace multcorr
