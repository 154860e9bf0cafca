#include "multcorr/linsys.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace multcorr {

Rational parse_rational(const std::string& raw) {
    std::string s;
    for (char c : raw)
        if (!isspace((unsigned char)c)) s.push_back(c);
    auto to_i64 = [&](const std::string& t) {
        size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (t.empty() || used != t.size()) throw ConfigError("not a rational number: '" + raw + "'");
        return int64_t(v);
    };
    if (auto slash = s.find('/'); slash != std::string::npos) {
        int64_t den = to_i64(s.substr(slash + 1));
        if (den == 0) throw ConfigError("zero denominator in '" + raw + "'");
        return Rational(to_i64(s.substr(0, slash)), den);
    }
    if (auto dot = s.find('.'); dot != std::string::npos) {
        std::string frac = s.substr(dot + 1);
        if (frac.size() > 15) throw ConfigError("too many decimals in '" + raw + "'");
        std::string ip = s.substr(0, dot);
        bool neg = !ip.empty() && ip[0] == '-';
        if (ip.empty() || ip == "-" || ip == "+") ip += "0";
        int64_t den = int64_t(ipow(10, unsigned(frac.size())));
        int64_t whole = to_i64(ip), f = frac.empty() ? 0 : to_i64(frac);
        if (f < 0) throw ConfigError("not a rational number: '" + raw + "'");
        return Rational(whole, 1) + Rational(neg ? -f : f, den);
    }
    return Rational(to_i64(s), 1);
}

int64_t LinearForm::operator()(std::span<const int64_t> n) const {
    if (n.size() != coeffs.size()) throw DomainError("form evaluated at a point of wrong dimension");
    int64_t v = constant;
    for (size_t j = 0; j < n.size(); ++j) v = checked_add(v, checked_mul(coeffs[j], n[j]));
    return v;
}

std::string LinearForm::str() const {
    std::ostringstream os;
    bool first = true;
    for (size_t j = 0; j < coeffs.size(); ++j) {
        if (!coeffs[j]) continue;
        if (!first) os << (coeffs[j] < 0 ? " - " : " + ");
        else if (coeffs[j] < 0) os << "-";
        int64_t c = coeffs[j] < 0 ? -coeffs[j] : coeffs[j];
        if (c != 1) os << c << "*";
        os << "n" << (j + 1);
        first = false;
    }
    if (constant) os << (constant < 0 ? " - " : " + ") << (constant < 0 ? -constant : constant);
    return os.str();
}

LinearSystem::LinearSystem(std::vector<LinearForm> forms, bool allow_proportional) : forms_(std::move(forms)) {
    if (forms_.empty()) throw DomainError("linear system needs at least one form");
    s_ = forms_[0].coeffs.size();
    if (s_ == 0) throw DomainError("forms need at least one variable");
    for (size_t i = 0; i < forms_.size(); ++i) {
        const auto& c = forms_[i].coeffs;
        if (c.size() != s_) throw DomainError("form " + std::to_string(i + 1) + " has the wrong number of coefficients");
        if (std::all_of(c.begin(), c.end(), [](int64_t v) { return v == 0; }))
            throw DomainError("form " + std::to_string(i + 1) + " has zero non-constant part");
    }
    for (size_t i = 0; i < forms_.size(); ++i)
        for (size_t j = i + 1; j < forms_.size(); ++j) {
            const auto &a = forms_[i].coeffs, &b = forms_[j].coeffs;
            bool prop = true;
            for (size_t k = 0; k < s_ && prop; ++k)
                for (size_t l = k + 1; l < s_ && prop; ++l)
                    if (i128(a[k]) * b[l] - i128(a[l]) * b[k] != 0) prop = false;
            if (prop) {
                independent_ = false;
                if (!allow_proportional)
                    throw DomainError("forms " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                      " have proportional coefficient vectors");
            }
        }
}

namespace {

i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b) {
        i128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// Divides a by the gcd of its entries and floors rhs; same integer solutions.
bool tighten(Constraint& c) {
    i128 g = 0;
    for (i128 v : c.a) g = gcd128(g, v);
    if (g == 0) return false;
    if (g > 1) {
        for (auto& v : c.a) v /= g;
        c.rhs = floor_div(c.rhs, g);
    }
    return true;
}

int64_t clamp64(i128 v) {
    constexpr i128 lo = std::numeric_limits<int64_t>::min() / 4, hi = std::numeric_limits<int64_t>::max() / 4;
    return int64_t(std::clamp(v, lo, hi));
}

BigRational to_big(i128 v) { return BigRational(boost::multiprecision::cpp_int(to_string(v))); }

// Solves M x = rhs exactly; false if singular.
bool solve_exact(std::vector<std::vector<BigRational>> M, std::vector<BigRational> rhs, std::vector<BigRational>& x) {
    const size_t n = rhs.size();
    for (size_t c = 0; c < n; ++c) {
        size_t piv = c;
        while (piv < n && M[piv][c] == 0) ++piv;
        if (piv == n) return false;
        std::swap(M[piv], M[c]);
        std::swap(rhs[piv], rhs[c]);
        for (size_t r = 0; r < n; ++r) {
            if (r == c || M[r][c] == 0) continue;
            BigRational f = M[r][c] / M[c][c];
            for (size_t k = c; k < n; ++k) M[r][k] -= f * M[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    x.resize(n);
    for (size_t i = 0; i < n; ++i) x[i] = rhs[i] / M[i][i];
    return true;
}

}  // namespace

Polytope::Polytope(size_t s, std::vector<Constraint> cons) : s_(s), levels_(s) {
    if (s == 0) throw DomainError("polytope dimension must be positive");
    for (auto& c : cons)
        if (c.a.size() != s) throw DomainError("constraint of wrong dimension");
    orig_ = cons;
    bool empty = false;
    std::map<std::vector<i128>, i128> top;
    for (auto c : cons) {
        if (!tighten(c)) {
            if (c.rhs < 0) empty = true;
            continue;
        }
        auto [it, fresh] = top.try_emplace(c.a, c.rhs);
        if (!fresh) it->second = std::min(it->second, c.rhs);
    }
    for (auto& [a, rhs] : top) levels_[s - 1].push_back({a, rhs});
    for (size_t j = s - 1; j >= 1; --j) {
        std::map<std::vector<i128>, i128> next;
        auto add = [&](Constraint c) {
            if (!tighten(c)) {
                if (c.rhs < 0) empty = true;
                return;
            }
            auto [it, fresh] = next.try_emplace(c.a, c.rhs);
            if (!fresh) it->second = std::min(it->second, c.rhs);
        };
        const auto& cur = levels_[j];
        for (const auto& c : cur)
            if (c.a[j] == 0) add(c);
        for (const auto& pc : cur) {
            if (pc.a[j] <= 0) continue;
            for (const auto& nc : cur) {
                if (nc.a[j] >= 0) continue;
                i128 p = pc.a[j], q = -nc.a[j];
                Constraint c{std::vector<i128>(s, 0), checked_add(checked_mul(q, pc.rhs), checked_mul(p, nc.rhs))};
                for (size_t k = 0; k < j; ++k) c.a[k] = checked_add(checked_mul(q, pc.a[k]), checked_mul(p, nc.a[k]));
                add(std::move(c));
            }
        }
        for (auto& [a, rhs] : next) levels_[j - 1].push_back({a, rhs});
    }
    if (empty)
        for (auto& l : levels_) l = {Constraint{std::vector<i128>(s, 0), -1}};
}

std::pair<int64_t, int64_t> Polytope::bounds(size_t level, const std::vector<int64_t>& x) const {
    i128 lo = std::numeric_limits<int64_t>::min() / 4, hi = std::numeric_limits<int64_t>::max() / 4;
    for (const auto& c : levels_[level]) {
        i128 t = c.rhs;
        for (size_t i = 0; i < level; ++i) t -= c.a[i] * i128(x[i]);
        i128 aj = c.a[level];
        if (aj > 0)
            hi = std::min(hi, floor_div(t, aj));
        else if (aj < 0)
            lo = std::max(lo, ceil_div(t, aj));
        else if (t < 0)
            return {1, 0};
    }
    return {clamp64(lo), clamp64(hi)};
}

std::pair<int64_t, int64_t> Polytope::first_range() const { return bounds(0, std::vector<int64_t>(s_, 0)); }

uint64_t Polytope::count_points() const {
    auto [a, b] = first_range();
    uint64_t n = 0;
    for_each_row(a, b, [&](std::span<const int64_t>, int64_t lo, int64_t hi) { n += uint64_t(hi - lo + 1); });
    return n;
}

std::vector<std::vector<BigRational>> Polytope::vertices() const {
    std::vector<std::vector<BigRational>> out;
    const size_t m = orig_.size();
    if (m < s_) return out;
    std::vector<size_t> idx(s_);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::vector<BigRational>> A(m, std::vector<BigRational>(s_));
    std::vector<BigRational> b(m);
    for (size_t i = 0; i < m; ++i) {
        for (size_t k = 0; k < s_; ++k) A[i][k] = to_big(orig_[i].a[k]);
        b[i] = to_big(orig_[i].rhs);
    }
    while (true) {
        std::vector<std::vector<BigRational>> M;
        std::vector<BigRational> rhs, x;
        for (size_t i : idx) {
            M.push_back(A[i]);
            rhs.push_back(b[i]);
        }
        if (solve_exact(M, rhs, x)) {
            bool ok = true;
            for (size_t i = 0; i < m && ok; ++i) {
                BigRational lhs = 0;
                for (size_t k = 0; k < s_; ++k) lhs += A[i][k] * x[k];
                ok = lhs <= b[i];
            }
            if (ok && std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
        }
        // next s-subset of [0, m)
        size_t k = s_;
        while (k > 0 && idx[k - 1] == m - s_ + k - 1) --k;
        if (k == 0) break;
        ++idx[k - 1];
        for (size_t t = k; t < s_; ++t) idx[t] = idx[t - 1] + 1;
    }
    return out;
}

namespace {

Constraint scaled_row(const Halfspace& h, int64_t num, int64_t den) {
    int64_t L = 1;
    auto fold = [&](const Rational& q) { L = std::lcm(L, q.denominator()); };
    for (auto& q : h.normal) fold(q);
    fold(h.offset);
    fold(h.slack);
    Constraint c{{}, 0};
    for (auto& q : h.normal) c.a.push_back(checked_mul(i128(q.numerator() * (L / q.denominator())), i128(den)));
    i128 b = i128(h.offset.numerator()) * (L / h.offset.denominator());
    i128 sl = i128(h.slack.numerator()) * (L / h.slack.denominator());
    c.rhs = checked_add(checked_mul(b, i128(num)), checked_mul(sl, i128(den)));
    return c;
}

}  // namespace

ConvexBody::ConvexBody(size_t s, std::vector<Halfspace> halfspaces) : s_(s), hs_(std::move(halfspaces)) {
    if (s == 0) throw DomainError("body dimension must be positive");
    for (const auto& h : hs_)
        if (h.normal.size() != s) throw DomainError("half-space normal has the wrong dimension");
    for (size_t j = 0; j < s; ++j) {
        std::vector<Rational> e(s, 0);
        e[j] = 1;
        hs_.push_back({e, 1, 0});
        e[j] = -1;
        hs_.push_back({e, 1, 0});
    }
    std::vector<Constraint> unit;
    for (const auto& h : hs_) {
        Halfspace u = h;
        u.slack = 0;
        unit.push_back(scaled_row(u, 1, 1));
    }
    Polytope P(s, unit);
    auto V = P.vertices();
    if (V.empty()) throw DomainError("convex body is empty");
    std::vector<BigRational> c(s, 0);
    for (const auto& v : V)
        for (size_t k = 0; k < s; ++k) c[k] += v[k];
    for (auto& ck : c) ck /= BigRational(V.size());
    for (const auto& row : unit) {
        BigRational lhs = 0;
        for (size_t k = 0; k < s; ++k) lhs += to_big(row.a[k]) * c[k];
        if (!(lhs < to_big(row.rhs))) throw DomainError("convex body has empty interior");
    }
    interior_ = c;
}

Polytope ConvexBody::dilate(int64_t num, int64_t den) const {
    if (num < 0 || den <= 0) throw DomainError("dilation factor must be nonnegative");
    std::vector<Constraint> cons;
    for (const auto& h : hs_) cons.push_back(scaled_row(h, num, den));
    return Polytope(s_, std::move(cons));
}

ConvexBody ConvexBody::interval(Rational lo, Rational hi, Rational lo_slack, Rational hi_slack) {
    return ConvexBody(1, {Halfspace{{-1}, -lo, lo_slack}, Halfspace{{1}, hi, hi_slack}});
}

ConvexBody ConvexBody::box(size_t s, Rational lo, Rational hi) {
    std::vector<Halfspace> hs;
    for (size_t j = 0; j < s; ++j) {
        std::vector<Rational> e(s, 0);
        e[j] = 1;
        hs.push_back({e, hi, 0});
        e[j] = -1;
        hs.push_back({e, -lo, 0});
    }
    return ConvexBody(s, std::move(hs));
}

void enumerate_lattice(const ConvexBody& body, uint64_t T, const std::function<void(std::span<const int64_t>)>& fn) {
    if (T < 1) throw DomainError("enumerate_lattice needs T >= 1");
    body.dilate(int64_t(T)).for_each_point(fn);
}

void check_form_ranges(const Polytope& P, const LinearSystem& sys, const std::vector<int64_t>& W,
                       const std::vector<int64_t>& A, const std::vector<uint64_t>& limits) {
    for (const auto& v : P.vertices()) {
        for (size_t i = 0; i < sys.r(); ++i) {
            BigRational val = sys[i].constant;
            for (size_t k = 0; k < sys.s(); ++k) val += BigRational(sys[i].coeffs[k]) * v[k];
            val = val * W[i] + A[i];
            if (val < 1 || val > BigRational(limits[i])) {
                std::ostringstream os;
                os << "form " << (i + 1) << " (" << sys[i].str() << ") leaves [1, " << limits[i] << "] at vertex (";
                for (size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << v[k];
                os << "): value " << val;
                throw DomainError(os.str());
            }
        }
    }
}

namespace {

CorrelationResult correlate(std::span<const TableView> tables, const LinearSystem& sys, const Polytope& P,
                            const std::vector<int64_t>& W, const std::vector<int64_t>& A, unsigned threads) {
    const size_t r = sys.r(), s = sys.s();
    if (tables.size() != r) throw DomainError("need one table per form");
    if (P.dim() != s) throw DomainError("body and system dimensions differ");
    std::vector<uint64_t> limits;
    for (auto& t : tables) limits.push_back(t.limit);
    check_form_ranges(P, sys, W, A, limits);

    std::vector<int64_t> step(r);
    for (size_t i = 0; i < r; ++i) step[i] = checked_mul(W[i], sys[i].coeffs[s - 1]);

    auto [a, b] = P.first_range();
    struct Part {
        CompensatedSum sum;
        uint64_t count = 0;
        std::vector<uint64_t> vanish;
    };
    std::vector<Part> parts(kReductionChunks);
    const i128 span = a <= b ? i128(b) - a + 1 : 0;
    for_each_chunk(kReductionChunks, threads, [&](size_t c) {
        Part& part = parts[c];
        part.vanish.assign(r, 0);
        if (span == 0) return;
        int64_t ca = int64_t(a + span * i128(c) / i128(kReductionChunks));
        int64_t cb = int64_t(a + span * i128(c + 1) / i128(kReductionChunks) - 1);
        if (ca > cb) return;
        std::vector<int64_t> v(r), pt(s);
        std::vector<const double*> vals(r);
        for (size_t i = 0; i < r; ++i) vals[i] = tables[i].values.data();
        P.for_each_row(ca, cb, [&](std::span<const int64_t> prefix, int64_t lo, int64_t hi) {
            std::copy(prefix.begin(), prefix.end(), pt.begin());
            pt[s - 1] = lo;
            for (size_t i = 0; i < r; ++i) {
                v[i] = checked_add(checked_mul(W[i], sys[i](pt)), A[i]);
                int64_t last = checked_add(v[i], checked_mul(step[i], hi - lo));
                if (std::min(v[i], last) < 1 || uint64_t(std::max(v[i], last)) > limits[i]) {
                    pt[s - 1] = (v[i] < 1 || uint64_t(v[i]) > limits[i]) ? lo : hi;
                    std::ostringstream os;
                    os << "form " << (i + 1) << " out of range at lattice point (";
                    for (size_t k = 0; k < s; ++k) os << (k ? ", " : "") << pt[k];
                    os << ")";
                    throw DomainError(os.str());
                }
            }
            for (int64_t t = lo; t <= hi; ++t) {
                double prod = 1.0;
                for (size_t i = 0; i < r; ++i) {
                    double x = vals[i][v[i]];
                    if (x == 0.0) ++part.vanish[i];
                    prod *= x;
                    v[i] += step[i];
                }
                part.sum.add(prod);
            }
            part.count += uint64_t(hi - lo + 1);
        });
    });
    CorrelationResult res;
    res.vanishing.assign(r, 0);
    CompensatedSum total;
    for (auto& part : parts) {
        total.add(part.sum);
        res.lattice_count += part.count;
        for (size_t i = 0; i < r && !part.vanish.empty(); ++i) res.vanishing[i] += part.vanish[i];
    }
    res.raw_sum = total.value();
    return res;
}

}  // namespace

CorrelationResult correlation_sum(std::span<const TableView> tables, const LinearSystem& sys, const ConvexBody& body,
                                  uint64_t T, unsigned threads) {
    if (T < 1) throw DomainError("T must be >= 1");
    auto res = correlate(tables, sys, body.dilate(int64_t(T)), std::vector<int64_t>(sys.r(), 1),
                         std::vector<int64_t>(sys.r(), 0), threads);
    res.T = T;
    return res;
}

CorrelationResult correlation_sum_wtricked(std::span<const TableView> tables, const LinearSystem& sys,
                                           const ConvexBody& body, uint64_t T, const WTrickData& wt,
                                           unsigned threads) {
    if (wt.W.size() != sys.r() || wt.A.size() != sys.r()) throw DomainError("need one (W_i, A_i) per form");
    int64_t Wp = 1;
    for (size_t i = 0; i < sys.r(); ++i) {
        if (wt.W[i] < 1) throw DomainError("W_i must be >= 1");
        if (std::gcd(uint64_t(std::abs(wt.A[i])), wt.W_of_T) != 1)
            throw DomainError("A_" + std::to_string(i + 1) + " = " + std::to_string(wt.A[i]) +
                              " is not coprime to W(T) = " + std::to_string(wt.W_of_T));
        Wp = std::lcm(Wp, wt.W[i]);
    }
    auto res = correlate(tables, sys, body.dilate(int64_t(T), Wp), wt.W, wt.A, threads);
    res.T = T;
    return res;
}

}  // namespace multcorr
