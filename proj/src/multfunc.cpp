#include "multcorr/multfunc.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace multcorr {

MultiplicativeFunction::MultiplicativeFunction(std::string name, Rule rule, double H, bool nonnegative,
                                               std::optional<double> alpha_hint, Prepare prepare)
    : name_(std::move(name)), rule_(std::move(rule)), H_(H), nonnegative_(nonnegative),
      alpha_hint_(alpha_hint), prepare_(std::move(prepare)) {
    if (!(H_ >= 1.0)) throw DomainError("growth constant H must be >= 1 for " + name_);
}

double MultiplicativeFunction::at_prime_power(uint64_t p, int k) const {
    double v = rule_(p, k);
    double bound = std::pow(H_, k);
    if (!std::isfinite(v) || std::abs(v) > bound * (1.0 + 1e-12))
        throw InvariantError(name_ + ": |f(" + std::to_string(p) + "^" + std::to_string(k) + ")| = " +
                             std::to_string(std::abs(v)) + " exceeds H^k = " + std::to_string(bound));
    if (nonnegative_ && v < 0.0)
        throw InvariantError(name_ + " declared nonnegative but f(" + std::to_string(p) + "^" +
                             std::to_string(k) + ") < 0");
    return v;
}

double MultiplicativeFunction::operator()(const Factorization& f) const {
    double v = 1.0;
    for (auto [p, k] : f) v *= at_prime_power(p, k);
    return v;
}

double MultiplicativeFunction::operator()(uint64_t n) const { return (*this)(factorize(n)); }

double TableView::at(uint64_t n) const {
    if (n == 0 || n > limit) throw DomainError("table lookup at " + std::to_string(n) + " outside [1, " +
                                               std::to_string(limit) + "]");
    return values[n];
}

SieveTable::SieveTable(std::string name, std::vector<double> values) : name_(std::move(name)), values_(std::move(values)) {
    if (values_.empty()) values_.push_back(0.0);
}

SieveTable::SieveTable(const MultiplicativeFunction& f, uint64_t T) : name_(f.name()), values_(T + 1, 0.0) {
    f.prepare(T);
    spf_ = std::make_shared<SpfTable>(T);
    if (T >= 1) values_[1] = 1.0;
    std::vector<uint32_t> ppart(T + 1, 1);
    for (uint64_t n = 2; n <= T; ++n) {
        uint64_t p = spf_->spf(n), m = n / p;
        ppart[n] = (m % p == 0) ? uint32_t(ppart[m] * p) : uint32_t(p);
        uint64_t rest = n / ppart[n];
        if (rest == 1) {
            int k = 0;
            for (uint64_t t = n; t > 1; t /= p) ++k;
            values_[n] = f.at_prime_power(p, k);
        } else {
            values_[n] = values_[ppart[n]] * values_[rest];
        }
    }
}

const SpfTable& SieveTable::spf() const {
    if (!spf_) spf_ = std::make_shared<SpfTable>(T());
    return *spf_;
}

double mean_value(const TableView& t, uint64_t x) {
    if (x == 0 || x > t.limit) throw DomainError("mean_value: x outside [1, T]");
    CompensatedSum s;
    for (uint64_t n = 1; n <= x; ++n) s.add(t.values[n]);
    return s.value() / double(x);
}

double mean_value_progression(const TableView& t, uint64_t x, uint64_t q, int64_t a) {
    if (q == 0) throw DomainError("modulus must be positive");
    if (x == 0 || x > t.limit) throw DomainError("mean_value_progression: x outside [1, T]");
    int64_t r = a % int64_t(q);
    if (r < 0) r += int64_t(q);
    CompensatedSum s;
    for (uint64_t n = r == 0 ? q : uint64_t(r); n <= x; n += q) s.add(t.values[n]);
    return double(q) * s.value() / double(x);
}

double estimate_alpha(const SieveTable& t, uint64_t x) {
    if (x < 2 || x > t.T()) throw DomainError("estimate_alpha: x outside [2, T]");
    const auto& spf = t.spf();
    CompensatedSum s;
    for (uint64_t p = 2; p <= x; ++p)
        if (spf.spf(p) == p) s.add(std::abs(t[p]) * std::log(double(p)));
    return s.value() / double(x);
}

double shiu_upper_bound(const SieveTable& t, uint64_t x, uint64_t q) {
    if (q == 0 || q * q > x) throw DomainError("shiu_upper_bound needs 1 <= q <= sqrt(x)");
    if (x > t.T()) throw DomainError("shiu_upper_bound: x beyond table");
    const auto& spf = t.spf();
    CompensatedSum s;
    for (uint64_t p = 2; p <= x; ++p)
        if (spf.spf(p) == p && q % p != 0) s.add(std::abs(t[p]) / double(p));
    return double(q) / double(euler_phi(q)) / std::log(double(x)) * std::exp(s.value());
}

double elliott_partial_sum(const MultiplicativeFunction& f, uint64_t X, double t) {
    CompensatedSum s;
    for (uint64_t p : primes_up_to(X)) {
        double v = f.at_prime_power(p, 1);
        s.add((std::abs(v) - v * std::cos(t * std::log(double(p)))) / double(p));
    }
    return s.value();
}

namespace {

// Normalised Hecke eigenvalues of the discriminant form, extended on demand.
struct DeltaEigenvalues {
    std::mutex mu;
    std::vector<i128> tau;

    void ensure(uint64_t n) {
        std::lock_guard lk(mu);
        if (n < tau.size()) return;
        uint64_t target = std::max<uint64_t>({n, 2 * (tau.empty() ? 0 : tau.size() - 1), 1000});
        tau = tau_coefficients(target);
    }
    double lambda(uint64_t p, int k) {
        ensure(p);
        std::lock_guard lk(mu);
        const uint64_t lim = tau.size() - 1;
        uint64_t pk = 1;
        int j = 0;
        while (j < k && pk <= lim / p) {
            pk *= p;
            ++j;
        }
        if (j == k) return double(tau[pk]) / std::pow(double(pk), 5.5);
        // lambda(p^{j+1}) = lambda(p) lambda(p^j) - lambda(p^{j-1})
        const double lp = double(tau[p]) / std::pow(double(p), 5.5);
        double prev = 1.0, cur = lp;
        for (int i = 1; i < k; ++i) {
            double next = lp * cur - prev;
            prev = cur;
            cur = next;
        }
        return cur;
    }
};

double parse_param(const std::string& spec, const std::string& s) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric parameter in function spec '" + spec + "'");
    }
}

}  // namespace

MultiplicativeFunction make_function(const std::string& spec) {
    std::string name = spec, arg;
    if (auto c = spec.find(':'); c != std::string::npos) {
        name = spec.substr(0, c);
        arg = spec.substr(c + 1);
    }
    auto no_arg = [&] {
        if (!arg.empty()) throw ConfigError("function '" + name + "' takes no parameter");
    };
    if (name == "all_one") {
        no_arg();
        return {spec, [](uint64_t, int) { return 1.0; }, 1.0, true, 1.0};
    }
    if (name == "delta_omega") {
        if (arg.empty()) throw ConfigError("delta_omega needs a parameter, e.g. delta_omega:0.5");
        double d = parse_param(spec, arg);
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("delta_omega parameter must lie in (0,1)");
        return {spec, [d](uint64_t, int) { return d; }, 1.0, true, d};
    }
    if (name == "two_squares") {
        no_arg();
        return {spec,
                [](uint64_t p, int k) { return (p == 2 || p % 4 == 1 || k % 2 == 0) ? 1.0 : 0.0; },
                1.0, true, 0.5};
    }
    if (name == "split_primes_gaussian") {
        no_arg();
        return {spec, [](uint64_t p, int) { return p % 4 == 1 ? 1.0 : 0.0; }, 1.0, true, 0.5};
    }
    if (name == "abs_lambda_delta") {
        no_arg();
        auto st = std::make_shared<DeltaEigenvalues>();
        return {spec, [st](uint64_t p, int k) { return std::abs(st->lambda(p, k)); }, 2.0, true,
                8.0 / (3.0 * M_PI), [st](uint64_t T) { st->ensure(T); }};
    }
    if (name == "divisor_d") {
        no_arg();
        return {spec, [](uint64_t, int k) { return double(k + 1); }, 2.0, true, 1.0};
    }
    if (name == "liouville") {
        no_arg();
        return {spec, [](uint64_t, int k) { return k % 2 ? -1.0 : 1.0; }, 1.0, false, std::nullopt};
    }
    throw ConfigError("unknown multiplicative function '" + name + "'");
}

std::vector<std::string> registered_functions() {
    return {"all_one", "delta_omega:<d>", "two_squares", "split_primes_gaussian",
            "abs_lambda_delta", "divisor_d", "liouville"};
}

namespace {

constexpr char kMagic[8] = {'M', 'C', 'S', 'I', 'E', 'V', 'E', '\0'};
constexpr uint32_t kVersion = 1;

template <class U>
void put_le(std::ostream& os, U v) {
    unsigned char b[sizeof(U)];
    for (size_t i = 0; i < sizeof(U); ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
    unsigned char b[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw Error("truncated sieve file");
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= U(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_sieve(const std::string& path, const SieveTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path);
    os.write(kMagic, sizeof kMagic);
    put_le<uint32_t>(os, kVersion);
    put_le<uint64_t>(os, t.T());
    put_le<uint32_t>(os, uint32_t(t.name().size()));
    os.write(t.name().data(), std::streamsize(t.name().size()));
    for (uint64_t n = 1; n <= t.T(); ++n) put_le<uint64_t>(os, std::bit_cast<uint64_t>(t[n]));
    if (!os) throw Error("write failed for " + path);
}

SieveTable read_sieve(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error(path + ": not a sieve file");
    if (uint32_t v = get_le<uint32_t>(is); v != kVersion)
        throw Error(path + ": unsupported sieve version " + std::to_string(v));
    uint64_t T = get_le<uint64_t>(is);
    uint32_t len = get_le<uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw Error("truncated sieve file");
    std::vector<double> vals(T + 1, 0.0);
    for (uint64_t n = 1; n <= T; ++n) vals[n] = std::bit_cast<double>(get_le<uint64_t>(is));
    return SieveTable(std::move(name), std::move(vals));
}

}  // namespace multcorr
