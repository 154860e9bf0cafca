#include "multcorr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "multcorr/charsum.hpp"
#include "multcorr/errors.hpp"
#include "multcorr/localdensity.hpp"
#include "multcorr/majorant.hpp"
#include "multcorr/multfunc.hpp"
#include "multcorr/wtrick.hpp"

namespace multcorr {

double RunResult::metric(const std::string& key) const {
    auto it = metrics.find(key);
    if (it == metrics.end()) throw ConfigError("experiment " + name + " has no metric '" + key + "'");
    return it->second;
}

bool RunResult::passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.pass; });
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Run {
    const ExperimentConfig& cfg;
    unsigned threads;
    uint64_t seed;
    RunResult& res;
    std::string out_dir;  // empty: no side files

    void time(const std::string& label, Clock::time_point t0) { res.timings_ms.emplace_back(label, ms_since(t0)); }
    CsvTable& table(std::string name, std::vector<std::string> cols) {
        res.tables.emplace_back(std::move(name), std::move(cols));
        return res.tables.back();
    }
    void metric(const std::string& k, double v) { res.metrics[k] = v; }
    void note(std::string s) { res.notes.push_back(std::move(s)); }
};

const LinearSystem& need_system(const ExperimentConfig& c) {
    if (!c.system) throw ConfigError(c.path + ": kind " + c.kind + " needs linsys.forms");
    return *c.system;
}
const ConvexBody& need_body(const ExperimentConfig& c) {
    if (!c.body) throw ConfigError(c.path + ": kind " + c.kind + " needs linsys.body or linsys.interval");
    return *c.body;
}
const std::vector<uint64_t>& need_T(const ExperimentConfig& c) {
    if (c.T_grid.empty()) throw ConfigError(c.path + ": kind " + c.kind + " needs linsys.T");
    return c.T_grid;
}
const std::vector<std::string>& need_functions(const ExperimentConfig& c) {
    if (c.functions.empty()) throw ConfigError(c.path + ": kind " + c.kind + " needs multfunc.functions");
    return c.functions;
}

std::vector<uint64_t> ascending(const ExperimentConfig& c, const std::string& section, const std::string& key,
                                std::vector<int64_t> def) {
    auto v = c.integers(section, key, std::move(def));
    std::vector<uint64_t> out;
    for (auto x : v) {
        if (x < 1) throw ConfigError(c.path + ": " + section + "." + key + " entries must be positive");
        if (!out.empty() && uint64_t(x) <= out.back())
            throw ConfigError(c.path + ": " + section + "." + key + " must be strictly ascending");
        out.push_back(uint64_t(x));
    }
    if (out.empty()) throw ConfigError(c.path + ": " + section + "." + key + " is empty");
    return out;
}

std::vector<MultiplicativeFunction> functions_of(const std::vector<std::string>& specs) {
    std::vector<MultiplicativeFunction> fs;
    for (const auto& s : specs) fs.push_back(make_function(s));
    return fs;
}

// Sieved tables shared across forms and grid points; rebuilt when a larger limit is needed.
class TableCache {
public:
    const SieveTable& get(const std::string& spec, uint64_t limit) {
        auto& slot = tables_[spec];
        if (!slot || slot->T() < limit) {
            auto f = make_function(spec);
            f.prepare(limit);
            slot = std::make_unique<SieveTable>(f, limit);
        }
        return *slot;
    }

private:
    std::map<std::string, std::unique_ptr<SieveTable>> tables_;
};

uint64_t uniform(std::mt19937_64& rng, uint64_t lo, uint64_t hi) { return lo + rng() % (hi - lo + 1); }
int64_t uniform_signed(std::mt19937_64& rng, int64_t lo, int64_t hi) {
    return lo + int64_t(rng() % uint64_t(hi - lo + 1));
}

boost::multiprecision::cpp_int ceil_of(const BigRational& x) {
    using boost::multiprecision::cpp_int;
    cpp_int n = boost::multiprecision::numerator(x), d = boost::multiprecision::denominator(x);
    cpp_int q = n / d;
    if (q * d != n && n > 0) q += 1;
    return q;
}

// Upper bounds for W_i*phi_i + A_i over P (vertex maxima), at least 1.
std::vector<uint64_t> form_limits(const LinearSystem& sys, const Polytope& P, const std::vector<int64_t>& W,
                                  const std::vector<int64_t>& A) {
    const auto verts = P.vertices();
    std::vector<uint64_t> out(sys.r(), 1);
    for (size_t i = 0; i < sys.r(); ++i) {
        for (const auto& v : verts) {
            BigRational val = sys[i].constant;
            for (size_t k = 0; k < v.size(); ++k) val += BigRational(sys[i].coeffs[k]) * v[k];
            val = val * W[i] + A[i];
            auto c = ceil_of(val);
            if (c > 4'000'000'000LL) throw BudgetError("form " + std::to_string(i + 1) + " reaches " + c.str());
            if (c > 0) out[i] = std::max(out[i], uint64_t(c.convert_to<int64_t>()));
        }
    }
    check_form_ranges(P, sys, W, A, out);
    return out;
}

std::vector<TableView> views_for(TableCache& cache, const std::vector<std::string>& specs,
                                 const std::vector<uint64_t>& limits) {
    std::map<std::string, uint64_t> need;
    for (size_t i = 0; i < specs.size(); ++i) need[specs[i]] = std::max(need[specs[i]], limits[i]);
    std::vector<TableView> out;
    for (size_t i = 0; i < specs.size(); ++i) out.push_back(cache.get(specs[i], need[specs[i]]).view());
    return out;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

std::string join(const std::vector<uint64_t>& v, char sep = ' ') {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return s;
}

std::string system_str(const LinearSystem& sys) {
    std::string s;
    for (size_t i = 0; i < sys.r(); ++i) s += (i ? "; " : "") + sys[i].str();
    return s;
}

// ---------------------------------------------------------------- kinds

void run_sieve(Run& R) {
    const auto& T = need_T(R.cfg);
    auto& tab = R.table("sieve", {"function", "T", "mean_value", "alpha_estimate"});
    const bool write = R.cfg.integer("params", "write_sieve", 0) != 0;
    for (const auto& spec : need_functions(R.cfg)) {
        auto t0 = Clock::now();
        auto f = make_function(spec);
        f.prepare(T.back());
        SieveTable st(f, T.back());
        R.time("sieve " + spec, t0);
        for (auto x : T) tab.row(spec, x, mean_value(st.view(), x), estimate_alpha(st, x));
        if (write && !R.out_dir.empty()) {
            std::string file = spec;
            std::replace(file.begin(), file.end(), ':', '_');
            const auto dir = std::filesystem::path(R.out_dir) / R.cfg.name;
            std::filesystem::create_directories(dir);
            write_sieve((dir / (file + ".sieve")).string(), st);
            R.note("wrote " + file + ".sieve");
        }
        R.metric("mean_value_last:" + spec, mean_value(st.view(), T.back()));
    }
}

void run_correlate(Run& R) {
    const auto& sys = need_system(R.cfg);
    const auto& body = need_body(R.cfg);
    const auto& specs = need_functions(R.cfg);
    TableCache cache;
    std::vector<std::string> cols = {"T", "raw_sum", "lattice_count", "mean"};
    for (size_t i = 0; i < sys.r(); ++i) cols.push_back("vanishing_" + std::to_string(i + 1));
    auto& tab = R.table("correlate", cols);
    double max_dev = 0.0;
    CorrelationResult last;
    const std::vector<int64_t> W(sys.r(), 1), A(sys.r(), 0);
    for (auto T : need_T(R.cfg)) {
        auto t0 = Clock::now();
        auto views = views_for(cache, specs, form_limits(sys, body.dilate(int64_t(T)), W, A));
        last = correlation_sum(views, sys, body, T, R.threads);
        R.time("correlate T=" + std::to_string(T), t0);
        std::vector<std::string> row = {fmt(T), fmt(last.raw_sum), fmt(last.lattice_count),
                                        fmt(last.lattice_count ? last.raw_sum / double(last.lattice_count) : 0.0)};
        for (auto v : last.vanishing) row.push_back(fmt(v));
        tab.add(row);
        max_dev = std::max(max_dev, std::abs(last.raw_sum - double(last.lattice_count)));
    }
    R.metric("raw_sum_last", last.raw_sum);
    R.metric("lattice_count_last", double(last.lattice_count));
    R.metric("max_abs_raw_minus_count", max_dev);
}

void run_predict_corollary(Run& R) {
    const auto& sys = need_system(R.cfg);
    const auto& body = need_body(R.cfg);
    const auto& specs = need_functions(R.cfg);
    const auto fs = functions_of(specs);
    TableCache cache;
    auto& tab = R.table("predict_corollary", {"T", "P_max", "A_max", "empirical", "lattice_count", "beta_inf",
                                              "euler_product", "predicted", "ratio", "tail_sum",
                                              "max_scaled_deviation", "renormalized_ratio"});
    const std::vector<int64_t> W(sys.r(), 1), A(sys.r(), 0);
    std::vector<double> drift;
    double ratio = 0.0, renorm = 0.0;
    uint64_t last_count = 0, T_last = 0;
    double last_emp = 0.0;
    CorollaryReport last;
    for (auto T : need_T(R.cfg)) {
        auto t0 = Clock::now();
        auto views = views_for(cache, specs, form_limits(sys, body.dilate(int64_t(T)), W, A));
        auto emp = correlation_sum(views, sys, body, T, R.threads);
        const uint64_t P_max = R.cfg.P_max.value_or(T);
        last = predict_main_term_corollary(sys, fs, emp.lattice_count, T, R.cfg.A_max, P_max, R.threads);
        R.time("predict-corollary T=" + std::to_string(T), t0);
        ratio = emp.raw_sum / last.prediction;
        drift.push_back(std::abs(std::log(ratio)));
        // diagnostic: local factors divided by (1 - 1/p)^r
        double log_renorm = 0.0;
        for (const auto& b : last.primes) log_renorm -= double(sys.r()) * std::log1p(-1.0 / double(b.p));
        renorm = ratio / std::exp(log_renorm);
        tab.row(T, P_max, R.cfg.A_max, emp.raw_sum, emp.lattice_count, last.beta_inf, last.product, last.prediction,
                ratio, last.tail_sum, last.max_scaled_deviation, renorm);
        last_count = emp.lattice_count;
        last_emp = emp.raw_sum;
        T_last = T;
    }
    auto& pt = R.table("beta_primes", {"p", "beta_p", "tail_bound", "beta_minus_one_times_p"});
    for (const auto& b : last.primes)
        if (b.p <= 1000) pt.row(b.p, b.value, b.tail_bound, (b.value - 1.0) * double(b.p));
    // sensitivity of the truncated Euler product to the prime cutoff
    auto sens = R.cfg.integers("localdensity", "P_max_sensitivity");
    if (!sens.empty()) {
        auto& st = R.table("pmax_sensitivity", {"T", "P_max", "euler_product", "predicted", "ratio"});
        for (auto pm : sens) {
            if (pm < 2) throw ConfigError(R.cfg.path + ": P_max_sensitivity entries must be >= 2");
            auto rep = predict_main_term_corollary(sys, fs, last_count, T_last, R.cfg.A_max, uint64_t(pm), R.threads);
            st.row(T_last, uint64_t(pm), rep.product, rep.prediction, last_emp / rep.prediction);
        }
    }
    R.metric("ratio_last", ratio);
    R.metric("drift_shrinking", strictly_decreasing(drift));
    R.metric("abs_log_ratio_last", drift.back());
    R.metric("max_scaled_deviation", last.max_scaled_deviation);
    R.metric("renormalized_ratio_last", renorm);
}

void run_predict_theorem(Run& R) {
    const auto& sys = need_system(R.cfg);
    const auto& body = need_body(R.cfg);
    const auto& specs = need_functions(R.cfg);
    const auto fs = functions_of(specs);
    TableCache cache;
    auto& tab = R.table("predict_theorem", {"T", "w_of_x", "W", "W_tilde", "empirical", "lattice_count", "predicted",
                                            "ratio", "smooth_tuples", "residue_classes"});
    const std::vector<int64_t> W(sys.r(), 1), A(sys.r(), 0);
    double ratio = 0.0;
    for (auto T : need_T(R.cfg)) {
        auto t0 = Clock::now();
        auto ctx = make_wcontext(T, R.cfg.w);
        for (const auto& a : ctx.audit) R.note("T=" + std::to_string(T) + ": " + a);
        auto limits = form_limits(sys, body.dilate(int64_t(T)), W, A);
        for (auto& l : limits) l = std::max(l, T);
        auto views = views_for(cache, specs, limits);
        auto emp = correlation_sum(views, sys, body, T, R.threads);
        std::vector<std::vector<double>> means;
        for (const auto& v : views) means.push_back(residue_mean_table(v, T, ctx.W_tilde, ctx).dense);
        auto rep = predict_main_term_theorem(sys, fs, ctx, means, emp.lattice_count, ctx.B2);
        R.time("predict-theorem T=" + std::to_string(T), t0);
        ratio = emp.raw_sum / rep.prediction;
        tab.row(T, ctx.w_of_x, ctx.W, ctx.W_tilde, emp.raw_sum, emp.lattice_count, rep.prediction, ratio, rep.tuples,
                rep.residue_classes);
    }
    R.metric("ratio_last", ratio);
}

void run_partition(Run& R) {
    const auto& sys = need_system(R.cfg);
    const auto& body = need_body(R.cfg);
    const auto& specs = need_functions(R.cfg);
    TableCache cache;
    auto& tab = R.table("partition", {"T", "W", "groups", "total", "correlation", "lattice_count", "relative_error",
                                      "truncated_mass", "identity_holds"});
    const std::vector<int64_t> W(sys.r(), 1), A(sys.r(), 0);
    double worst = 0.0;
    bool all = true;
    PartitionReport last;
    for (auto T : need_T(R.cfg)) {
        auto t0 = Clock::now();
        auto ctx = make_wcontext(T, R.cfg.w);
        auto views = views_for(cache, specs, form_limits(sys, body.dilate(int64_t(T)), W, A));
        last = exact_smooth_partition(views, sys, body, T, ctx, R.threads);
        R.time("partition T=" + std::to_string(T), t0);
        tab.row(T, ctx.W, uint64_t(last.groups.size()), last.total, last.correlation, last.lattice_count,
                last.relative_error, last.truncated_mass, last.identity_holds);
        worst = std::max(worst, last.relative_error);
        all = all && last.identity_holds;
    }
    std::vector<std::string> cols;
    for (size_t i = 0; i < sys.r(); ++i) cols.push_back("w_" + std::to_string(i + 1));
    for (const char* c : {"count", "sum", "truncated"}) cols.push_back(c);
    auto& gt = R.table("partition_groups", cols);
    for (const auto& g : last.groups) {
        std::vector<std::string> row;
        for (auto w : g.w) row.push_back(fmt(w));
        row.push_back(fmt(g.count));
        row.push_back(fmt(g.sum));
        row.push_back(fmt(g.truncated));
        gt.add(row);
    }
    R.metric("max_relative_error", worst);
    R.metric("identity_holds", all);
}

void run_majorant_scan(Run& R) {
    const auto& T = need_T(R.cfg);
    auto& tab = R.table("majorant_scan", {"function", "T", "gamma", "C1", "max_ratio", "argmax", "S_count",
                                          "infinite_count", "infinite_with_square", "max_ratio_without_square"});
    double last_max = 0.0, growth = 1.0;
    bool finite = true;
    for (const auto& spec : need_functions(R.cfg)) {
        auto f = make_function(spec);
        std::vector<double> per_T;
        for (auto x : T) {
            auto t0 = Clock::now();
            f.prepare(x);
            SieveTable h(f, x);
            Majorant M(f, MajorantParams::make(x, R.cfg.gamma, R.cfg.C1));
            const auto nu = M.table(R.threads);
            // primes above this size have their squares outside S at desk scale
            const double lx = std::log(double(x));
            const double big = std::exp(R.cfg.gamma * lx / std::pow(std::log(lx), 3.0));
            double mx = 0.0, mx_sq = 0.0;
            uint64_t arg = 0, s_count = 0, inf_count = 0, inf_sq = 0;
            for (uint64_t n = 1; n <= x; ++n) {
                const auto fac = M.factorize(n);
                if (M.in_S(fac)) {
                    ++s_count;
                    continue;
                }
                const double a = std::abs(h[n]);
                const double q = a == 0.0 ? 0.0 : (nu[n] == 0.0 ? INFINITY : a / nu[n]);
                const bool square = std::any_of(fac.begin(), fac.end(),
                                                [&](const PrimePower& pp) { return pp.k >= 2 && double(pp.p) > big; });
                if (std::isinf(q)) {
                    ++inf_count;
                    inf_sq += square;
                }
                if (q > mx) mx = q, arg = n;
                if (!square) mx_sq = std::max(mx_sq, q);
            }
            R.time("majorant-scan " + spec + " T=" + std::to_string(x), t0);
            tab.row(spec, x, R.cfg.gamma, R.cfg.C1, mx, arg, s_count, inf_count, inf_sq, mx_sq);
            per_T.push_back(mx);
            finite = finite && std::isfinite(mx);
        }
        for (size_t i = 1; i < per_T.size(); ++i) {
            double g = std::max(per_T[i] / per_T[i - 1], per_T[i - 1] / per_T[i]);
            growth = std::isnan(g) ? INFINITY : std::max(growth, g);
        }
        last_max = std::max(last_max, per_T.back());
    }
    R.metric("max_ratio_last", last_max);
    R.metric("max_grid_variation", growth);
    R.metric("all_finite", finite);
}

// sum_{D < d <= sqrt(T)} 1/d^2 with D = (log T)^C: bounds the density of n <= T with d^2 | n, d > D
double square_tail_bound(uint64_t T, double C) {
    const double D = std::pow(std::log(double(T)), C);
    CompensatedSum s;
    for (uint64_t d = uint64_t(std::floor(D)) + 1; d * d <= T; ++d) s.add(1.0 / (double(d) * double(d)));
    return s.value();
}

void run_exceptional_density(Run& R) {
    const auto& T = need_T(R.cfg);
    const double C = R.cfg.w.C.value_or(2.0);
    const std::string spec = R.cfg.functions.empty() ? "all_one" : R.cfg.functions[0];
    auto f = make_function(spec);
    std::vector<double> S_dens, Sp_dens, tails;
    for (auto x : T) {
        auto t0 = Clock::now();
        Majorant M(f, MajorantParams::make(x, R.cfg.gamma, R.cfg.C1));
        uint64_t s = 0, sp = 0;
        for (uint64_t n = 1; n <= x; ++n) {
            auto fac = M.factorize(n);
            s += M.in_S(fac);
            sp += exceptional_prime_square(fac, x, C);
        }
        R.time("exceptional-density T=" + std::to_string(x), t0);
        S_dens.push_back(double(s) / double(x));
        Sp_dens.push_back(double(sp) / double(x));
        tails.push_back(square_tail_bound(x, C));
    }
    // constant fitted at the largest T
    const double Tl = double(T.back());
    const double kappa = S_dens.back() * std::pow(std::log(Tl), R.cfg.C1 / 2);
    auto& tab = R.table("exceptional_density", {"T", "C1", "S_density", "S_envelope", "C", "S_prime_density",
                                                "square_tail_bound"});
    bool below = true, below_tail = true;
    for (size_t i = 0; i < T.size(); ++i) {
        const double env = kappa * std::pow(std::log(double(T[i])), -R.cfg.C1 / 2);
        tab.row(T[i], R.cfg.C1, S_dens[i], env, C, Sp_dens[i], tails[i]);
        below = below && S_dens[i] <= env * (1 + 1e-12);
        below_tail = below_tail && Sp_dens[i] <= tails[i] * (1 + 1e-12);
    }
    R.metric("S_density_last", S_dens.back());
    R.metric("S_fitted_constant", kappa);
    R.metric("S_below_envelope", below);
    R.metric("S_prime_below_tail", below_tail);
}

void run_average_order(Run& R) {
    const auto& T = need_T(R.cfg);
    const int64_t A = R.cfg.w_A.empty() ? 1 : R.cfg.w_A[0];
    auto& tab = R.table("average_order", {"function", "T", "W_tilde", "A", "S_h", "S_nu", "envelope", "lower_ratio",
                                          "upper_ratio"});
    double lower_spread = 1.0, upper_spread = 1.0;
    for (const auto& spec : need_functions(R.cfg)) {
        auto f = make_function(spec);
        std::vector<double> lo, hi;
        for (auto x : T) {
            auto t0 = Clock::now();
            f.prepare(x);
            SieveTable h(f, x);
            Majorant M(f, MajorantParams::make(x, R.cfg.gamma, R.cfg.C1));
            const auto nu = M.table(R.threads);
            auto ctx = make_wcontext(x, R.cfg.w);
            auto rep = majorant_average_order(h, nu, ctx, x, A);
            R.time("average-order " + spec + " T=" + std::to_string(x), t0);
            tab.row(spec, x, ctx.W_tilde, A, rep.S_h, rep.S_nu, rep.envelope, rep.lower_ratio, rep.upper_ratio);
            lo.push_back(rep.lower_ratio);
            hi.push_back(rep.upper_ratio);
        }
        auto spread = [](const std::vector<double>& v) {
            auto [a, b] = std::minmax_element(v.begin(), v.end());
            return *a > 0 ? *b / *a : INFINITY;
        };
        lower_spread = std::max(lower_spread, spread(lo));
        upper_spread = std::max(upper_spread, spread(hi));
    }
    R.metric("lower_ratio_spread", lower_spread);
    R.metric("upper_ratio_spread", upper_spread);
}

void run_linear_forms_ratio(Run& R) {
    const auto& sys = need_system(R.cfg);
    const auto& body = need_body(R.cfg);
    const auto& specs = need_functions(R.cfg);
    std::vector<int64_t> A = R.cfg.w_A.empty() ? std::vector<int64_t>(sys.r(), 1) : R.cfg.w_A;
    std::vector<std::string> cols = {"T", "W_tilde", "lattice_count", "joint"};
    for (size_t i = 0; i < sys.r(); ++i) cols.push_back("marginal_" + std::to_string(i + 1));
    cols.push_back("ratio");
    auto& tab = R.table("linear_forms_ratio", cols);
    std::vector<double> dist;
    double ratio = 0.0;
    auto t_all = Clock::now();
    for (auto T : need_T(R.cfg)) {
        auto t0 = Clock::now();
        auto ctx = make_wcontext(T, R.cfg.w);
        std::vector<int64_t> W(sys.r(), int64_t(ctx.W_tilde));
        auto limits = form_limits(sys, body.dilate(int64_t(T) * W[0], W[0]), W, A);
        for (size_t i = 0; i < sys.r(); ++i) limits[i] = std::max<uint64_t>(limits[i], uint64_t(W[i]) * T + A[i]);
        std::map<std::string, uint64_t> need;
        for (size_t i = 0; i < sys.r(); ++i) need[specs[i]] = std::max(need[specs[i]], limits[i]);
        std::map<std::string, std::vector<double>> nu;
        for (const auto& [spec, L] : need) {
            auto f = make_function(spec);
            f.prepare(L);
            nu[spec] = Majorant(f, MajorantParams::make(L, R.cfg.gamma, R.cfg.C1)).table(R.threads);
        }
        std::vector<TableView> views;
        for (size_t i = 0; i < sys.r(); ++i) views.push_back({nu[specs[i]], nu[specs[i]].size() - 1});
        auto rep = linear_forms_ratio(views, sys, body, T, WTrickData{W, A, ctx.W}, R.threads);
        R.time("linear-forms-ratio T=" + std::to_string(T), t0);
        std::vector<std::string> row = {fmt(T), fmt(ctx.W_tilde), fmt(rep.lattice_count), fmt(rep.joint)};
        for (auto m : rep.marginals) row.push_back(fmt(m));
        row.push_back(fmt(rep.ratio));
        tab.add(row);
        ratio = rep.ratio;
        dist.push_back(std::abs(rep.ratio - 1.0));
    }
    bool closer = dist.size() > 1;
    for (size_t i = 1; i < dist.size(); ++i) closer = closer && dist[i] < dist[0];
    R.metric("ratio_last", ratio);
    R.metric("closer_than_first", closer);
    R.metric("runtime_s", ms_since(t_all) / 1000.0);
}

void run_char_identity(Run& R) {
    const auto pool = R.cfg.functions.empty()
                          ? std::vector<std::string>{"two_squares", "delta_omega:0.5", "divisor_d", "liouville",
                                                     "abs_lambda_delta"}
                          : R.cfg.functions;
    const uint64_t y_max = uint64_t(R.cfg.integer("charsum", "y_max", 10000));
    const uint64_t q0_max = uint64_t(R.cfg.integer("charsum", "q0_max", 7));
    const auto Wts = R.cfg.integers("charsum", "W_tilde", {2, 4, 6});
    const uint64_t trials = uint64_t(R.cfg.integer("params", "trials", 20));
    if (y_max < 1 || q0_max < 1 || Wts.empty()) throw ConfigError(R.cfg.path + ": bad charsum parameters");
    TableCache cache;
    std::mt19937_64 rng(R.seed);
    auto& tab = R.table("char_identity", {"trial", "function", "y", "q0", "W_tilde", "A", "lhs", "restricted_term",
                                          "correction", "residual", "trivial_bound", "relative_residual",
                                          "uncorrected_residual", "compatible"});
    double worst = 0.0, worst_uncorrected = 0.0;
    uint64_t compatible = 0;
    auto t0 = Clock::now();
    for (uint64_t k = 0; k < trials; ++k) {
        const auto& spec = pool[uniform(rng, 0, pool.size() - 1)];
        const uint64_t y = uniform(rng, 1, y_max);
        const uint64_t q0 = uniform(rng, 1, q0_max);
        const uint64_t Wt = uint64_t(Wts[uniform(rng, 0, Wts.size() - 1)]);
        const uint64_t q = q0 * Wt;
        uint64_t A;
        do A = uniform(rng, 1, q);
        while (std::gcd(A, q) != 1);
        const auto& t = cache.get(spec, y_max);
        auto rep = restricted_identity_check(t.view(), y, q0, Wt, int64_t(A));
        // trivial bound on the left side
        CompensatedSum a, b;
        for (uint64_t n = A % Wt == 0 ? Wt : A % Wt; n <= y; n += Wt) {
            a.add(std::abs(t[n]));
            if (n % q == A % q) b.add(std::abs(t[n]));
        }
        const double scale =
            std::max(double(Wt) / double(y) * a.value() + double(q) / double(y) * b.value(), 1e-300);
        const double rel = rep.residual / scale;
        worst = std::max(worst, rel);
        worst_uncorrected = std::max(worst_uncorrected, rep.uncorrected_residual / scale);
        compatible += rep.compatible;
        tab.row(k, spec, y, q0, Wt, A, rep.lhs, rep.restricted_term, rep.correction, rep.residual, scale, rel,
                rep.uncorrected_residual, rep.compatible);
    }
    R.time("char-identity", t0);
    R.metric("max_relative_residual", worst);
    R.metric("max_uncorrected_relative_residual", worst_uncorrected);
    R.metric("compatible_trials", double(compatible));
}

void run_stability_scan(Run& R) {
    const auto xs = ascending(R.cfg, "params", "x", {10000, 100000, 1000000});
    const uint64_t q = uint64_t(R.cfg.integer("params", "q", 1));
    const int64_t A = R.cfg.integer("params", "A", 1);
    const double C = R.cfg.w.C.value_or(2.0);
    const size_t grid = size_t(R.cfg.integer("params", "grid", 64));
    auto& tab = R.table("stability_scan", {"function", "x", "q", "A", "C", "envelope", "max_normalized"});
    auto& rows = R.table("stability_rows", {"function", "x", "x_prime", "raw_delta", "normalized_delta"});
    TableCache cache;
    bool all_dec = true;
    double last = 0.0;
    const auto& specs = need_functions(R.cfg);
    for (size_t fi = 0; fi < specs.size(); ++fi) {
        const auto& t = cache.get(specs[fi], xs.back());
        std::vector<double> v;
        for (auto x : xs) {
            auto t0 = Clock::now();
            auto rep = stability_scan(t, x, C, q, A, grid);
            R.time("stability-scan " + specs[fi] + " x=" + std::to_string(x), t0);
            tab.row(specs[fi], x, q, A, C, rep.envelope, rep.max_normalized);
            for (const auto& r : rep.rows) rows.row(specs[fi], x, r.x_prime, r.raw_delta, r.normalized_delta);
            v.push_back(rep.max_normalized);
        }
        const bool dec = strictly_decreasing(v);
        R.metric("decreasing_" + std::to_string(fi), dec);
        all_dec = all_dec && dec;
        last = std::max(last, v.back());
    }
    R.metric("all_decreasing", all_dec);
    R.metric("max_normalized_last", last);
}

void run_major_arc_probe(Run& R) {
    const auto xs = ascending(R.cfg, "params", "x", {10000, 100000, 1000000});
    const uint64_t q0 = uint64_t(R.cfg.integer("charsum", "q0", 3));
    const uint64_t Wt = uint64_t(R.cfg.integers("charsum", "W_tilde", {2}).at(0));
    const int64_t A = R.cfg.integer("charsum", "A", 1);
    const double theta = R.cfg.real("charsum", "theta", 1.0);
    const size_t grid = size_t(R.cfg.integer("params", "grid", 32));
    auto& tab = R.table("major_arc_probe", {"function", "x", "q0", "W_tilde", "A", "theta", "interval_length",
                                            "envelope", "normalized_deviation"});
    TableCache cache;
    bool all_dec = true;
    double last = 0.0;
    const auto& specs = need_functions(R.cfg);
    for (size_t fi = 0; fi < specs.size(); ++fi) {
        const auto& t = cache.get(specs[fi], xs.back());
        std::vector<double> v;
        for (auto x : xs) {
            auto t0 = Clock::now();
            auto rep = major_arc_probe(t, x, q0, Wt, A, theta, grid);
            R.time("major-arc-probe " + specs[fi] + " x=" + std::to_string(x), t0);
            tab.row(specs[fi], x, q0, Wt, A, theta, rep.interval_length, rep.envelope, rep.max_normalized);
            v.push_back(rep.max_normalized);
        }
        const bool dec = strictly_decreasing(v);
        R.metric("decreasing_" + std::to_string(fi), dec);
        all_dec = all_dec && dec;
        last = std::max(last, v.back());
    }
    R.metric("all_decreasing", all_dec);
    R.metric("max_normalized_last", last);
}

void run_sato_tate(Run& R) {
    const uint64_t x = uint64_t(R.cfg.integer("params", "x", 10000));
    const double target = 8.0 / (3.0 * M_PI);
    auto t0 = Clock::now();
    const double mean = sato_tate_mean();
    auto f = make_function("abs_lambda_delta");
    f.prepare(x);
    CompensatedSum s;
    const auto ps = primes_up_to(x);
    for (auto p : ps) s.add(f.at_prime_power(p, 1));
    R.time("sato-tate", t0);
    const double emp = ps.empty() ? 0.0 : s.value() / double(ps.size());
    auto& tab = R.table("sato_tate", {"mean", "target", "abs_error", "mu_0", "mu_2", "x", "primes",
                                      "empirical_prime_mean"});
    tab.row(mean, target, std::abs(mean - target), sato_tate_cdf(0.0), sato_tate_cdf(2.0), x, uint64_t(ps.size()),
            emp);
    R.metric("abs_error", std::abs(mean - target));
    R.metric("mu_0", sato_tate_cdf(0.0));
    R.metric("mu_2", sato_tate_cdf(2.0));
    R.metric("empirical_prime_mean", emp);
}

void run_tau(Run& R) {
    const uint64_t n_max = uint64_t(R.cfg.integer("params", "n_max", 10000));
    if (n_max < 6) throw ConfigError(R.cfg.path + ": params.n_max must be >= 6");
    auto t0 = Clock::now();
    const auto tau = tau_coefficients(n_max);
    uint64_t violations = 0;
    for (uint64_t n = 1; n <= n_max; ++n) violations += !deligne_bound_holds(n, tau[n]);
    R.time("tau", t0);
    auto& tab = R.table("tau", {"n", "tau"});
    for (uint64_t n = 1; n <= std::min<uint64_t>(n_max, 30); ++n) tab.add({fmt(n), to_string(tau[n])});
    R.metric("tau_2", double(tau[2]));
    R.metric("tau_6_minus_tau_2_tau_3", double(tau[6] - tau[2] * tau[3]));
    R.metric("deligne_violations", double(violations));
}

void run_alpha_check(Run& R) {
    const uint64_t systems = uint64_t(R.cfg.integer("params", "systems", 25));
    const uint64_t per_system = uint64_t(R.cfg.integer("params", "moduli_per_system", 8));
    const uint64_t lcm_max = uint64_t(R.cfg.integer("params", "lcm_max", 300));
    std::mt19937_64 rng(R.seed);
    auto& tab = R.table("alpha_check", {"system", "forms", "moduli", "lcm", "alpha_local_product", "alpha_scan",
                                        "match"});
    uint64_t mismatches = 0, checks = 0;
    auto t0 = Clock::now();
    for (uint64_t k = 0; k < systems; ++k) {
        std::optional<LinearSystem> sys;
        while (!sys) {
            const size_t s = uniform(rng, 1, 2), r = uniform(rng, 2, 3);
            std::vector<LinearForm> fs(r);
            for (auto& f : fs) {
                for (size_t j = 0; j < s; ++j) f.coeffs.push_back(uniform_signed(rng, -4, 4));
                f.constant = uniform_signed(rng, -6, 6);
            }
            try {
                sys.emplace(std::move(fs), s == 1);
            } catch (const DomainError&) {
            }
        }
        const size_t s = sys->s(), r = sys->r();
        for (uint64_t j = 0; j < per_system; ++j) {
            std::vector<uint64_t> m(r);
            uint64_t L;
            do {
                for (auto& x : m) x = uniform(rng, 1, 36);
                L = std::accumulate(m.begin(), m.end(), uint64_t(1), [](uint64_t a, uint64_t b) { return std::lcm(a, b); });
            } while (L > lcm_max);
            // direct scan over (Z/L)^s
            uint64_t hits = 0, total = 1;
            for (size_t d = 0; d < s; ++d) total *= L;
            std::vector<int64_t> u(s);
            for (uint64_t idx = 0; idx < total; ++idx) {
                uint64_t t = idx;
                for (size_t d = 0; d < s; ++d) u[d] = int64_t(t % L), t /= L;
                bool ok = true;
                for (size_t i = 0; i < r && ok; ++i) {
                    int64_t v = (*sys)[i](u) % int64_t(m[i]);
                    ok = v == 0;
                }
                hits += ok;
            }
            const BigRational scan{boost::multiprecision::cpp_int(hits), boost::multiprecision::cpp_int(total)};
            const BigRational prod = alpha_composite(*sys, m);
            const bool match = scan == prod;
            mismatches += !match;
            ++checks;
            tab.row(k, system_str(*sys), join(m), L, prod.str(), scan.str(), match);
        }
    }
    R.time("alpha-check", t0);
    R.metric("checks", double(checks));
    R.metric("mismatches", double(mismatches));
}

void run_beta_closed_form(Run& R) {
    const auto primes = R.cfg.integers("params", "primes", {2, 3, 5, 7});
    const auto A_list = R.cfg.integers("params", "A_max", {1, 2, 3, 4, 5, 6});
    std::optional<LinearSystem> own;
    if (!R.cfg.system) own.emplace(std::vector<LinearForm>{LinearForm{{1}, 0}});
    const LinearSystem& sys = R.cfg.system ? *R.cfg.system : *own;
    if (sys.r() != 1 || sys.s() != 1 || sys[0].coeffs[0] != 1 || sys[0].constant != 0)
        throw ConfigError(R.cfg.path + ": beta-closed-form compares against phi(n) = n only");
    const auto fs = functions_of(R.cfg.functions.empty() ? std::vector<std::string>{"all_one"} : R.cfg.functions);
    if (fs[0].name() != "all_one") throw ConfigError(R.cfg.path + ": beta-closed-form needs all_one");
    auto& tab = R.table("beta_closed_form", {"p", "A_max", "beta_exact", "closed_form", "limit", "match",
                                             "double_abs_error"});
    uint64_t mismatches = 0;
    double worst = 0.0;
    for (auto p : primes) {
        for (auto A : A_list) {
            auto ex = beta_p_exact(sys, fs, uint64_t(p), int(A));
            const BigRational limit{boost::multiprecision::cpp_int(p), boost::multiprecision::cpp_int(p + 1)};
            // truncation at A_max drops the classes p^{A_max+1} | n
            BigRational tail = 1;
            for (int64_t k = 0; k <= A; ++k) tail /= p;
            const BigRational closed = limit * (1 - tail);
            const bool match = ex.value == closed;
            mismatches += !match;
            const double err = std::abs(beta_p(sys, fs, uint64_t(p), int(A)).value - closed.convert_to<double>());
            worst = std::max(worst, err);
            tab.row(uint64_t(p), A, ex.value.str(), closed.str(), limit.str(), match, err);
        }
    }
    R.metric("mismatches", double(mismatches));
    R.metric("max_double_error", worst);
}

void evaluate_assertions(const ExperimentConfig& cfg, RunResult& res) {
    for (const auto& a : cfg.assertions) {
        auto it = res.metrics.find(a.metric);
        if (it == res.metrics.end()) {
            std::string known;
            for (const auto& [k, v] : res.metrics) known += " " + k;
            throw ConfigError(a.where + ": unknown metric '" + a.metric + "' for kind " + cfg.kind +
                              " (available:" + known + ")");
        }
        const double v = it->second;
        auto push = [&](std::string label, bool ok) { res.assertions.push_back({std::move(label), v, ok}); };
        if (a.min) push(a.metric + " >= " + fmt(*a.min), v >= *a.min);
        if (a.max) push(a.metric + " <= " + fmt(*a.max), v <= *a.max);
        if (a.equals) push(a.metric + " == " + fmt(*a.equals), v == *a.equals);
    }
}

std::string provenance(const ExperimentConfig& cfg, uint64_t seed) {
    return "config=" + std::filesystem::path(cfg.path).filename().string() + " sha256=" + cfg.sha256 +
           " kind=" + cfg.kind + " seed=" + std::to_string(seed) +
           " units: counts and sums are dimensionless, *_ms columns are milliseconds";
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    RunResult res;
    res.name = cfg.name;
    res.kind = cfg.kind;
    Run R{cfg, opt.threads.value_or(cfg.threads), opt.seed.value_or(cfg.seed), res, opt.out_dir};
    if (R.threads < 1) throw ConfigError("threads must be >= 1");
    const std::map<std::string, void (*)(Run&)> kinds = {
        {"sieve", run_sieve},
        {"correlate", run_correlate},
        {"predict-corollary", run_predict_corollary},
        {"predict-theorem", run_predict_theorem},
        {"partition", run_partition},
        {"majorant-scan", run_majorant_scan},
        {"linear-forms-ratio", run_linear_forms_ratio},
        {"char-identity", run_char_identity},
        {"stability-scan", run_stability_scan},
        {"sato-tate", run_sato_tate},
        {"alpha-check", run_alpha_check},
        {"beta-closed-form", run_beta_closed_form},
        {"tau", run_tau},
        {"exceptional-density", run_exceptional_density},
        {"average-order", run_average_order},
        {"major-arc-probe", run_major_arc_probe},
    };
    auto it = kinds.find(cfg.kind);
    if (it == kinds.end()) throw ConfigError(cfg.path + ": unknown kind '" + cfg.kind + "'");
    it->second(R);
    evaluate_assertions(cfg, res);

    if (!opt.out_dir.empty()) {
        namespace fs = std::filesystem;
        const fs::path dir = fs::path(opt.out_dir) / cfg.name;
        fs::create_directories(dir);
        const auto prov = provenance(cfg, R.seed);
        for (const auto& t : res.tables) t.write((dir / (t.name() + ".csv")).string(), prov);
        CsvTable timings("timings", {"step", "elapsed_ms"});
        for (const auto& [k, v] : res.timings_ms) timings.row(k, v);
        timings.write((dir / "timings.csv").string(), prov);
        std::ofstream s(dir / "summary.txt", std::ios::binary);
        s << "# " << prov << "\n" << render_summary(res);
        if (!s) throw Error("cannot write summary in " + dir.string());
    }
    return res;
}

std::string render_summary(const RunResult& r) {
    std::ostringstream o;
    o << "experiment " << r.name << " (" << r.kind << ")\n";
    for (const auto& [k, v] : r.metrics) o << "  metric " << k << " = " << fmt(v) << "\n";
    for (const auto& n : r.notes) o << "  note " << n << "\n";
    for (const auto& a : r.assertions) o << "  " << (a.pass ? "PASS " : "FAIL ") << a.label << " (value " << fmt(a.value) << ")\n";
    o << "  result " << (r.passed() ? "PASS" : "FAIL") << "\n";
    return o.str();
}

int run_command(const std::string& kind, const std::string& config_path, const RunOptions& opt, std::ostream& out,
                std::ostream& err) {
    namespace fs = std::filesystem;
    auto run_one = [&](const std::string& path, const std::string* expect) -> int {
        try {
            auto cfg = load_config(path);
            if (expect && cfg.kind != *expect)
                throw ConfigError(path + ": config kind '" + cfg.kind + "' does not match command '" + *expect + "'");
            auto res = run_experiment(cfg, opt);
            out << render_summary(res) << std::flush;
            return res.passed() ? 0 : 1;
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << "\n";
        } catch (const std::exception& e) {
            err << "error: " << path << ": " << e.what() << "\n";
        }
        return 2;
    };
    if (kind == "suite") {
        std::error_code ec;
        if (!fs::is_directory(config_path, ec)) {
            err << "config error: suite needs a directory of *.yaml files, got " << config_path << "\n";
            return 2;
        }
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(config_path))
            if (e.is_regular_file() && e.path().extension() == ".yaml") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            err << "config error: no *.yaml files in " << config_path << "\n";
            return 2;
        }
        int status = 0;
        for (const auto& f : files) {
            const int s = run_one(f, nullptr);
            out << (s == 0 ? "[PASS] " : s == 1 ? "[FAIL] " : "[ERROR] ") << fs::path(f).filename().string() << "\n";
            status = std::max(status, s);
        }
        out << "suite " << (status == 0 ? "PASS" : "FAIL") << " (" << files.size() << " experiments)\n";
        return status;
    }
    const auto kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        err << "config error: unknown kind '" << kind << "'\n";
        return 2;
    }
    return run_one(config_path, &kind);
}

}  // namespace multcorr
