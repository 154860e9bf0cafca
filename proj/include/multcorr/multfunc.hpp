#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multcorr/arith.hpp"

namespace multcorr {

class MultiplicativeFunction {
public:
    using Rule = std::function<double(uint64_t p, int k)>;
    using Prepare = std::function<void(uint64_t)>;

    MultiplicativeFunction(std::string name, Rule rule, double H, bool nonnegative,
                           std::optional<double> alpha_hint, Prepare prepare = {});

    const std::string& name() const { return name_; }
    double H() const { return H_; }
    bool nonnegative() const { return nonnegative_; }
    std::optional<double> alpha_hint() const { return alpha_hint_; }

    // f(p^k), k >= 1; enforces |f(p^k)| <= H^k and the sign declaration.
    double at_prime_power(uint64_t p, int k) const;
    double operator()(uint64_t n) const;
    double operator()(const Factorization& f) const;
    // Lets functions backed by precomputed data size their tables for n <= T.
    void prepare(uint64_t T) const {
        if (prepare_) prepare_(T);
    }

private:
    std::string name_;
    Rule rule_;
    double H_;
    bool nonnegative_;
    std::optional<double> alpha_hint_;
    Prepare prepare_;
};

// Read-only window onto values v[0..limit]; index 0 is unused.
struct TableView {
    std::span<const double> values;
    uint64_t limit = 0;
    double at(uint64_t n) const;
};

class SieveTable {
public:
    SieveTable(std::string name, std::vector<double> values);  // values[0..T]
    SieveTable(const MultiplicativeFunction& f, uint64_t T);

    const std::string& name() const { return name_; }
    uint64_t T() const { return values_.size() - 1; }
    double operator[](uint64_t n) const { return values_[n]; }
    TableView view() const { return {values_, T()}; }
    const SpfTable& spf() const;

private:
    std::string name_;
    std::vector<double> values_;
    mutable std::shared_ptr<SpfTable> spf_;
};

// (1/x) sum_{n<=x} h(n)
double mean_value(const TableView& t, uint64_t x);
// (q/x) sum_{n<=x, n = a mod q} h(n)
double mean_value_progression(const TableView& t, uint64_t x, uint64_t q, int64_t a);
// (1/x) sum_{p<=x} |h(p)| log p
double estimate_alpha(const SieveTable& t, uint64_t x);
// (q/phi(q)) (1/log x) exp(sum_{p<=x, p !| q} |h(p)|/p); requires q^2 <= x
double shiu_upper_bound(const SieveTable& t, uint64_t x, uint64_t q);
// sum_{p<=X} (|f(p)| - f(p) cos(t log p)) / p
double elliott_partial_sum(const MultiplicativeFunction& f, uint64_t X, double t);

// Ramanujan tau(n) for n <= T (index 0 holds 0).
std::vector<i128> tau_coefficients(uint64_t T);
bool deligne_bound_holds(uint64_t n, i128 tau_n);

double sato_tate_cdf(double alpha);
double sato_tate_density(double alpha);
double sato_tate_mean();

// Registry: "all_one", "delta_omega:0.5", "two_squares", ...
MultiplicativeFunction make_function(const std::string& spec);
std::vector<std::string> registered_functions();

void write_sieve(const std::string& path, const SieveTable& t);
SieveTable read_sieve(const std::string& path);

}  // namespace multcorr
