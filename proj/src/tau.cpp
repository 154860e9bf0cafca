#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <utility>

#include "multcorr/multfunc.hpp"

namespace multcorr {

namespace {

using Sparse = std::vector<std::pair<size_t, i128>>;

Sparse sparsify(const std::vector<i128>& a) {
    Sparse s;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != 0) s.emplace_back(i, a[i]);
    return s;
}

// a * b truncated to a.size() terms; cost is |b| * a.size().
std::vector<i128> mul_by_sparse(const std::vector<i128>& a, const Sparse& b) {
    const size_t N = a.size();
    std::vector<i128> r(N, 0);
    for (auto [j, c] : b) {
        if (j >= N) break;
        for (size_t i = 0; i + j < N; ++i) {
            if (a[i] == 0) continue;
            r[i + j] = checked_add(r[i + j], checked_mul(a[i], c));
        }
    }
    return r;
}

// prod_{n>=1} (1 - q^n) up to q^{N-1}, from the pentagonal number theorem
std::vector<i128> euler_product(size_t N) {
    std::vector<i128> e(N, 0);
    e[0] = 1;
    for (int64_t k = 1;; ++k) {
        size_t g1 = size_t(k * (3 * k - 1) / 2), g2 = size_t(k * (3 * k + 1) / 2);
        if (g1 >= N) break;
        i128 sgn = (k % 2) ? -1 : 1;
        e[g1] += sgn;
        if (g2 < N) e[g2] += sgn;
    }
    return e;
}

}  // namespace

std::vector<i128> tau_coefficients(uint64_t T) {
    std::vector<i128> tau(T + 1, 0);
    if (T == 0) return tau;
    const size_t N = T;  // tau(n) is the coefficient of q^{n-1}
    auto eta = euler_product(N);
    Sparse eta_s = sparsify(eta);
    auto cube = mul_by_sparse(mul_by_sparse(eta, eta_s), eta_s);
    Sparse cube_s = sparsify(cube);
    auto acc = cube;
    for (int i = 0; i < 7; ++i) acc = mul_by_sparse(acc, cube_s);
    for (size_t n = 1; n <= T; ++n) tau[n] = acc[n - 1];
    return tau;
}

bool deligne_bound_holds(uint64_t n, i128 tau_n) {
    using boost::multiprecision::cpp_int;
    uint64_t d = 1;
    for (auto [p, k] : factorize(n)) d *= uint64_t(k + 1);
    cpp_int t = cpp_int(to_string(tau_n));
    cpp_int rhs = cpp_int(d) * d * boost::multiprecision::pow(cpp_int(n), 11);
    return t * t <= rhs;
}

double sato_tate_cdf(double alpha) {
    if (alpha < 0.0 || alpha > 2.0) throw DomainError("Sato-Tate distribution lives on [0,2]");
    const double th = std::asin(alpha / 2.0);
    return (2.0 * th + std::sin(2.0 * th)) / boost::math::constants::pi<double>();
}

double sato_tate_density(double alpha) {
    if (alpha < 0.0 || alpha > 2.0) return 0.0;
    return std::sqrt(std::max(0.0, 4.0 - alpha * alpha)) / boost::math::constants::pi<double>();
}

double sato_tate_mean() {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate([](double a) { return a * sato_tate_density(a); }, 0.0, 2.0);
}

}  // namespace multcorr
