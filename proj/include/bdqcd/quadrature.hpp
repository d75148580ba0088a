#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdqcd {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// 15-point Kronrod abscissae/weights with the embedded 7-point Gauss rule
// (QUADPACK dqk15 tables).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
struct PanelResult {
    double value;
    double error;
};

template <typename F>
PanelResult<F> gauss_kronrod_panel(const F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double result_gauss = kGaussWeights[3] * fc;
    double result_kronrod = kKronrodWeights[7] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kKronrodNodes[i];
        const double fsum = f(center - dx) + f(center + dx);
        result_kronrod += kKronrodWeights[i] * fsum;
        if (i % 2 == 1) result_gauss += kGaussWeights[i / 2] * fsum;
    }
    result_gauss *= half;
    result_kronrod *= half;
    return {result_kronrod, std::abs(result_kronrod - result_gauss)};
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration over [a, b]: keeps bisecting the
// subinterval with the largest error estimate until the total estimated
// error drops below abs_tol.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-8,
                 std::size_t max_subdivisions = 10000) {
    struct Interval {
        double a, b, value, error;
        bool operator<(const Interval& o) const { return error < o.error; }
    };

    auto first = detail::gauss_kronrod_panel(f, a, b);
    std::priority_queue<Interval> work;
    work.push({a, b, first.value, first.error});
    double total_value = first.value;
    double total_error = first.error;

    std::size_t splits = 0;
    while (total_error > abs_tol) {
        if (splits >= max_subdivisions) {
            throw QuadratureError(
                "quadrature failed to converge: estimated error " +
                std::to_string(total_error) + " > tolerance " +
                std::to_string(abs_tol) + " after " + std::to_string(splits) +
                " subdivisions on [" + std::to_string(a) + ", " +
                std::to_string(b) + "]");
        }
        Interval worst = work.top();
        work.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::gauss_kronrod_panel(f, worst.a, mid);
        auto right = detail::gauss_kronrod_panel(f, mid, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        work.push({worst.a, mid, left.value, left.error});
        work.push({mid, worst.b, right.value, right.error});
        ++splits;
    }
    return total_value;
}

// Standard normal pdf / cdf used throughout the theory module.
inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

}  // namespace bdqcd
