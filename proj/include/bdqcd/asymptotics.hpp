#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bdqcd/distributions.hpp"
#include "bdqcd/fusion.hpp"
#include "bdqcd/quadrature.hpp"

namespace bdqcd {

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("binomial index out of range");
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

inline void check_vote_range(int honest, int compromised, int votes) {
    if (compromised < 0 || honest < 1)
        throw std::invalid_argument("need honest >= 1 and compromised >= 0");
    if (!(votes > compromised && votes <= honest))
        throw std::invalid_argument("vote count d must satisfy M < d <= |N|");
}

/// xi_d = E[d-th smallest of `sensor_count` i.i.d. standard normals], by
/// quadrature of the order-statistic density
///   f_(d)(x) = C * phi(x) * Phi(x)^(d-1) * (1 - Phi(x))^(N-d).
inline double xi_d(int sensor_count, int d, double abs_tol = 1e-6) {
    if (d < 1 || d > sensor_count)
        throw std::invalid_argument("order-statistic rank must lie in [1, N]");
    const double log_coeff = std::lgamma(sensor_count + 1.0) - std::lgamma(d + 0.0) -
                             std::lgamma(sensor_count - d + 1.0);
    const double coeff = std::exp(log_coeff);
    auto integrand = [&](double x) {
        const double cdf = normal_cdf(x);
        return x * coeff * normal_pdf(x) * std::pow(cdf, d - 1) *
               std::pow(1.0 - cdf, sensor_count - d);
    };
    return integrate(integrand, -12.0, 12.0, abs_tol * 0.1);
}

/// Second-order delay constant D^q_{d:N} = xi_d * sqrt(sigma^2(q,j*_q) / I^q).
inline double second_order_constant(int sensor_count, int d, double divergence,
                                    double sigma2) {
    return xi_d(sensor_count, d) * std::sqrt(sigma2 / divergence);
}

/// Expansion of E[sigma^q_(d)(h)] as h grows: h / I^q + D^q_{d:N} sqrt(h),
/// with the o(1) factor dropped.
inline double delay_expansion(double h, double divergence, double sigma2,
                              int sensor_count, int d) {
    if (!(h > 0.0)) throw std::invalid_argument("threshold must be positive");
    return h / divergence + second_order_constant(sensor_count, d, divergence, sigma2) * std::sqrt(h);
}

/// Lower bound on the mean time to a false alarm or false isolation of the
/// multi-shot d-th alarm:
///   (d-M)/(d-M+1) * C(N, d-M)^(-1/(d-M)) * e^h.
inline double false_bound_multishot(int honest, int compromised, int votes, double h) {
    check_vote_range(honest, compromised, votes);
    const int a = votes - compromised;
    return (a / (a + 1.0)) * std::pow(binomial_coefficient(honest, a), -1.0 / a) *
           std::exp(h);
}

/// Lower bound for the simultaneous d-th alarm:
///   (1/2) * C(N, d-M)^(-1) * e^((d-M) h).
inline double false_bound_simultaneous(int honest, int compromised, int votes, double h) {
    check_vote_range(honest, compromised, votes);
    const int a = votes - compromised;
    return 0.5 / binomial_coefficient(honest, a) * std::exp(a * h);
}

/// Local threshold giving a certified mean time to false alarm/isolation of
/// at least gamma for the simultaneous rule:
///   h = (log gamma + log(2 C(N, d-M))) / (d-M).
inline double calibrate_h_simultaneous(int honest, int compromised, int votes,
                                       double gamma) {
    check_vote_range(honest, compromised, votes);
    if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
    const int a = votes - compromised;
    return (std::log(gamma) + std::log(2.0 * binomial_coefficient(honest, a))) / a;
}

/// Multi-shot calibration:
///   h = log gamma + log(C(N, d-M)) / (d-M) + log((d-M+1)/(d-M)).
inline double calibrate_h_multishot(int honest, int compromised, int votes,
                                    double gamma) {
    check_vote_range(honest, compromised, votes);
    if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
    const int a = votes - compromised;
    return std::log(gamma) + std::log(binomial_coefficient(honest, a)) / a +
           std::log((a + 1.0) / a);
}

/// Tight converse slope: D >= (slope) log gamma with slope = 1/((N-M) I*).
inline double converse_slope(int honest, int compromised, double i_star) {
    if (honest <= compromised)
        throw std::invalid_argument("converse slope needs |N| > M");
    return 1.0 / ((honest - compromised) * i_star);
}

/// The non-tight genie-free converse 1/(N I*), kept for the ordering check
/// against the tight slope.
inline double simple_converse_slope(int honest, double i_star) {
    if (honest < 1) throw std::invalid_argument("need at least one sensor");
    return 1.0 / (honest * i_star);
}

/// Achievable first-order slope of the proposed rules: simultaneous d-th
/// alarm 1/((d-M) I*), multi-shot d-th alarm 1/I* for any d > M. The
/// one-shot baseline has no delay guarantee (undecidable events).
inline double achievability_slope(RuleKind kind, int honest, int compromised,
                                  int votes, double i_star) {
    check_vote_range(honest, compromised, votes);
    switch (kind) {
        case RuleKind::d_voting_simultaneous:
            return 1.0 / ((votes - compromised) * i_star);
        case RuleKind::multi_shot:
            return 1.0 / i_star;
        case RuleKind::one_shot:
        case RuleKind::genie_centralized:
            throw std::invalid_argument(
                "no achievability slope is defined for this rule");
    }
    return 0.0;
}

/// Stackelberg cost of the leader: 1/((N-M) I*) when |N| > M, zero otherwise.
inline double stackelberg_cost(int honest, int compromised, double i_star) {
    if (honest <= compromised) return 0.0;
    return 1.0 / ((honest - compromised) * i_star);
}

/// Finite-gamma surrogate of the leader cost J^1 = D/log gamma + I_-(gamma - A):
/// infinite whenever the false-metric estimate falls below gamma.
inline double leader_cost_empirical(double delay_mean, double gamma,
                                    double false_metric_mean) {
    if (!(gamma > 1.0)) throw std::invalid_argument("gamma must exceed 1");
    // 1e-9 relative slack so a bound that equals gamma by construction is
    // not rejected on roundoff
    if (false_metric_mean * (1.0 + 1e-9) < gamma)
        return std::numeric_limits<double>::infinity();
    return delay_mean / std::log(gamma);
}

/// Everything the closed-form theory says about one configuration.
struct TheoryReport {
    int honest = 0;
    int compromised = 0;
    int votes = 0;
    RuleKind rule = RuleKind::d_voting_simultaneous;
    ClosestAlternatives alternatives;
    std::vector<double> sigma2_closest;           // per q: sigma^2(q, j*_q)
    std::vector<double> xi;                       // xi[d-1], d in 1..N
    std::vector<std::vector<double>> second_order;  // [q-1][d-1] = D^q_{d:N}
    double i_star = 0.0;
    double converse = 0.0;
    std::optional<double> achievability;
    std::optional<double> gamma;
    std::optional<double> calibrated_h;
    std::optional<double> false_bound;
    double stackelberg = 0.0;
};

inline TheoryReport make_theory_report(const HypothesisSet& hs, int honest,
                                       int compromised, int votes, RuleKind rule,
                                       std::optional<double> gamma = std::nullopt) {
    check_vote_range(honest, compromised, votes);
    TheoryReport r;
    r.honest = honest;
    r.compromised = compromised;
    r.votes = votes;
    r.rule = rule;
    r.alternatives = hs.closest_alternatives();
    r.i_star = r.alternatives.i_star;
    const int Q = hs.hypothesis_count();
    for (int q = 1; q <= Q; ++q)
        r.sigma2_closest.push_back(
            llr_second_moment(hs, q, r.alternatives.row(q).minimizer));
    for (int d = 1; d <= honest; ++d) r.xi.push_back(xi_d(honest, d));
    for (int q = 1; q <= Q; ++q) {
        std::vector<double> row;
        for (int d = 1; d <= honest; ++d)
            row.push_back(r.xi[static_cast<std::size_t>(d - 1)] *
                          std::sqrt(r.sigma2_closest[static_cast<std::size_t>(q - 1)] /
                                    r.alternatives.row(q).divergence));
        r.second_order.push_back(std::move(row));
    }
    r.converse = converse_slope(honest, compromised, r.i_star);
    if (rule == RuleKind::d_voting_simultaneous || rule == RuleKind::multi_shot)
        r.achievability = achievability_slope(rule, honest, compromised, votes, r.i_star);
    r.stackelberg = stackelberg_cost(honest, compromised, r.i_star);
    if (gamma.has_value()) {
        r.gamma = gamma;
        if (rule == RuleKind::d_voting_simultaneous) {
            r.calibrated_h = calibrate_h_simultaneous(honest, compromised, votes, *gamma);
            r.false_bound =
                false_bound_simultaneous(honest, compromised, votes, *r.calibrated_h);
        } else if (rule == RuleKind::multi_shot) {
            r.calibrated_h = calibrate_h_multishot(honest, compromised, votes, *gamma);
            r.false_bound =
                false_bound_multishot(honest, compromised, votes, *r.calibrated_h);
        } else if (rule == RuleKind::genie_centralized) {
            r.calibrated_h = std::log(*gamma);
        }
    }
    return r;
}

inline double delay_expansion(const TheoryReport& r, int q, int d, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("threshold must be positive");
    return h / r.alternatives.row(q).divergence +
           r.second_order.at(static_cast<std::size_t>(q - 1))
                   .at(static_cast<std::size_t>(d - 1)) *
               std::sqrt(h);
}

}  // namespace bdqcd
