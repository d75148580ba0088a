#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdqcd/quadrature.hpp"
#include "bdqcd/random.hpp"

namespace bdqcd {

enum class Family { gaussian, bernoulli, exponential };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::bernoulli: return "bernoulli";
        case Family::exponential: return "exponential";
    }
    return "?";
}

/// A named parametric density with sampling and log-density evaluation.
/// Parameters: gaussian(mean, variance > 0), bernoulli(p in (0,1)),
/// exponential(rate > 0).
class DensityModel {
public:
    static DensityModel gaussian(double mean, double variance) {
        if (!(variance > 0.0) || !std::isfinite(mean) || !std::isfinite(variance))
            throw std::invalid_argument("gaussian requires finite mean and variance > 0");
        return DensityModel(Family::gaussian, mean, variance);
    }
    static DensityModel bernoulli(double p) {
        if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("bernoulli requires p in (0,1)");
        return DensityModel(Family::bernoulli, p, 0.0);
    }
    static DensityModel exponential(double rate) {
        if (!(rate > 0.0) || !std::isfinite(rate))
            throw std::invalid_argument("exponential requires rate > 0");
        return DensityModel(Family::exponential, rate, 0.0);
    }

    Family family() const { return family_; }
    double mean() const { return a_; }        // gaussian
    double variance() const { return b_; }    // gaussian
    double success_prob() const { return a_; }  // bernoulli
    double rate() const { return a_; }          // exponential

    bool in_support(double x) const {
        switch (family_) {
            case Family::gaussian: return std::isfinite(x);
            case Family::bernoulli: return x == 0.0 || x == 1.0;
            case Family::exponential: return std::isfinite(x) && x >= 0.0;
        }
        return false;
    }

    double log_density(double x) const {
        if (!in_support(x))
            throw std::domain_error("observation " + std::to_string(x) +
                                    " outside the support of " + family_name(family_));
        switch (family_) {
            case Family::gaussian:
                return -0.5 * std::log(2.0 * M_PI * b_) - (x - a_) * (x - a_) / (2.0 * b_);
            case Family::bernoulli:
                return x == 1.0 ? std::log(a_) : std::log(1.0 - a_);
            case Family::exponential:
                return std::log(a_) - a_ * x;
        }
        return 0.0;
    }

    double sample(RandomStream& rng) const {
        switch (family_) {
            case Family::gaussian: return rng.normal(a_, b_);
            case Family::bernoulli: return rng.bernoulli(a_);
            case Family::exponential: return rng.exponential(a_);
        }
        return 0.0;
    }

    bool operator==(const DensityModel& o) const {
        return family_ == o.family_ && a_ == o.a_ && b_ == o.b_;
    }

private:
    DensityModel(Family f, double a, double b) : family_(f), a_(a), b_(b) {}
    Family family_;
    double a_, b_;
};

/// Minimum-KL table over an ordered hypothesis set: for each post-change
/// hypothesis q the closest alternative j*_q with I^q = min_{j != q} I(q, j),
/// the pre-change row I^0 = min_{1<=j<=Q} I(j, 0), and I* = min_q I^q.
/// KL ties violate the uniqueness assumption; they are flagged and broken
/// toward the smallest index so downstream behavior stays deterministic.
struct ClosestAlternatives {
    struct Entry {
        double divergence = 0.0;
        int minimizer = 0;
        bool tie = false;
    };
    std::vector<Entry> per_hypothesis;  // index q-1 for q in 1..Q
    Entry pre_change;                   // I^0, j*_0
    double i_star = 0.0;
    int i_star_argmin = 1;              // q attaining I*
    int q_min = 0;                      // argmin over q in {0,...,Q} of I^q
    bool q_min_tie = false;
    bool any_tie = false;

    const Entry& row(int q) const { return per_hypothesis.at(static_cast<std::size_t>(q) - 1); }
    int j_star(int q) const { return q == 0 ? pre_change.minimizer : row(q).minimizer; }
};

class HypothesisSet;

double kl_divergence(const HypothesisSet& hs, int q, int j);
double kl_divergence_quadrature(const HypothesisSet& hs, int q, int j,
                                double abs_tol = 1e-8);
double llr_second_moment(const HypothesisSet& hs, int q, int j);
double llr_second_moment_quadrature(const HypothesisSet& hs, int q, int j,
                                    double abs_tol = 1e-8);

/// Ordered list of Q+1 densities, index 0 = pre-change. Immutable after
/// construction; LLR coefficients are precomputed per ordered pair so the
/// simulation loops never touch log().
class HypothesisSet {
public:
    explicit HypothesisSet(std::vector<DensityModel> densities)
        : densities_(std::move(densities)) {
        if (densities_.size() < 2)
            throw std::invalid_argument("hypothesis set needs a pre-change density and Q >= 1 post-change densities");
        for (std::size_t i = 1; i < densities_.size(); ++i)
            if (densities_[i].family() != densities_[0].family()) mixed_family_ = true;
        build_llr_table();
    }

    int hypothesis_count() const { return static_cast<int>(densities_.size()) - 1; }  // Q
    const DensityModel& density(int index) const {
        return densities_.at(static_cast<std::size_t>(index));
    }
    /// Cross-family sets are legal but flagged: LLRs then depend on the
    /// intersection of supports and may raise domain errors.
    bool mixed_family() const { return mixed_family_; }

    /// log P_q(x) - log P_j(x); requires q != j and x in the common support.
    double log_likelihood_ratio(int q, int j, double x) const {
        check_pair(q, j);
        const PairCoeffs& c = coeffs(q, j);
        switch (c.kind) {
            case PairCoeffs::Kind::quadratic:
                if (!densities_[static_cast<std::size_t>(q)].in_support(x) ||
                    !densities_[static_cast<std::size_t>(j)].in_support(x))
                    throw std::domain_error("observation outside the common support");
                return (c.a * x + c.b) * x + c.c;
            case PairCoeffs::Kind::two_point:
                if (x == 1.0) return c.a;
                if (x == 0.0) return c.b;
                throw std::domain_error("bernoulli observation must be 0 or 1");
            case PairCoeffs::Kind::generic:
                return densities_[static_cast<std::size_t>(q)].log_density(x) -
                       densities_[static_cast<std::size_t>(j)].log_density(x);
        }
        return 0.0;
    }

    void check_pair(int q, int j) const {
        const int Q = hypothesis_count();
        if (q == j) throw std::invalid_argument("hypothesis pair requires q != j");
        if (q < 0 || q > Q || j < 0 || j > Q)
            throw std::invalid_argument("hypothesis index out of range");
    }

    ClosestAlternatives closest_alternatives() const {
        const int Q = hypothesis_count();
        ClosestAlternatives out;
        out.per_hypothesis.resize(static_cast<std::size_t>(Q));
        for (int q = 1; q <= Q; ++q) {
            auto& e = out.per_hypothesis[static_cast<std::size_t>(q - 1)];
            e.divergence = std::numeric_limits<double>::infinity();
            for (int j = 0; j <= Q; ++j) {
                if (j == q) continue;
                const double d = kl_divergence(*this, q, j);
                if (d < e.divergence) {
                    e.divergence = d;
                    e.minimizer = j;
                    e.tie = false;
                } else if (d == e.divergence) {
                    e.tie = true;
                }
            }
        }
        out.pre_change.divergence = std::numeric_limits<double>::infinity();
        for (int j = 1; j <= Q; ++j) {
            const double d = kl_divergence(*this, j, 0);
            if (d < out.pre_change.divergence) {
                out.pre_change.divergence = d;
                out.pre_change.minimizer = j;
                out.pre_change.tie = false;
            } else if (d == out.pre_change.divergence) {
                out.pre_change.tie = true;
            }
        }
        out.i_star = std::numeric_limits<double>::infinity();
        for (int q = 1; q <= Q; ++q) {
            const double d = out.row(q).divergence;
            if (d < out.i_star) {
                out.i_star = d;
                out.i_star_argmin = q;
            }
        }
        // q_m = argmin over q in [Q]^+ of I^q, with I^0 included.
        out.q_min = 0;
        double best = out.pre_change.divergence;
        for (int q = 1; q <= Q; ++q) {
            const double d = out.row(q).divergence;
            if (d < best) {
                best = d;
                out.q_min = q;
                out.q_min_tie = false;
            } else if (d == best) {
                out.q_min_tie = true;
            }
        }
        // any_tie reports violations of the uniqueness assumption (the j*
        // minimizers); the q_min tie is a separate flag consumed by the
        // reverse-attack construction.
        out.any_tie = out.pre_change.tie;
        for (const auto& e : out.per_hypothesis) out.any_tie = out.any_tie || e.tie;
        return out;
    }

    /// Assumption check used at scenario validation: every pairwise KL and
    /// LLR second moment must be finite.
    void validate_moments() const {
        const int Q = hypothesis_count();
        for (int q = 1; q <= Q; ++q) {
            for (int j = 0; j <= Q; ++j) {
                if (j == q) continue;
                const double i = kl_divergence(*this, q, j);
                const double s = llr_second_moment(*this, q, j);
                if (!std::isfinite(i) || !std::isfinite(s))
                    throw std::invalid_argument(
                        "hypothesis pair (" + std::to_string(q) + "," + std::to_string(j) +
                        ") has non-finite KL divergence or LLR second moment");
            }
        }
    }

private:
    friend double kl_divergence(const HypothesisSet&, int, int);
    friend double kl_divergence_quadrature(const HypothesisSet&, int, int, double);
    friend double llr_second_moment(const HypothesisSet&, int, int);
    friend double llr_second_moment_quadrature(const HypothesisSet&, int, int, double);

    struct PairCoeffs {
        enum class Kind { quadratic, two_point, generic };
        Kind kind = Kind::generic;
        double a = 0.0, b = 0.0, c = 0.0;  // quadratic: a x^2 + b x + c; two_point: (llr at 1, llr at 0)
    };

    const PairCoeffs& coeffs(int q, int j) const {
        return llr_table_[static_cast<std::size_t>(q) * densities_.size() +
                          static_cast<std::size_t>(j)];
    }

    void build_llr_table() {
        const std::size_t n = densities_.size();
        llr_table_.resize(n * n);
        for (std::size_t q = 0; q < n; ++q) {
            for (std::size_t j = 0; j < n; ++j) {
                if (q == j) continue;
                llr_table_[q * n + j] = make_coeffs(densities_[q], densities_[j]);
            }
        }
    }

    static PairCoeffs make_coeffs(const DensityModel& num, const DensityModel& den) {
        PairCoeffs c;
        if (num.family() == Family::gaussian && den.family() == Family::gaussian) {
            const double vq = num.variance(), vj = den.variance();
            const double mq = num.mean(), mj = den.mean();
            c.kind = PairCoeffs::Kind::quadratic;
            c.a = 0.5 / vj - 0.5 / vq;
            c.b = mq / vq - mj / vj;
            c.c = 0.5 * std::log(vj / vq) + mj * mj / (2.0 * vj) - mq * mq / (2.0 * vq);
        } else if (num.family() == Family::exponential && den.family() == Family::exponential) {
            c.kind = PairCoeffs::Kind::quadratic;
            c.a = 0.0;
            c.b = den.rate() - num.rate();
            c.c = std::log(num.rate() / den.rate());
        } else if (num.family() == Family::bernoulli && den.family() == Family::bernoulli) {
            c.kind = PairCoeffs::Kind::two_point;
            c.a = std::log(num.success_prob() / den.success_prob());
            c.b = std::log((1.0 - num.success_prob()) / (1.0 - den.success_prob()));
        } else {
            c.kind = PairCoeffs::Kind::generic;
        }
        return c;
    }

    std::vector<DensityModel> densities_;
    std::vector<PairCoeffs> llr_table_;
    bool mixed_family_ = false;
};

namespace detail {

// Integration window wide enough that the neglected tails are far below the
// 1e-8 tolerance for any parameters that pass construction checks.
inline std::pair<double, double> integration_window(const DensityModel& p,
                                                    const DensityModel& r) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const DensityModel* d : {&p, &r}) {
        switch (d->family()) {
            case Family::gaussian: {
                const double s = std::sqrt(d->variance());
                lo = std::isfinite(lo) ? std::min(lo, d->mean() - 14.0 * s) : d->mean() - 14.0 * s;
                hi = std::isfinite(hi) ? std::max(hi, d->mean() + 14.0 * s) : d->mean() + 14.0 * s;
                break;
            }
            case Family::exponential: {
                lo = std::isfinite(lo) ? std::min(lo, 0.0) : 0.0;
                const double t = 60.0 / d->rate();
                hi = std::isfinite(hi) ? std::max(hi, t) : t;
                break;
            }
            case Family::bernoulli:
                break;
        }
    }
    if (p.family() == Family::exponential || r.family() == Family::exponential)
        lo = std::max(lo, 0.0);
    return {lo, hi};
}

template <typename G>
double expectation_under(const HypothesisSet& hs, int q, int j, const G& g,
                         double abs_tol) {
    const DensityModel& pq = hs.density(q);
    const DensityModel& pj = hs.density(j);
    if (pq.family() == Family::bernoulli && pj.family() == Family::bernoulli) {
        // Discrete support: the "quadrature" path is the exact support sum.
        double total = 0.0;
        for (double x : {0.0, 1.0})
            total += std::exp(pq.log_density(x)) * g(x);
        return total;
    }
    if (pq.family() == Family::bernoulli || pj.family() == Family::bernoulli)
        throw std::invalid_argument(
            "LLR between a discrete and a continuous density is undefined");
    // P_q must be absolutely continuous w.r.t. P_j, otherwise the divergence
    // is infinite (gaussian mass below 0 against an exponential).
    if (pq.family() == Family::gaussian && pj.family() == Family::exponential)
        return std::numeric_limits<double>::infinity();
    auto [lo, hi] = integration_window(pq, pj);
    return integrate(
        [&](double x) { return std::exp(pq.log_density(x)) * g(x); }, lo, hi,
        abs_tol);
}

}  // namespace detail

/// I(q, j) = E_q[ log(P_q(X)/P_j(X)) ], the KL divergence from P_j to P_q,
/// by closed form. Same-family only; mixed-family sets go through the
/// quadrature path.
inline double kl_divergence_closed_form(const HypothesisSet& hs, int q, int j) {
    hs.check_pair(q, j);
    const DensityModel& pq = hs.density(q);
    const DensityModel& pj = hs.density(j);
    if (pq.family() != pj.family())
        throw std::invalid_argument("no closed form across families");
    switch (pq.family()) {
        case Family::gaussian: {
            const double vq = pq.variance(), vj = pj.variance();
            const double dm = pq.mean() - pj.mean();
            return 0.5 * (std::log(vj / vq) + vq / vj + dm * dm / vj - 1.0);
        }
        case Family::bernoulli: {
            const double p = pq.success_prob(), r = pj.success_prob();
            return p * std::log(p / r) + (1.0 - p) * std::log((1.0 - p) / (1.0 - r));
        }
        case Family::exponential: {
            const double lq = pq.rate(), lj = pj.rate();
            return std::log(lq / lj) + lj / lq - 1.0;
        }
    }
    return 0.0;
}

inline double kl_divergence_quadrature(const HypothesisSet& hs, int q, int j,
                                       double abs_tol) {
    hs.check_pair(q, j);
    return detail::expectation_under(
        hs, q, j, [&](double x) { return hs.log_likelihood_ratio(q, j, x); },
        abs_tol);
}

inline double kl_divergence(const HypothesisSet& hs, int q, int j) {
    hs.check_pair(q, j);
    if (hs.density(q).family() == hs.density(j).family())
        return kl_divergence_closed_form(hs, q, j);
    return kl_divergence_quadrature(hs, q, j);
}

/// sigma^2(q, j) = Var_q[ log(P_q(X)/P_j(X)) ].
inline double llr_second_moment_closed_form(const HypothesisSet& hs, int q, int j) {
    hs.check_pair(q, j);
    const DensityModel& pq = hs.density(q);
    const DensityModel& pj = hs.density(j);
    if (pq.family() != pj.family())
        throw std::invalid_argument("no closed form across families");
    switch (pq.family()) {
        case Family::gaussian: {
            // llr = a x^2 + b x + c with X ~ N(mu, v):
            // Var = 2 a^2 v^2 + v (2 a mu + b)^2.
            const double vq = pq.variance(), vj = pj.variance();
            const double a = 0.5 / vj - 0.5 / vq;
            const double b = pq.mean() / vq - pj.mean() / vj;
            const double s = 2.0 * a * pq.mean() + b;
            return 2.0 * a * a * vq * vq + vq * s * s;
        }
        case Family::bernoulli: {
            const double p = pq.success_prob(), r = pj.success_prob();
            const double gap = std::log(p / r) - std::log((1.0 - p) / (1.0 - r));
            return p * (1.0 - p) * gap * gap;
        }
        case Family::exponential: {
            const double d = pj.rate() - pq.rate();
            return d * d / (pq.rate() * pq.rate());
        }
    }
    return 0.0;
}

inline double llr_second_moment_quadrature(const HypothesisSet& hs, int q, int j,
                                           double abs_tol) {
    hs.check_pair(q, j);
    const double mean = kl_divergence_quadrature(hs, q, j, abs_tol);
    return detail::expectation_under(
        hs, q, j,
        [&](double x) {
            const double d = hs.log_likelihood_ratio(q, j, x) - mean;
            return d * d;
        },
        abs_tol);
}

inline double llr_second_moment(const HypothesisSet& hs, int q, int j) {
    hs.check_pair(q, j);
    if (hs.density(q).family() == hs.density(j).family())
        return llr_second_moment_closed_form(hs, q, j);
    return llr_second_moment_quadrature(hs, q, j);
}

inline double log_likelihood_ratio(const HypothesisSet& hs, int q, int j, double x) {
    return hs.log_likelihood_ratio(q, j, x);
}

inline ClosestAlternatives closest_alternatives(const HypothesisSet& hs) {
    return hs.closest_alternatives();
}

}  // namespace bdqcd
