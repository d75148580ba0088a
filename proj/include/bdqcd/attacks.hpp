#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bdqcd/distributions.hpp"
#include "bdqcd/random.hpp"
#include "bdqcd/sensors.hpp"

namespace bdqcd {

enum class AttackKind { absent, silent_h0, always_alarm, reverse };

inline const char* attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::absent: return "absent";
        case AttackKind::silent_h0: return "silent_h0";
        case AttackKind::always_alarm: return "always_alarm";
        case AttackKind::reverse: return "reverse";
    }
    return "?";
}

/// Compromised-sensor strategy. The attacker knows nu, the true hypothesis,
/// the decision rule, and all observations; only the sensors in
/// `compromised` ever emit attack messages.
struct AttackStrategy {
    AttackKind kind = AttackKind::absent;
    std::vector<int> compromised;
    /// always_alarm: hypothesis reported forever; defaulted by
    /// default_always_alarm_target() when unset.
    std::optional<int> target;
    /// always_alarm: first step at which the attack starts reporting.
    std::int64_t activation_step = 1;
};

/// Fake observation densities for the reverse attack: under true hypothesis
/// q the compromised sensors feed their local rule i.i.d. draws from
/// P index fake_of[q]. Before the change they use the q = 0 row, after it
/// the true-q row.
struct FakeStreamAssignment {
    std::vector<int> fake_of;  // indexed by q in 0..Q
    int q_min = 0;             // argmin over [Q]^+ of I^q
    bool tie_flagged = false;
};

/// Reverse-attack construction: swap each hypothesis with its KL-closest
/// alternative, i.e. fake_of[q] = j*_q, except that fake_of[j*_{q_m}] = q_m
/// so the pair (q_m, j*_{q_m}) is swapped symmetrically. With Q = 1 this is
/// exactly the binary reverse attack (P_0 and P_1 swapped).
inline FakeStreamAssignment build_reverse_assignment(const HypothesisSet& hs,
                                                     const ClosestAlternatives& alts) {
    const int Q = hs.hypothesis_count();
    FakeStreamAssignment out;
    out.q_min = alts.q_min;
    out.tie_flagged = alts.q_min_tie;
    const int swapped_back = alts.j_star(out.q_min);
    out.fake_of.resize(static_cast<std::size_t>(Q) + 1);
    for (int q = 0; q <= Q; ++q) {
        out.fake_of[static_cast<std::size_t>(q)] =
            (q == swapped_back) ? out.q_min : alts.j_star(q);
    }
    return out;
}

inline FakeStreamAssignment build_reverse_assignment(const HypothesisSet& hs) {
    return build_reverse_assignment(hs, hs.closest_alternatives());
}

/// Default always_alarm target: the hypothesis honest sensors are quickest
/// to accept falsely. Under nu = infinity that is j*_0; under a true change
/// the KL-closest post-change alternative to the true hypothesis stands in
/// for the fastest expected false acceptance.
inline int default_always_alarm_target(const HypothesisSet& hs,
                                       const ClosestAlternatives& alts,
                                       bool change_never_happens, int q_true) {
    if (change_never_happens) return alts.pre_change.minimizer;
    const int Q = hs.hypothesis_count();
    if (Q == 1) return 1;
    int best = q_true == 1 ? 2 : 1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= Q; ++q) {
        if (q == q_true) continue;
        const double d = kl_divergence(hs, q_true, q);
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

/// Per-trial attack machinery. The reverse attack owns one honest-rule
/// SensorState per compromised sensor, driven by its fake stream.
class AttackState {
public:
    AttackState(const AttackStrategy& strategy, const HypothesisSet& hs,
                ReportMechanism mechanism, double h,
                std::vector<RandomStream> fake_obs_streams,
                std::vector<RandomStream> tie_streams)
        : strategy_(strategy),
          hs_(&hs),
          mechanism_(mechanism),
          fake_obs_streams_(std::move(fake_obs_streams)),
          tie_streams_(std::move(tie_streams)) {
        if (strategy_.kind == AttackKind::always_alarm) {
            if (!strategy_.target.has_value())
                throw std::invalid_argument("always_alarm attack needs a target");
            if (*strategy_.target < 1 || *strategy_.target > hs.hypothesis_count())
                throw std::invalid_argument("always_alarm target outside [Q]");
        }
        if (strategy_.kind == AttackKind::reverse) {
            assignment_ = build_reverse_assignment(hs);
            if (fake_obs_streams_.size() != strategy_.compromised.size() ||
                tie_streams_.size() != strategy_.compromised.size())
                throw std::invalid_argument("reverse attack needs one stream pair per compromised sensor");
            for (int id : strategy_.compromised)
                fake_sensors_.emplace_back(id, mechanism_,
                                           CusumMatrix::full(hs.hypothesis_count()), h);
        }
    }

    const FakeStreamAssignment& assignment() const { return assignment_; }

    std::vector<ReportMessage> step(std::int64_t t, std::optional<std::int64_t> nu,
                                    int q_true) {
        std::vector<ReportMessage> msgs;
        switch (strategy_.kind) {
            case AttackKind::absent:
                break;
            case AttackKind::silent_h0:
                // Never-alarming traffic: zero acceptance vectors on the
                // simultaneous link, silence on the report links.
                if (mechanism_ == ReportMechanism::simultaneous)
                    for (int id : strategy_.compromised)
                        msgs.push_back(ReportMessage::simultaneous(id, 0));
                break;
            case AttackKind::always_alarm: {
                if (t < strategy_.activation_step) break;
                const int target = *strategy_.target;
                for (int id : strategy_.compromised) {
                    if (mechanism_ == ReportMechanism::simultaneous)
                        msgs.push_back(ReportMessage::simultaneous(
                            id, std::uint64_t{1} << (target - 1)));
                    else if (mechanism_ == ReportMechanism::multi_shot)
                        msgs.push_back(ReportMessage::multi_shot(id, target));
                    else
                        msgs.push_back(ReportMessage::one_shot(id, target));
                }
                break;
            }
            case AttackKind::reverse: {
                const bool pre_change = !nu.has_value() || t <= *nu;
                const int row = pre_change ? 0 : q_true;
                for (std::size_t i = 0; i < fake_sensors_.size(); ++i) {
                    const DensityModel& fake =
                        hs_->density(assignment_.fake_of[static_cast<std::size_t>(row)]);
                    const double x = fake.sample(fake_obs_streams_[i]);
                    auto msg = fake_sensors_[i].step(*hs_, x, tie_streams_[i]);
                    if (msg) msgs.push_back(*msg);
                }
                break;
            }
        }
        return msgs;
    }

    void reset_epoch() {
        for (auto& s : fake_sensors_) s.reset_epoch();
    }

private:
    AttackStrategy strategy_;
    const HypothesisSet* hs_;
    ReportMechanism mechanism_;
    FakeStreamAssignment assignment_;
    std::vector<SensorState> fake_sensors_;
    std::vector<RandomStream> fake_obs_streams_;
    std::vector<RandomStream> tie_streams_;
};

}  // namespace bdqcd
