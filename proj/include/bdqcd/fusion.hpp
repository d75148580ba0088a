#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bdqcd/cusum.hpp"
#include "bdqcd/distributions.hpp"
#include "bdqcd/sensors.hpp"

namespace bdqcd {

enum class RuleKind { d_voting_simultaneous, multi_shot, one_shot, genie_centralized };

inline const char* rule_name(RuleKind k) {
    switch (k) {
        case RuleKind::d_voting_simultaneous: return "simultaneous";
        case RuleKind::multi_shot: return "multi_shot";
        case RuleKind::one_shot: return "one_shot";
        case RuleKind::genie_centralized: return "genie";
    }
    return "?";
}

inline ReportMechanism mechanism_for_rule(RuleKind k) {
    switch (k) {
        case RuleKind::d_voting_simultaneous: return ReportMechanism::simultaneous;
        case RuleKind::multi_shot: return ReportMechanism::multi_shot;
        case RuleKind::one_shot: return ReportMechanism::one_shot;
        // the genie ignores local reports; keep sensors on the cheap link
        case RuleKind::genie_centralized: return ReportMechanism::simultaneous;
    }
    return ReportMechanism::simultaneous;
}

/// Fusion-center stopping rule. d is the vote count for the d-parameterized
/// rules; the genie baseline carries its own threshold and the identities of
/// the revealed honest sensors.
struct FusionRule {
    RuleKind kind = RuleKind::d_voting_simultaneous;
    int d = 1;
    double genie_threshold = 0.0;
    std::vector<int> revealed;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A fusion-center stop: alarm time, declared type and restart epoch.
struct AlarmEvent {
    std::int64_t time = 0;
    int declared = 0;
    int epoch = 1;
    bool tied_decision = false;  // several hypotheses reached d this step
};

/// Per-epoch fusion bookkeeping. multi_shot and one_shot count distinct
/// senders per hypothesis (each sender/hypothesis pair at most once per
/// epoch; one_shot additionally accepts only a sender's first report).
/// Simultaneous counts are recomputed fresh from each step's bitvectors.
class FusionState {
public:
    FusionState(const FusionRule& rule, int sensor_count, int hypothesis_count)
        : rule_(rule), K_(sensor_count), Q_(hypothesis_count) {
        if (rule_.kind != RuleKind::genie_centralized) {
            counted_.assign(static_cast<std::size_t>(K_) * Q_, false);
            counts_.assign(static_cast<std::size_t>(Q_), 0);
            sender_fired_.assign(static_cast<std::size_t>(K_), false);
        }
    }

    /// Process one step's messages (honest plus attack) and decide whether
    /// to alarm. For the genie baseline `revealed_llr_sum` must carry
    /// sum_{k revealed} l^k_t(1, 0); all messages are ignored.
    std::optional<AlarmEvent> step(std::span<const ReportMessage> msgs,
                                   std::int64_t t, int epoch,
                                   double revealed_llr_sum = 0.0) {
        switch (rule_.kind) {
            case RuleKind::genie_centralized: {
                genie_.update(revealed_llr_sum);
                if (genie_.value() >= rule_.genie_threshold)
                    return AlarmEvent{t, 1, epoch, false};
                return std::nullopt;
            }
            case RuleKind::d_voting_simultaneous: {
                std::vector<int> votes(static_cast<std::size_t>(Q_), 0);
                for (const auto& m : msgs) {
                    expect_kind(m, ReportMechanism::simultaneous);
                    for (int q = 1; q <= Q_; ++q)
                        if (m.bit(q)) ++votes[static_cast<std::size_t>(q - 1)];
                }
                return decide(votes, t, epoch);
            }
            case RuleKind::multi_shot: {
                for (const auto& m : msgs) {
                    expect_kind(m, ReportMechanism::multi_shot);
                    credit(m.sender, m.hypothesis);
                }
                return decide(counts_, t, epoch);
            }
            case RuleKind::one_shot: {
                for (const auto& m : msgs) {
                    expect_kind(m, ReportMechanism::one_shot);
                    if (sender_fired_[sender_slot(m.sender)]) continue;
                    sender_fired_[sender_slot(m.sender)] = true;
                    credit(m.sender, m.hypothesis);
                }
                return decide(counts_, t, epoch);
            }
        }
        return std::nullopt;
    }

    /// One-shot dead end: every sender in `must_fire` has used its single
    /// report, no hypothesis can reach d even if all remaining senders vote
    /// for the same one.
    bool one_shot_undecidable(std::span<const int> must_fire) const {
        if (rule_.kind != RuleKind::one_shot) return false;
        for (int k : must_fire)
            if (!sender_fired_[sender_slot(k)]) return false;
        int idle = 0;
        for (bool fired : sender_fired_)
            if (!fired) ++idle;
        for (int c : counts_)
            if (c + idle >= rule_.d) return false;
        return true;
    }

    void reset_epoch() {
        std::fill(counted_.begin(), counted_.end(), false);
        std::fill(counts_.begin(), counts_.end(), 0);
        std::fill(sender_fired_.begin(), sender_fired_.end(), false);
        genie_.reset();
    }

    const ScalarCusum& genie_statistic() const { return genie_; }
    int count(int q) const { return counts_.at(static_cast<std::size_t>(q - 1)); }

private:
    void expect_kind(const ReportMessage& m, ReportMechanism want) const {
        if (m.kind != want)
            throw ProtocolError(std::string("rule ") + rule_name(rule_.kind) +
                                " received a " + mechanism_name(m.kind) + " payload");
    }
    std::size_t sender_slot(int sender) const {
        if (sender < 0 || sender >= K_) throw ProtocolError("unknown sender index");
        return static_cast<std::size_t>(sender);
    }
    void credit(int sender, int q) {
        if (q < 1 || q > Q_) throw ProtocolError("report names a hypothesis outside [Q]");
        auto slot = sender_slot(sender) * static_cast<std::size_t>(Q_) +
                    static_cast<std::size_t>(q - 1);
        if (counted_[slot]) return;
        counted_[slot] = true;
        ++counts_[static_cast<std::size_t>(q - 1)];
    }
    std::optional<AlarmEvent> decide(const std::vector<int>& votes, std::int64_t t,
                                     int epoch) const {
        int winner = 0;
        int crossing = 0;
        for (int q = 1; q <= Q_; ++q) {
            if (votes[static_cast<std::size_t>(q - 1)] >= rule_.d) {
                ++crossing;
                if (winner == 0) winner = q;  // smallest index wins on ties
            }
        }
        if (winner == 0) return std::nullopt;
        return AlarmEvent{t, winner, epoch, crossing > 1};
    }

    FusionRule rule_;
    int K_;
    int Q_;
    std::vector<bool> counted_;       // (sender, hypothesis) credited this epoch
    std::vector<int> counts_;         // cumulative counts (multi/one-shot)
    std::vector<bool> sender_fired_;  // one_shot link discipline
    ScalarCusum genie_;
};

/// T^q: first alarm time declaring q, or nullopt (= infinity) if none.
inline std::optional<std::int64_t> stopping_time_for_type(
    std::span<const AlarmEvent> events, int q) {
    for (const auto& e : events)
        if (e.declared == q) return e.time;
    return std::nullopt;
}

}  // namespace bdqcd
