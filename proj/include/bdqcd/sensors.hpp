#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bdqcd/cusum.hpp"
#include "bdqcd/distributions.hpp"
#include "bdqcd/random.hpp"

namespace bdqcd {

enum class ReportMechanism { one_shot, multi_shot, simultaneous };

inline const char* mechanism_name(ReportMechanism m) {
    switch (m) {
        case ReportMechanism::one_shot: return "one_shot";
        case ReportMechanism::multi_shot: return "multi_shot";
        case ReportMechanism::simultaneous: return "simultaneous";
    }
    return "?";
}

/// One local report on the sensor-to-fusion link. one_shot/multi_shot carry
/// a single hypothesis index; simultaneous carries the Q acceptance flags
/// (bit q-1 set iff Y_{t,q} >= h at this sensor this step).
struct ReportMessage {
    int sender = 0;
    ReportMechanism kind = ReportMechanism::one_shot;
    int hypothesis = 0;            // one_shot / multi_shot
    std::uint64_t accept_bits = 0; // simultaneous

    static ReportMessage one_shot(int sender, int q) {
        return {sender, ReportMechanism::one_shot, q, 0};
    }
    static ReportMessage multi_shot(int sender, int q) {
        return {sender, ReportMechanism::multi_shot, q, 0};
    }
    static ReportMessage simultaneous(int sender, std::uint64_t bits) {
        return {sender, ReportMechanism::simultaneous, 0, bits};
    }
    bool bit(int q) const { return (accept_bits >> (q - 1)) & 1u; }
};

/// Sample X_t for an honest sensor: P_0 up to and including the change time,
/// P_{q_true} afterwards. nu = nullopt means the change never happens.
inline double honest_observation(const HypothesisSet& hs, std::int64_t t,
                                 std::optional<std::int64_t> nu, int q_true,
                                 RandomStream& rng) {
    if (t < 1) throw std::invalid_argument("time indices start at 1");
    const bool pre_change = !nu.has_value() || t <= *nu;
    return hs.density(pre_change ? 0 : q_true).sample(rng);
}

/// Local detector state for one sensor.
///
/// one_shot: original matrix CUSUM hard decision. At the first step where a
/// row minimum reaches h the sensor reports argmax_q Y_{t,q} (exact ties
/// broken randomly) and then stays silent for the rest of the epoch.
///
/// multi_shot: soft matrix CUSUM. Hypotheses newly acceptable this step are
/// queued in descending Y_{t,q} order (equal values shuffled via the
/// sensor's stream); exactly one queued hypothesis is reported per step;
/// each hypothesis is reported at most once per epoch and the pending queue
/// drains first-come-first-served, later arrivals appending behind earlier
/// ones.
///
/// simultaneous: the full Q-bit acceptance vector is transmitted every step.
class SensorState {
public:
    SensorState(int id, ReportMechanism mechanism, CusumMatrix matrix, double h)
        : id_(id),
          mechanism_(mechanism),
          matrix_(std::move(matrix)),
          h_(h),
          reported_(static_cast<std::size_t>(matrix_.hypothesis_count()) + 1, false) {
        if (!(h_ > 0.0)) throw std::invalid_argument("local threshold must be positive");
    }

    int id() const { return id_; }
    ReportMechanism mechanism() const { return mechanism_; }
    const CusumMatrix& matrix() const { return matrix_; }
    double threshold() const { return h_; }

    std::optional<ReportMessage> step(const HypothesisSet& hs, double x,
                                      RandomStream& rng) {
        matrix_.update(hs, x);
        const RowMinSnapshot snap = matrix_.row_min();
        switch (mechanism_) {
            case ReportMechanism::simultaneous: {
                std::uint64_t bits = 0;
                for (int q = 1; q <= matrix_.hypothesis_count(); ++q)
                    if (snap.value(q) >= h_) bits |= (std::uint64_t{1} << (q - 1));
                return ReportMessage::simultaneous(id_, bits);
            }
            case ReportMechanism::one_shot: {
                if (fired_) return std::nullopt;
                int best = 0;
                double best_value = -1.0;
                int equal_count = 0;
                for (int q = 1; q <= matrix_.hypothesis_count(); ++q) {
                    const double v = snap.value(q);
                    if (v > best_value) {
                        best_value = v;
                        best = q;
                        equal_count = 1;
                    } else if (v == best_value) {
                        // reservoir pick among exact ties
                        ++equal_count;
                        if (rng.uniform() < 1.0 / equal_count) best = q;
                    }
                }
                if (best_value < h_) return std::nullopt;
                fired_ = true;
                return ReportMessage::one_shot(id_, best);
            }
            case ReportMechanism::multi_shot: {
                enqueue_new_acceptances(snap, rng);
                if (tie_queue_.empty()) return std::nullopt;
                const int q = tie_queue_.front();
                tie_queue_.pop_front();
                reported_[static_cast<std::size_t>(q)] = true;
                return ReportMessage::multi_shot(id_, q);
            }
        }
        return std::nullopt;
    }

    std::size_t queue_length() const { return tie_queue_.size(); }
    bool has_reported(int q) const { return reported_.at(static_cast<std::size_t>(q)); }
    bool has_fired() const { return fired_; }

    /// Fusion restart: back to the all-zero matrix and a clean slate.
    void reset_epoch() {
        matrix_.reset();
        std::fill(reported_.begin(), reported_.end(), false);
        tie_queue_.clear();
        fired_ = false;
    }

private:
    void enqueue_new_acceptances(const RowMinSnapshot& snap, RandomStream& rng) {
        std::vector<std::pair<double, int>> fresh;
        for (int q = 1; q <= matrix_.hypothesis_count(); ++q) {
            if (snap.value(q) < h_) continue;
            if (reported_[static_cast<std::size_t>(q)]) continue;
            if (std::find(tie_queue_.begin(), tie_queue_.end(), q) != tie_queue_.end())
                continue;
            fresh.emplace_back(snap.value(q), q);
        }
        if (fresh.empty()) return;
        // Largest Y first; exact ties shuffled by the sensor's stream.
        for (std::size_t i = fresh.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform() * (i + 1));
            std::swap(fresh[i], fresh[std::min(j, i)]);
        }
        std::stable_sort(fresh.begin(), fresh.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [value, q] : fresh) tie_queue_.push_back(q);
    }

    int id_;
    ReportMechanism mechanism_;
    CusumMatrix matrix_;
    double h_;
    std::vector<bool> reported_;
    std::deque<int> tie_queue_;
    bool fired_ = false;
};

}  // namespace bdqcd
