#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bdqcd/distributions.hpp"

namespace bdqcd {

/// Page's CUSUM statistic Y_t = (Y_{t-1} + l_t)^+ with Y_0 = 0.
class ScalarCusum {
public:
    double value() const { return stat_; }
    double update(double llr) {
        stat_ = std::max(0.0, stat_ + llr);
        return stat_;
    }
    void reset() { stat_ = 0.0; }

private:
    double stat_ = 0.0;
};

enum class MatrixMode { full, reduced };

/// Per-row minima Y_{t,q}, q in 1..Q.
struct RowMinSnapshot {
    std::vector<double> values;  // values[q-1] = Y_{t,q}
    double value(int q) const { return values.at(static_cast<std::size_t>(q) - 1); }
};

/// Matrix CUSUM: Y_t(q, j) = (Y_{t-1}(q, j) + l_t(q, j))^+ over q in 1..Q,
/// j in {0..Q} \ {q}, started from the all-zero matrix.
///
/// In reduced mode only the entries (q, j*_q) are maintained; the rest of
/// each row is conceptually +infinity, so the row minimum is the single
/// maintained entry.
class CusumMatrix {
public:
    CusumMatrix(int hypothesis_count, MatrixMode mode,
                std::vector<int> j_star = {})
        : Q_(hypothesis_count), mode_(mode), j_star_(std::move(j_star)) {
        if (Q_ < 1) throw std::invalid_argument("matrix CUSUM needs Q >= 1");
        if (mode_ == MatrixMode::reduced) {
            if (static_cast<int>(j_star_.size()) != Q_)
                throw std::invalid_argument("reduced mode needs one j*_q per row");
            entries_.assign(static_cast<std::size_t>(Q_), 0.0);
        } else {
            entries_.assign(static_cast<std::size_t>(Q_) * (Q_ + 1), 0.0);
        }
    }

    static CusumMatrix full(int hypothesis_count) {
        return CusumMatrix(hypothesis_count, MatrixMode::full);
    }
    static CusumMatrix reduced(const ClosestAlternatives& alts) {
        std::vector<int> js;
        js.reserve(alts.per_hypothesis.size());
        for (const auto& e : alts.per_hypothesis) js.push_back(e.minimizer);
        const int count = static_cast<int>(js.size());
        return CusumMatrix(count, MatrixMode::reduced, std::move(js));
    }

    int hypothesis_count() const { return Q_; }
    MatrixMode mode() const { return mode_; }

    void update(const HypothesisSet& hs, double x) {
        if (hs.hypothesis_count() != Q_)
            throw std::invalid_argument("hypothesis set does not match matrix shape");
        if (mode_ == MatrixMode::reduced) {
            for (int q = 1; q <= Q_; ++q) {
                double& y = entries_[static_cast<std::size_t>(q - 1)];
                y = std::max(0.0, y + hs.log_likelihood_ratio(q, j_star_[static_cast<std::size_t>(q - 1)], x));
            }
            return;
        }
        for (int q = 1; q <= Q_; ++q) {
            for (int j = 0; j <= Q_; ++j) {
                if (j == q) continue;
                double& y = entries_[slot(q, j)];
                y = std::max(0.0, y + hs.log_likelihood_ratio(q, j, x));
            }
        }
    }

    /// Y_t(q, j); in reduced mode non-maintained entries are +infinity.
    double entry(int q, int j) const {
        check_indices(q, j);
        if (mode_ == MatrixMode::reduced) {
            if (j == j_star_[static_cast<std::size_t>(q - 1)])
                return entries_[static_cast<std::size_t>(q - 1)];
            return std::numeric_limits<double>::infinity();
        }
        return entries_[slot(q, j)];
    }

    RowMinSnapshot row_min() const {
        RowMinSnapshot snap;
        snap.values.resize(static_cast<std::size_t>(Q_));
        if (mode_ == MatrixMode::reduced) {
            snap.values = entries_;
            return snap;
        }
        for (int q = 1; q <= Q_; ++q) {
            double m = std::numeric_limits<double>::infinity();
            for (int j = 0; j <= Q_; ++j) {
                if (j == q) continue;
                m = std::min(m, entries_[slot(q, j)]);
            }
            snap.values[static_cast<std::size_t>(q - 1)] = m;
        }
        return snap;
    }

    void reset() { std::fill(entries_.begin(), entries_.end(), 0.0); }

private:
    void check_indices(int q, int j) const {
        if (q < 1 || q > Q_ || j < 0 || j > Q_)
            throw std::invalid_argument("matrix index out of range");
        if (q == j) throw std::invalid_argument("entry (q,q) does not exist");
    }
    std::size_t slot(int q, int j) const {
        return static_cast<std::size_t>(q - 1) * (Q_ + 1) + static_cast<std::size_t>(j);
    }

    int Q_;
    MatrixMode mode_;
    std::vector<int> j_star_;
    std::vector<double> entries_;
};

/// Indices q with Y_{t,q} >= h, i.e. the hypotheses acceptable at this step.
/// May be empty or contain several entries; ties are the caller's business.
inline std::vector<int> acceptance_time_check(const RowMinSnapshot& snapshot, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("threshold must be positive");
    std::vector<int> accepted;
    for (std::size_t i = 0; i < snapshot.values.size(); ++i)
        if (snapshot.values[i] >= h) accepted.push_back(static_cast<int>(i) + 1);
    return accepted;
}

}  // namespace bdqcd
