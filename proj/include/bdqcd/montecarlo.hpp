#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bdqcd/asymptotics.hpp"
#include "bdqcd/attacks.hpp"
#include "bdqcd/distributions.hpp"
#include "bdqcd/fusion.hpp"
#include "bdqcd/sensors.hpp"

namespace bdqcd {

/// Full experiment description. K = honest + compromised sensors observe the
/// same change at `change_time` (nullopt = never); the rule, attack and
/// thresholds drive one Monte Carlo estimate.
struct Scenario {
    int honest = 1;       // |N|
    int compromised = 0;  // M
    HypothesisSet hypotheses;
    std::optional<std::int64_t> change_time = 0;  // nu; nullopt = infinity
    int true_hypothesis = 1;                      // ignored when nu = infinity
    AttackStrategy attack;
    FusionRule rule;
    double local_threshold = 1.0;  // h shared by all local detectors
    std::int64_t horizon = 100000;
    std::uint64_t master_seed = 1;
    std::int64_t trials = 20000;
    bool single_stop = true;
    MatrixMode matrix_mode = MatrixMode::full;
    int workers = 0;  // 0 = hardware concurrency

    explicit Scenario(HypothesisSet hs) : hypotheses(std::move(hs)) {}

    int total_sensors() const { return honest + compromised; }
    int hypothesis_count() const { return hypotheses.hypothesis_count(); }
    bool change_never_happens() const { return !change_time.has_value(); }
};

/// Every violated invariant, by name; empty means the scenario is runnable.
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
    std::vector<std::string> errors;
    const int Q = sc.hypothesis_count();
    if (sc.honest <= sc.compromised)
        errors.push_back("honest must exceed compromised (|N| > M)");
    if (sc.honest < 1) errors.push_back("need at least one honest sensor");
    if (sc.compromised < 0) errors.push_back("compromised count must be >= 0");
    if (Q > 62) errors.push_back("at most 62 post-change hypotheses (bitvector width)");
    if (!(sc.local_threshold > 0.0)) errors.push_back("local threshold h must be > 0");
    if (sc.horizon < 1) errors.push_back("horizon must be >= 1");
    if (sc.trials < 1) errors.push_back("trials must be >= 1");
    if (sc.change_time.has_value() && *sc.change_time < 0)
        errors.push_back("change time must be a nonnegative integer or infinity");
    if (!sc.change_never_happens() && (sc.true_hypothesis < 1 || sc.true_hypothesis > Q))
        errors.push_back("true hypothesis outside [Q]");
    if (sc.rule.kind != RuleKind::genie_centralized) {
        if (!(sc.rule.d > sc.compromised && sc.rule.d <= sc.honest))
            errors.push_back("vote count d must satisfy M < d <= |N|");
    } else {
        if (Q != 1)
            errors.push_back("the genie centralized baseline is a binary (Q = 1) detector");
        if (!(sc.rule.genie_threshold > 0.0))
            errors.push_back("genie threshold must be > 0");
        const int revealed = static_cast<int>(sc.rule.revealed.size());
        if (revealed < 1 || revealed > sc.honest)
            errors.push_back("genie must reveal between 1 and |N| honest sensors");
    }
    if (sc.attack.kind != AttackKind::absent &&
        static_cast<int>(sc.attack.compromised.size()) > sc.compromised)
        errors.push_back("attack names more sensors than the compromised budget M");
    if (sc.attack.kind == AttackKind::always_alarm && sc.attack.target.has_value() &&
        (*sc.attack.target < 1 || *sc.attack.target > Q))
        errors.push_back("always_alarm target outside [Q]");
    try {
        sc.hypotheses.validate_moments();
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    return errors;
}

/// Fill derived defaults: compromised set = the last M sensor indices, the
/// genie's revealed set = the first honest sensors, and the always_alarm
/// target when left unset.
inline Scenario normalize_scenario(Scenario sc) {
    if (sc.attack.compromised.empty() && sc.compromised > 0) {
        for (int k = sc.honest; k < sc.total_sensors(); ++k)
            sc.attack.compromised.push_back(k);
    }
    if (sc.rule.kind == RuleKind::genie_centralized && sc.rule.revealed.empty()) {
        const int reveal = sc.honest - sc.compromised;
        for (int k = 0; k < reveal; ++k) sc.rule.revealed.push_back(k);
    }
    if (sc.attack.kind == AttackKind::always_alarm && !sc.attack.target.has_value()) {
        const auto alts = sc.hypotheses.closest_alternatives();
        sc.attack.target = default_always_alarm_target(
            sc.hypotheses, alts, sc.change_never_happens(), sc.true_hypothesis);
    }
    return sc;
}

inline void require_valid(const Scenario& sc) {
    auto errors = validate_scenario(sc);
    if (errors.empty()) return;
    std::string joined = "invalid scenario:";
    for (const auto& e : errors) joined += "\n  - " + e;
    throw std::invalid_argument(joined);
}

struct TrialOutcome {
    std::optional<std::int64_t> first_alarm;
    std::optional<int> declared;
    std::vector<std::optional<std::int64_t>> per_type;  // per_type[q-1] = T^q
    bool undecidable = false;

    bool censored() const { return !first_alarm.has_value(); }
};

namespace detail {

inline std::uint64_t trial_seed(std::uint64_t master, std::int64_t trial_index) {
    return mix_seed(master, static_cast<std::uint64_t>(trial_index) + 1);
}

inline std::uint64_t stream_seed(std::uint64_t trial, std::uint64_t tag, int sensor) {
    return mix_seed(trial, mix_seed(tag, static_cast<std::uint64_t>(sensor) + 1));
}

inline constexpr std::uint64_t kFakeTieTag = 0x7a6E71E5;

}  // namespace detail

namespace detail {
struct NeverStop {
    bool operator()(const AlarmEvent&) const { return false; }
};
}  // namespace detail

/// Run one trial's epochal loop: honest observations, attack messages and a
/// fusion step per time index, restarting all local and fusion state after
/// each alarm unless single_stop is set. Deterministic in
/// (master_seed, trial_index). `stop_when` lets estimators cut the loop as
/// soon as the alarm they measure has been recorded; it never changes which
/// alarms occur, only how long the trial keeps simulating afterwards.
template <typename StopWhen = detail::NeverStop>
std::vector<AlarmEvent> run_epochal(const Scenario& sc, std::int64_t trial_index,
                                    bool* undecidable_out = nullptr,
                                    StopWhen stop_when = {}) {
    const HypothesisSet& hs = sc.hypotheses;
    const int Q = sc.hypothesis_count();
    const int K = sc.total_sensors();
    const ReportMechanism mechanism = mechanism_for_rule(sc.rule.kind);
    const bool genie = sc.rule.kind == RuleKind::genie_centralized;
    const std::uint64_t tseed = detail::trial_seed(sc.master_seed, trial_index);

    std::vector<bool> is_compromised(static_cast<std::size_t>(K), false);
    for (int k : sc.attack.compromised) is_compromised[static_cast<std::size_t>(k)] = true;

    const auto alts = hs.closest_alternatives();
    std::vector<int> honest_ids;
    std::vector<SensorState> sensors;
    std::vector<RandomStream> obs_streams;
    std::vector<RandomStream> tie_streams;
    for (int k = 0; k < K; ++k) {
        if (is_compromised[static_cast<std::size_t>(k)]) continue;
        honest_ids.push_back(k);
        CusumMatrix matrix = sc.matrix_mode == MatrixMode::reduced
                                 ? CusumMatrix::reduced(alts)
                                 : CusumMatrix::full(Q);
        sensors.emplace_back(k, mechanism, std::move(matrix), sc.local_threshold);
        obs_streams.emplace_back(detail::stream_seed(tseed, stream_tag::observation, k));
        tie_streams.emplace_back(detail::stream_seed(tseed, stream_tag::tie_break, k));
    }

    std::vector<RandomStream> fake_obs, fake_tie;
    for (int k : sc.attack.compromised) {
        fake_obs.emplace_back(detail::stream_seed(tseed, stream_tag::fake_observation, k));
        fake_tie.emplace_back(detail::stream_seed(tseed, detail::kFakeTieTag, k));
    }
    AttackState attack(sc.attack, hs, mechanism, sc.local_threshold,
                       std::move(fake_obs), std::move(fake_tie));

    std::vector<bool> revealed(static_cast<std::size_t>(K), false);
    for (int k : sc.rule.revealed) revealed[static_cast<std::size_t>(k)] = true;

    FusionState fusion(sc.rule, K, Q);
    std::vector<AlarmEvent> events;
    std::vector<ReportMessage> msgs;
    int epoch = 1;
    if (undecidable_out) *undecidable_out = false;

    for (std::int64_t t = 1; t <= sc.horizon; ++t) {
        msgs.clear();
        double revealed_llr_sum = 0.0;
        for (std::size_t i = 0; i < sensors.size(); ++i) {
            const int k = honest_ids[i];
            const double x = honest_observation(hs, t, sc.change_time,
                                                sc.true_hypothesis, obs_streams[i]);
            if (genie) {
                if (revealed[static_cast<std::size_t>(k)])
                    revealed_llr_sum += hs.log_likelihood_ratio(1, 0, x);
                continue;
            }
            if (auto msg = sensors[i].step(hs, x, tie_streams[i])) msgs.push_back(*msg);
        }
        for (auto& m : attack.step(t, sc.change_time, sc.true_hypothesis))
            msgs.push_back(m);

        if (auto alarm = fusion.step(msgs, t, epoch, revealed_llr_sum)) {
            events.push_back(*alarm);
            if (sc.single_stop || stop_when(*alarm)) break;
            for (auto& s : sensors) s.reset_epoch();
            attack.reset_epoch();
            fusion.reset_epoch();
            ++epoch;
            continue;
        }
        if (sc.rule.kind == RuleKind::one_shot &&
            fusion.one_shot_undecidable(honest_ids)) {
            if (undecidable_out) *undecidable_out = true;
            break;
        }
    }
    return events;
}

inline TrialOutcome run_trial(const Scenario& sc, std::int64_t trial_index) {
    TrialOutcome out;
    out.per_type.assign(static_cast<std::size_t>(sc.hypothesis_count()), std::nullopt);
    bool undecidable = false;
    const auto events = run_epochal(sc, trial_index, &undecidable);
    out.undecidable = undecidable;
    if (!events.empty()) {
        out.first_alarm = events.front().time;
        out.declared = events.front().declared;
    }
    for (int q = 1; q <= sc.hypothesis_count(); ++q)
        out.per_type[static_cast<std::size_t>(q - 1)] = stopping_time_for_type(events, q);
    return out;
}

/// Monte Carlo mean with 95% normal-approximation halfwidth. The censoring
/// convention is estimator-specific and documented there.
struct MetricsEstimate {
    double mean = 0.0;
    double ci_halfwidth = 0.0;
    double censor_fraction = 0.0;
    std::int64_t n = 0;
    double undecidable_fraction = 0.0;
};

namespace detail {

template <typename PerTrial>
void parallel_for_trials(std::int64_t trials, int workers, PerTrial&& body) {
    int n_workers = workers > 0 ? workers
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (n_workers < 1) n_workers = 1;
    if (n_workers == 1 || trials < 2) {
        for (std::int64_t i = 0; i < trials; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto work = [&] {
        for (std::int64_t i = next.fetch_add(1); i < trials; i = next.fetch_add(1))
            body(i);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers - 1; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
}

inline MetricsEstimate summarize(const std::vector<double>& values,
                                 std::int64_t censored, std::int64_t undecidable,
                                 std::int64_t total) {
    MetricsEstimate est;
    est.n = static_cast<std::int64_t>(values.size());
    est.censor_fraction = total > 0 ? static_cast<double>(censored) / total : 0.0;
    est.undecidable_fraction =
        total > 0 ? static_cast<double>(undecidable) / total : 0.0;
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    if (values.size() > 1) {
        const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        est.ci_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    }
    return est;
}

}  // namespace detail

/// Run all trials of a scenario; outcomes are indexed by trial so results do
/// not depend on the worker count.
inline std::vector<TrialOutcome> run_trials(const Scenario& raw) {
    Scenario sc = normalize_scenario(raw);
    require_valid(sc);
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(sc.trials));
    detail::parallel_for_trials(sc.trials, sc.workers, [&](std::int64_t i) {
        outcomes[static_cast<std::size_t>(i)] = run_trial(sc, i);
    });
    return outcomes;
}

/// Worst-case detection delay estimate. Requires a finite change time; with
/// nu = 0 (the worst case for the proposed rules under their worst attack)
/// the delay of a trial is its first alarm time. For nu > 0 the delay is
/// measured from the first alarm after nu, which needs the epochal restart
/// mode. Censored trials (no qualifying alarm before the horizon) are
/// EXCLUDED from the mean, which therefore underestimates when
/// censor_fraction > 0; callers must treat a nonzero censor_fraction as a
/// lower-estimate flag.
inline MetricsEstimate estimate_delay(const Scenario& raw) {
    Scenario sc = normalize_scenario(raw);
    require_valid(sc);
    if (sc.change_never_happens())
        throw std::invalid_argument("delay estimation needs a finite change time");
    if (*sc.change_time > 0 && sc.single_stop)
        throw std::invalid_argument("delay at nu > 0 needs the epochal restart mode");
    const std::int64_t nu = *sc.change_time;

    std::vector<std::optional<double>> delays(static_cast<std::size_t>(sc.trials));
    detail::parallel_for_trials(sc.trials, sc.workers, [&](std::int64_t i) {
        const auto events = run_epochal(
            sc, i, nullptr, [nu](const AlarmEvent& e) { return e.time > nu; });
        for (const auto& e : events) {
            if (e.time > nu) {
                delays[static_cast<std::size_t>(i)] = static_cast<double>(e.time - nu);
                break;
            }
        }
    });

    std::vector<double> kept;
    kept.reserve(delays.size());
    std::int64_t censored = 0;
    for (const auto& d : delays) {
        if (d.has_value())
            kept.push_back(*d);
        else
            ++censored;
    }
    if (kept.empty())
        throw std::runtime_error("all trials censored: no alarm before the horizon");
    return detail::summarize(kept, censored, 0, sc.trials);
}

/// Mean time to a false alarm (nu = infinity) or a false isolation
/// (nu = 0 with an isolation target != true hypothesis, measured through
/// T^target over the epochal alarm sequence). Censored trials contribute the
/// horizon, so the reported mean is a certified lower bound on the true
/// mean.
inline MetricsEstimate estimate_false_metric(
    const Scenario& raw, std::optional<int> isolation_target = std::nullopt) {
    Scenario sc = normalize_scenario(raw);
    require_valid(sc);
    if (!sc.change_never_happens()) {
        if (!isolation_target.has_value())
            throw std::invalid_argument(
                "false isolation needs an isolation target (or set nu = infinity for false alarm)");
        if (*sc.change_time != 0)
            throw std::invalid_argument("false isolation is measured at nu = 0");
        if (*isolation_target == sc.true_hypothesis || *isolation_target < 1 ||
            *isolation_target > sc.hypothesis_count())
            throw std::invalid_argument("isolation target must name a wrong hypothesis in [Q]");
    }

    std::vector<double> values(static_cast<std::size_t>(sc.trials));
    std::vector<unsigned char> censored_flags(static_cast<std::size_t>(sc.trials), 0);
    std::vector<unsigned char> undecidable_flags(static_cast<std::size_t>(sc.trials), 0);
    detail::parallel_for_trials(sc.trials, sc.workers, [&](std::int64_t i) {
        bool undecidable = false;
        // the trial may stop as soon as the measured stopping time is known
        const auto events = run_epochal(
            sc, i, &undecidable, [&](const AlarmEvent& e) {
                return sc.change_never_happens() || e.declared == *isolation_target;
            });
        std::optional<std::int64_t> stop =
            sc.change_never_happens()
                ? (events.empty() ? std::nullopt
                                  : std::optional<std::int64_t>(events.front().time))
                : stopping_time_for_type(events, *isolation_target);
        if (stop.has_value()) {
            values[static_cast<std::size_t>(i)] = static_cast<double>(*stop);
        } else {
            values[static_cast<std::size_t>(i)] = static_cast<double>(sc.horizon);
            censored_flags[static_cast<std::size_t>(i)] = 1;
        }
        undecidable_flags[static_cast<std::size_t>(i)] = undecidable ? 1 : 0;
    });

    std::int64_t censored = 0, undecidable = 0;
    for (auto f : censored_flags) censored += f;
    for (auto f : undecidable_flags) undecidable += f;
    return detail::summarize(values, censored, undecidable, sc.trials);
}

inline double leader_cost_empirical(const MetricsEstimate& delay, double gamma,
                                    const MetricsEstimate& false_metric) {
    return leader_cost_empirical(delay.mean, gamma, false_metric.mean);
}

enum class SweepAxis { threshold, gamma, votes, attack };
enum class MetricKind { delay, false_alarm, false_isolation };

struct SweepRequest {
    SweepAxis axis = SweepAxis::threshold;
    MetricKind metric = MetricKind::delay;
    std::vector<double> values;           // threshold / gamma / votes axes
    std::vector<AttackKind> attacks;      // attack axis
    std::optional<int> isolation_target;  // false_isolation metric
};

struct SweepRow {
    std::string axis_label;
    double axis_value = 0.0;
    std::string metric_name;
    MetricsEstimate estimate;
    std::optional<double> theory;
    std::optional<double> ratio;
};

/// One estimate per axis value. Gamma-axis sweeps derive h through the
/// calibration formulas of the rule in play; theory columns are filled where
/// the asymptotic laws define them.
inline std::vector<SweepRow> run_sweep(const Scenario& base, const SweepRequest& req) {
    if (req.axis == SweepAxis::attack ? req.attacks.empty() : req.values.empty())
        throw std::invalid_argument("sweep needs a nonempty value list");
    if (req.metric == MetricKind::false_isolation && !req.isolation_target.has_value())
        throw std::invalid_argument("false_isolation sweeps need an isolation target");

    const auto alts = base.hypotheses.closest_alternatives();
    std::vector<SweepRow> rows;
    const std::size_t count = req.axis == SweepAxis::attack ? req.attacks.size()
                                                            : req.values.size();
    for (std::size_t i = 0; i < count; ++i) {
        Scenario sc = base;
        SweepRow row;
        switch (req.axis) {
            case SweepAxis::threshold:
                row.axis_label = "h";
                row.axis_value = req.values[i];
                sc.local_threshold = req.values[i];
                break;
            case SweepAxis::gamma: {
                row.axis_label = "gamma";
                row.axis_value = req.values[i];
                const double gamma = req.values[i];
                if (sc.rule.kind == RuleKind::d_voting_simultaneous)
                    sc.local_threshold = calibrate_h_simultaneous(
                        sc.honest, sc.compromised, sc.rule.d, gamma);
                else if (sc.rule.kind == RuleKind::multi_shot)
                    sc.local_threshold = calibrate_h_multishot(
                        sc.honest, sc.compromised, sc.rule.d, gamma);
                else if (sc.rule.kind == RuleKind::genie_centralized)
                    sc.rule.genie_threshold = std::log(gamma);
                else
                    throw std::invalid_argument(
                        "no calibration formula exists for the one-shot rule");
                break;
            }
            case SweepAxis::votes:
                row.axis_label = "d";
                row.axis_value = req.values[i];
                sc.rule.d = static_cast<int>(req.values[i]);
                break;
            case SweepAxis::attack:
                row.axis_label = "attack";
                row.axis_value = static_cast<double>(i);
                sc.attack.kind = req.attacks[i];
                sc.attack.target.reset();
                break;
        }

        switch (req.metric) {
            case MetricKind::delay: {
                row.metric_name = "delay";
                row.estimate = estimate_delay(sc);
                const int q = sc.change_never_happens() ? 1 : sc.true_hypothesis;
                const auto& entry = alts.row(q);
                const double sigma2 =
                    llr_second_moment(sc.hypotheses, q, entry.minimizer);
                if (req.axis == SweepAxis::gamma &&
                    sc.rule.kind != RuleKind::one_shot) {
                    const double slope =
                        sc.rule.kind == RuleKind::genie_centralized
                            ? converse_slope(sc.honest, sc.compromised, alts.i_star)
                            : achievability_slope(sc.rule.kind, sc.honest,
                                                  sc.compromised, sc.rule.d,
                                                  alts.i_star);
                    row.theory = std::log(row.axis_value) * slope;
                } else if (sc.rule.kind == RuleKind::d_voting_simultaneous ||
                           sc.rule.kind == RuleKind::multi_shot) {
                    row.theory = delay_expansion(sc.local_threshold, entry.divergence,
                                                 sigma2, sc.honest, sc.rule.d);
                }
                break;
            }
            case MetricKind::false_alarm: {
                row.metric_name = "false_alarm";
                Scenario fa = sc;
                fa.change_time.reset();
                row.estimate = estimate_false_metric(fa);
                if (sc.rule.kind == RuleKind::d_voting_simultaneous)
                    row.theory = false_bound_simultaneous(sc.honest, sc.compromised,
                                                          sc.rule.d, sc.local_threshold);
                else if (sc.rule.kind == RuleKind::multi_shot)
                    row.theory = false_bound_multishot(sc.honest, sc.compromised,
                                                       sc.rule.d, sc.local_threshold);
                break;
            }
            case MetricKind::false_isolation: {
                row.metric_name = "false_isolation";
                Scenario fi = sc;
                fi.change_time = 0;
                row.estimate = estimate_false_metric(fi, req.isolation_target);
                break;
            }
        }
        if (row.theory.has_value() && *row.theory != 0.0)
            row.ratio = row.estimate.mean / *row.theory;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace bdqcd
