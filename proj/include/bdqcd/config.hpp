#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdqcd/asymptotics.hpp"
#include "bdqcd/montecarlo.hpp"

namespace bdqcd {

/// Parse/validation failure carrying every violated invariant.
struct ConfigError : std::runtime_error {
    std::vector<std::string> problems;
    explicit ConfigError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), problems(std::move(issues)) {}
    static std::string join(const std::vector<std::string>& issues) {
        std::string s = "invalid configuration:";
        for (const auto& p : issues) s += "\n  - " + p;
        return s;
    }
};

struct OutputOptions {
    std::string csv_path;
    int precision = 9;
};

struct ExperimentConfig {
    Scenario scenario;
    std::optional<SweepRequest> sweep;
    OutputOptions output;
    std::string fingerprint;
    nlohmann::json canonical;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

/// Stable digest of the canonicalized (key-sorted, compact) config document.
inline std::string config_fingerprint(const nlohmann::json& canonical) {
    return detail::hex64(detail::fnv1a64(canonical.dump()));
}

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(const nlohmann::json& root) : root_(root) {}

    ExperimentConfig parse() {
        if (!root_.is_object()) fail("top level must be a JSON object");
        const auto& sc_json = expect_object(root_, "scenario");

        auto densities = parse_densities(sc_json);
        ExperimentConfig cfg{Scenario(HypothesisSet(std::move(densities))),
                             std::nullopt,
                             OutputOptions{},
                             "",
                             nlohmann::json::object()};
        Scenario& sc = cfg.scenario;

        const auto& sensors = expect_object(sc_json, "sensors");
        sc.honest = get_int(sensors, "honest");
        sc.compromised = get_int_or(sensors, "compromised", 0);

        parse_change_time(sc_json, sc);
        sc.true_hypothesis = get_int_or(sc_json, "true_hypothesis", 1);
        parse_rule(sc_json, sc);
        parse_attack(sc_json, sc);
        sc.local_threshold = get_double_or(sc_json, "threshold", 0.0);
        // false-alarm runs wait for rare events; give them a longer default
        sc.horizon = get_int64_or(sc_json, "horizon",
                                  sc.change_never_happens() ? 1000000 : 100000);
        sc.trials = get_int64_or(sc_json, "trials", 20000);
        if (!sc_json.contains("master_seed"))
            problems_.push_back("scenario.master_seed is required for reproducibility");
        else
            sc.master_seed = sc_json["master_seed"].get<std::uint64_t>();
        sc.single_stop = get_bool_or(sc_json, "single_stop", true);
        sc.workers = get_int_or(sc_json, "workers", 0);
        const std::string mode = get_string_or(sc_json, "matrix_mode", "full");
        if (mode == "full")
            sc.matrix_mode = MatrixMode::full;
        else if (mode == "reduced")
            sc.matrix_mode = MatrixMode::reduced;
        else
            problems_.push_back("scenario.matrix_mode must be 'full' or 'reduced'");

        if (root_.contains("sweep")) cfg.sweep = parse_sweep(expect_object(root_, "sweep"));
        if (root_.contains("output")) {
            const auto& out = expect_object(root_, "output");
            cfg.output.csv_path = get_string_or(out, "csv", "");
            cfg.output.precision = get_int_or(out, "precision", 9);
            if (cfg.output.precision < 1 || cfg.output.precision > 17)
                problems_.push_back("output.precision must lie in [1, 17]");
        }

        if (problems_.empty()) {
            // Defaults are resolved before the semantic validation pass so
            // every violated invariant is reported by name.
            cfg.scenario = normalize_scenario(cfg.scenario);
            auto semantic = validate_scenario(cfg.scenario);
            problems_.insert(problems_.end(), semantic.begin(), semantic.end());
            if (cfg.sweep) validate_sweep(*cfg.sweep, cfg.scenario);
        }
        if (!problems_.empty()) throw ConfigError(problems_);

        cfg.canonical = root_;
        cfg.fingerprint = config_fingerprint(cfg.canonical);
        return cfg;
    }

private:
    [[noreturn]] void fail(const std::string& msg) { throw ConfigError({msg}); }

    const nlohmann::json& expect_object(const nlohmann::json& parent, const char* key) {
        if (!parent.contains(key) || !parent[key].is_object())
            fail(std::string(key) + " block missing or not an object");
        return parent[key];
    }

    int get_int(const nlohmann::json& o, const char* key) {
        if (!o.contains(key) || !o[key].is_number_integer()) {
            problems_.push_back(std::string(key) + " must be an integer");
            return 0;
        }
        return o[key].get<int>();
    }
    int get_int_or(const nlohmann::json& o, const char* key, int dflt) {
        return o.contains(key) ? get_int(o, key) : dflt;
    }
    std::int64_t get_int64_or(const nlohmann::json& o, const char* key, std::int64_t dflt) {
        if (!o.contains(key)) return dflt;
        if (!o[key].is_number_integer()) {
            problems_.push_back(std::string(key) + " must be an integer");
            return dflt;
        }
        return o[key].get<std::int64_t>();
    }
    double get_double_or(const nlohmann::json& o, const char* key, double dflt) {
        if (!o.contains(key)) return dflt;
        if (!o[key].is_number()) {
            problems_.push_back(std::string(key) + " must be a number");
            return dflt;
        }
        return o[key].get<double>();
    }
    bool get_bool_or(const nlohmann::json& o, const char* key, bool dflt) {
        if (!o.contains(key)) return dflt;
        if (!o[key].is_boolean()) {
            problems_.push_back(std::string(key) + " must be a boolean");
            return dflt;
        }
        return o[key].get<bool>();
    }
    std::string get_string_or(const nlohmann::json& o, const char* key,
                              const std::string& dflt) {
        if (!o.contains(key)) return dflt;
        if (!o[key].is_string()) {
            problems_.push_back(std::string(key) + " must be a string");
            return dflt;
        }
        return o[key].get<std::string>();
    }

    std::vector<DensityModel> parse_densities(const nlohmann::json& sc_json) {
        const auto& hyp = expect_object(sc_json, "hypotheses");
        if (!hyp.contains("densities") || !hyp["densities"].is_array() ||
            hyp["densities"].size() < 2)
            fail("hypotheses.densities must list the pre-change density and at least one post-change density");
        std::vector<DensityModel> out;
        int index = 0;
        for (const auto& d : hyp["densities"]) {
            try {
                out.push_back(parse_density(d));
            } catch (const std::exception& e) {
                fail("density #" + std::to_string(index) + ": " + e.what());
            }
            ++index;
        }
        return out;
    }

    DensityModel parse_density(const nlohmann::json& d) {
        if (!d.is_object() || !d.contains("family") || !d["family"].is_string())
            throw std::invalid_argument("each density needs a 'family' string");
        const std::string family = d["family"].get<std::string>();
        if (family == "gaussian")
            return DensityModel::gaussian(d.at("mean").get<double>(),
                                          d.at("variance").get<double>());
        if (family == "bernoulli")
            return DensityModel::bernoulli(d.at("p").get<double>());
        if (family == "exponential")
            return DensityModel::exponential(d.at("rate").get<double>());
        throw std::invalid_argument("unknown family '" + family +
                                    "' (valid: gaussian, bernoulli, exponential)");
    }

    void parse_change_time(const nlohmann::json& sc_json, Scenario& sc) {
        if (!sc_json.contains("change_time")) {
            sc.change_time = 0;
            return;
        }
        const auto& v = sc_json["change_time"];
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
            sc.change_time.reset();
        else if (v.is_number_integer())
            sc.change_time = v.get<std::int64_t>();
        else
            problems_.push_back("change_time must be a nonnegative integer or \"inf\"");
    }

    void parse_rule(const nlohmann::json& sc_json, Scenario& sc) {
        const auto& rule = expect_object(sc_json, "rule");
        const std::string kind = get_string_or(rule, "kind", "");
        if (kind == "simultaneous")
            sc.rule.kind = RuleKind::d_voting_simultaneous;
        else if (kind == "multi_shot")
            sc.rule.kind = RuleKind::multi_shot;
        else if (kind == "one_shot")
            sc.rule.kind = RuleKind::one_shot;
        else if (kind == "genie")
            sc.rule.kind = RuleKind::genie_centralized;
        else
            problems_.push_back(
                "rule.kind must be one of simultaneous, multi_shot, one_shot, genie");
        sc.rule.d = get_int_or(rule, "d", 1);
        sc.rule.genie_threshold = get_double_or(rule, "threshold", 0.0);
        if (rule.contains("revealed")) {
            const int revealed = get_int(rule, "revealed");
            for (int k = 0; k < revealed; ++k) sc.rule.revealed.push_back(k);
        }
    }

    void parse_attack(const nlohmann::json& sc_json, Scenario& sc) {
        if (!sc_json.contains("attack")) {
            // Default worst case per metric: silence maximizes delay,
            // constant alarms minimize the false metrics.
            sc.attack.kind = sc.change_never_happens() ? AttackKind::always_alarm
                                                       : AttackKind::silent_h0;
            return;
        }
        const auto& atk = expect_object(sc_json, "attack");
        const std::string kind = get_string_or(atk, "kind", "");
        if (kind == "absent")
            sc.attack.kind = AttackKind::absent;
        else if (kind == "silent_h0")
            sc.attack.kind = AttackKind::silent_h0;
        else if (kind == "always_alarm")
            sc.attack.kind = AttackKind::always_alarm;
        else if (kind == "reverse")
            sc.attack.kind = AttackKind::reverse;
        else
            problems_.push_back(
                "attack.kind must be one of absent, silent_h0, always_alarm, reverse");
        if (atk.contains("target")) sc.attack.target = get_int(atk, "target");
        if (atk.contains("activation_step"))
            sc.attack.activation_step = get_int64_or(atk, "activation_step", 1);
    }

    std::optional<SweepRequest> parse_sweep(const nlohmann::json& sweep) {
        SweepRequest req;
        const std::string axis = get_string_or(sweep, "axis", "");
        if (axis == "h")
            req.axis = SweepAxis::threshold;
        else if (axis == "gamma")
            req.axis = SweepAxis::gamma;
        else if (axis == "d")
            req.axis = SweepAxis::votes;
        else if (axis == "attack")
            req.axis = SweepAxis::attack;
        else
            problems_.push_back("sweep.axis must be one of h, gamma, d, attack");

        const std::string metric = get_string_or(sweep, "metric", "delay");
        if (metric == "delay")
            req.metric = MetricKind::delay;
        else if (metric == "false_alarm")
            req.metric = MetricKind::false_alarm;
        else if (metric == "false_isolation")
            req.metric = MetricKind::false_isolation;
        else
            problems_.push_back(
                "sweep.metric must be one of delay, false_alarm, false_isolation");

        if (!sweep.contains("values") || !sweep["values"].is_array() ||
            sweep["values"].empty()) {
            problems_.push_back("sweep.values must be a nonempty array");
            return req;
        }
        for (const auto& v : sweep["values"]) {
            if (req.axis == SweepAxis::attack) {
                const std::string name = v.is_string() ? v.get<std::string>() : "";
                if (name == "absent")
                    req.attacks.push_back(AttackKind::absent);
                else if (name == "silent_h0")
                    req.attacks.push_back(AttackKind::silent_h0);
                else if (name == "always_alarm")
                    req.attacks.push_back(AttackKind::always_alarm);
                else if (name == "reverse")
                    req.attacks.push_back(AttackKind::reverse);
                else
                    problems_.push_back("unknown attack kind in sweep.values");
            } else if (v.is_number()) {
                req.values.push_back(v.get<double>());
            } else {
                problems_.push_back("sweep.values entries must be numbers");
            }
        }
        if (sweep.contains("isolation_target"))
            req.isolation_target = get_int(sweep, "isolation_target");
        return req;
    }

    void validate_sweep(const SweepRequest& req, const Scenario& sc) {
        if (req.metric == MetricKind::delay && sc.change_never_happens())
            problems_.push_back("delay sweeps need a finite change time");
        if (req.metric == MetricKind::false_isolation) {
            if (!req.isolation_target.has_value())
                problems_.push_back("false_isolation sweeps need sweep.isolation_target");
            else if (*req.isolation_target < 1 ||
                     *req.isolation_target > sc.hypothesis_count() ||
                     (!sc.change_never_happens() &&
                      *req.isolation_target == sc.true_hypothesis))
                problems_.push_back("sweep.isolation_target must name a wrong hypothesis in [Q]");
        }
        if (req.axis == SweepAxis::gamma) {
            if (sc.rule.kind == RuleKind::one_shot)
                problems_.push_back("gamma sweeps are undefined for the one-shot rule (no calibration formula)");
            for (double g : req.values)
                if (!(g > 1.0)) problems_.push_back("gamma values must exceed 1");
        }
        if (req.axis == SweepAxis::votes)
            for (double d : req.values)
                if (!(d > sc.compromised && d <= sc.honest))
                    problems_.push_back("swept d=" + std::to_string(static_cast<int>(d)) +
                                        " violates M < d <= |N|");
    }

    const nlohmann::json& root_;
    std::vector<std::string> problems_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("syntax error: ") + e.what()});
    }
    return detail::ConfigReader(root).parse();
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file: " + path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Machine-readable output
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvSchemaHeader = "# bdqcd-results v1";
inline constexpr const char* kCsvColumns =
    "fingerprint,axis,axis_value,metric,mean,ci_halfwidth,censor_fraction,"
    "undecidable_fraction,trials,theory,ratio";

inline std::string format_number(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

inline std::string csv_row(const std::string& fingerprint, const SweepRow& row,
                           int precision) {
    std::string s = fingerprint;
    s += ',';
    s += row.axis_label;
    s += ',';
    s += format_number(row.axis_value, precision);
    s += ',';
    s += row.metric_name;
    s += ',';
    s += format_number(row.estimate.mean, precision);
    s += ',';
    s += format_number(row.estimate.ci_halfwidth, precision);
    s += ',';
    s += format_number(row.estimate.censor_fraction, precision);
    s += ',';
    s += format_number(row.estimate.undecidable_fraction, precision);
    s += ',';
    s += std::to_string(row.estimate.n);
    s += ',';
    if (row.theory) s += format_number(*row.theory, precision);
    s += ',';
    if (row.ratio) s += format_number(*row.ratio, precision);
    return s;
}

inline std::string render_csv(const std::string& fingerprint,
                              const std::vector<SweepRow>& rows, int precision) {
    std::string out = kCsvSchemaHeader;
    out += '\n';
    out += kCsvColumns;
    out += '\n';
    for (const auto& row : rows) {
        out += csv_row(fingerprint, row, precision);
        out += '\n';
    }
    return out;
}

inline nlohmann::json theory_report_json(const TheoryReport& r) {
    nlohmann::json j;
    j["honest"] = r.honest;
    j["compromised"] = r.compromised;
    j["d"] = r.votes;
    j["rule"] = rule_name(r.rule);
    j["i_star"] = r.i_star;
    j["converse_slope"] = r.converse;
    if (r.achievability) j["achievability_slope"] = *r.achievability;
    j["stackelberg_cost"] = r.stackelberg;
    if (r.gamma) j["gamma"] = *r.gamma;
    if (r.calibrated_h) j["calibrated_h"] = *r.calibrated_h;
    if (r.false_bound) j["false_bound_at_calibrated_h"] = *r.false_bound;
    j["assumption_tie_flag"] = r.alternatives.any_tie;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t qi = 0; qi < r.alternatives.per_hypothesis.size(); ++qi) {
        const auto& e = r.alternatives.per_hypothesis[qi];
        rows.push_back({{"q", qi + 1},
                        {"I_q", e.divergence},
                        {"j_star", e.minimizer},
                        {"tie", e.tie},
                        {"sigma2", r.sigma2_closest[qi]},
                        {"second_order", r.second_order[qi]}});
    }
    j["per_hypothesis"] = rows;
    j["pre_change"] = {{"I_0", r.alternatives.pre_change.divergence},
                       {"j_star", r.alternatives.pre_change.minimizer},
                       {"tie", r.alternatives.pre_change.tie}};
    j["xi"] = r.xi;
    return j;
}

}  // namespace bdqcd
