#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bdqcd/config.hpp"

namespace {

using namespace bdqcd;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << contents;
}

void write_theory_sidecar(const std::string& csv_path, const ExperimentConfig& cfg,
                          std::optional<double> gamma) {
    const Scenario& sc = cfg.scenario;
    if (sc.rule.kind == RuleKind::genie_centralized && sc.hypothesis_count() != 1)
        return;
    TheoryReport report = make_theory_report(sc.hypotheses, sc.honest, sc.compromised,
                                             sc.rule.d, sc.rule.kind, gamma);
    nlohmann::json j = theory_report_json(report);
    j["fingerprint"] = cfg.fingerprint;
    write_file(csv_path + ".theory.json", j.dump(2) + "\n");
}

void print_rows(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows) {
    std::printf("%s\n%s\n", kCsvSchemaHeader, kCsvColumns);
    for (const auto& row : rows)
        std::printf("%s\n", csv_row(cfg.fingerprint, row, cfg.output.precision).c_str());
}

// bare (x, y, ci) triples for external plotting tools
void write_plot_data(const std::string& path, const std::vector<SweepRow>& rows,
                     int precision) {
    std::string out;
    for (const auto& row : rows) {
        out += format_number(row.axis_value, precision);
        out += ' ';
        out += format_number(row.estimate.mean, precision);
        out += ' ';
        out += format_number(row.estimate.ci_halfwidth, precision);
        out += '\n';
    }
    write_file(path, out);
}

void emit_results(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows,
                  std::optional<double> gamma_for_theory,
                  const std::string& plot_path = "") {
    print_rows(cfg, rows);
    if (!cfg.output.csv_path.empty()) {
        write_file(cfg.output.csv_path,
                   render_csv(cfg.fingerprint, rows, cfg.output.precision));
        write_theory_sidecar(cfg.output.csv_path, cfg, gamma_for_theory);
        std::printf("wrote %s\n", cfg.output.csv_path.c_str());
    }
    if (!plot_path.empty()) {
        write_plot_data(plot_path, rows, cfg.output.precision);
        std::printf("wrote %s\n", plot_path.c_str());
    }
}

int cmd_simulate(const std::string& config_path, const std::string& metric_name,
                 std::optional<int> isolation_target, const std::string& plot_path) {
    ExperimentConfig cfg = load_config(config_path);
    Scenario& sc = cfg.scenario;

    std::string metric = metric_name;
    if (metric.empty())
        metric = sc.change_never_happens() ? "false_alarm" : "delay";

    SweepRow row;
    row.axis_label = "h";
    row.axis_value = sc.local_threshold;
    row.metric_name = metric;
    if (metric == "delay") {
        if (sc.change_never_happens())
            throw ConfigError({"delay simulation needs a finite change time"});
        row.estimate = estimate_delay(sc);
        const int q = sc.true_hypothesis;
        const auto alts = sc.hypotheses.closest_alternatives();
        if (sc.rule.kind == RuleKind::d_voting_simultaneous ||
            sc.rule.kind == RuleKind::multi_shot)
            row.theory = delay_expansion(
                sc.local_threshold, alts.row(q).divergence,
                llr_second_moment(sc.hypotheses, q, alts.row(q).minimizer), sc.honest,
                sc.rule.d);
    } else if (metric == "false_alarm") {
        Scenario fa = sc;
        fa.change_time.reset();
        row.estimate = estimate_false_metric(fa);
        if (sc.rule.kind == RuleKind::d_voting_simultaneous)
            row.theory = false_bound_simultaneous(sc.honest, sc.compromised, sc.rule.d,
                                                  sc.local_threshold);
        else if (sc.rule.kind == RuleKind::multi_shot)
            row.theory = false_bound_multishot(sc.honest, sc.compromised, sc.rule.d,
                                               sc.local_threshold);
    } else if (metric == "false_isolation") {
        row.estimate = estimate_false_metric(sc, isolation_target);
    } else {
        throw ConfigError({"metric must be one of delay, false_alarm, false_isolation"});
    }
    if (row.theory.has_value() && *row.theory != 0.0)
        row.ratio = row.estimate.mean / *row.theory;
    emit_results(cfg, {row}, std::nullopt, plot_path);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& plot_path) {
    ExperimentConfig cfg = load_config(config_path);
    if (!cfg.sweep.has_value())
        throw ConfigError({"config has no sweep block"});
    auto rows = run_sweep(cfg.scenario, *cfg.sweep);
    std::optional<double> gamma_for_theory;
    if (cfg.sweep->axis == SweepAxis::gamma && !cfg.sweep->values.empty())
        gamma_for_theory = cfg.sweep->values.back();
    emit_results(cfg, rows, gamma_for_theory, plot_path);
    return 0;
}

int cmd_calibrate(const std::string& rule, int honest, int compromised, int votes,
                  double gamma) {
    double h = 0.0;
    if (rule == "simultaneous")
        h = calibrate_h_simultaneous(honest, compromised, votes, gamma);
    else if (rule == "multi_shot")
        h = calibrate_h_multishot(honest, compromised, votes, gamma);
    else if (rule == "genie")
        h = std::log(gamma);
    else
        throw ConfigError({"calibrate supports rules simultaneous, multi_shot, genie"});
    std::printf("%.10g\n", h);
    return 0;
}

int cmd_theory(const std::string& config_path, std::optional<double> gamma,
               const std::string& json_path) {
    ExperimentConfig cfg = load_config(config_path);
    const Scenario& sc = cfg.scenario;
    const RuleKind kind = sc.rule.kind == RuleKind::genie_centralized
                              ? RuleKind::d_voting_simultaneous
                              : sc.rule.kind;
    TheoryReport r = make_theory_report(sc.hypotheses, sc.honest, sc.compromised,
                                        sc.rule.d, kind, gamma);

    std::printf("fingerprint      %s\n", cfg.fingerprint.c_str());
    std::printf("sensors          |N|=%d M=%d d=%d rule=%s\n", r.honest, r.compromised,
                r.votes, rule_name(r.rule));
    std::printf("I*               %.10g (argmin q=%d)\n", r.i_star,
                r.alternatives.i_star_argmin);
    std::printf("I^0              %.10g (j*_0=%d%s)\n",
                r.alternatives.pre_change.divergence, r.alternatives.pre_change.minimizer,
                r.alternatives.pre_change.tie ? ", tie" : "");
    for (std::size_t qi = 0; qi < r.alternatives.per_hypothesis.size(); ++qi) {
        const auto& e = r.alternatives.per_hypothesis[qi];
        std::printf("q=%zu              I^q=%.10g j*_q=%d sigma2=%.10g%s\n", qi + 1,
                    e.divergence, e.minimizer, r.sigma2_closest[qi],
                    e.tie ? " (tie)" : "");
    }
    std::printf("xi_d             ");
    for (double x : r.xi) std::printf("%.6g ", x);
    std::printf("\n");
    std::printf("converse slope   %.10g\n", r.converse);
    if (r.achievability) std::printf("achievability    %.10g\n", *r.achievability);
    std::printf("stackelberg J1*  %.10g\n", r.stackelberg);
    if (r.calibrated_h) std::printf("calibrated h     %.10g (gamma=%.6g)\n",
                                    *r.calibrated_h, *r.gamma);
    if (r.false_bound) std::printf("false bound      %.10g\n", *r.false_bound);
    if (r.alternatives.any_tie)
        std::printf("warning: KL ties detected; the uniqueness assumption is violated\n");

    if (!json_path.empty()) {
        nlohmann::json j = theory_report_json(r);
        j["fingerprint"] = cfg.fingerprint;
        write_file(json_path, j.dump(2) + "\n");
        std::printf("wrote %s\n", json_path.c_str());
    }
    return 0;
}

int cmd_game(const std::string& config_path, std::vector<double> gammas,
             bool verify_false) {
    ExperimentConfig cfg = load_config(config_path);
    Scenario base = cfg.scenario;
    if (gammas.empty()) gammas = {1e2, 1e3, 1e4};

    const auto alts = base.hypotheses.closest_alternatives();
    const double j_star = stackelberg_cost(base.honest, base.compromised, alts.i_star);
    std::printf("leader: simultaneous %d-th alarm; follower: reverse attack\n",
                base.honest);
    std::printf("stackelberg cost J1* = %.6g\n", j_star);
    std::printf("%-12s %-12s %-12s %-14s %-12s %-10s\n", "gamma", "h", "delay",
                "false_metric", "J1", "J1/J1*");
    for (double gamma : gammas) {
        Scenario sc = base;
        sc.rule.kind = RuleKind::d_voting_simultaneous;
        sc.rule.d = sc.honest;
        sc.local_threshold =
            calibrate_h_simultaneous(sc.honest, sc.compromised, sc.honest, gamma);
        sc.change_time = 0;
        sc.attack.kind = AttackKind::reverse;
        sc.attack.target.reset();
        sc.single_stop = true;
        MetricsEstimate delay = estimate_delay(sc);

        // The calibration makes the certified bound itself >= gamma; an
        // empirical run of the worst false-alarm attack is optional.
        double false_metric =
            false_bound_simultaneous(sc.honest, sc.compromised, sc.honest,
                                     sc.local_threshold);
        if (verify_false) {
            Scenario fa = sc;
            fa.change_time.reset();
            fa.attack.kind = AttackKind::always_alarm;
            fa.attack.target.reset();
            fa.trials = std::max<std::int64_t>(base.trials / 100, 50);
            fa.horizon = static_cast<std::int64_t>(20.0 * gamma);
            false_metric = estimate_false_metric(fa).mean;
        }
        const double cost = leader_cost_empirical(delay.mean, gamma, false_metric);
        std::printf("%-12.6g %-12.6g %-12.6g %-14.6g %-12.6g %-10.6g\n", gamma,
                    sc.local_threshold, delay.mean, false_metric, cost, cost / j_star);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Byzantine distributed quickest change detection simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string metric;
    std::string plot_path;
    int isolation_target = 0;

    auto* simulate = app.add_subcommand("simulate", "run one scenario and report its metric");
    simulate->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    simulate->add_option("--metric", metric,
                         "delay | false_alarm | false_isolation (default: from change_time)");
    simulate->add_option("--target", isolation_target, "isolation target for false_isolation");
    simulate->add_option("--plot-data", plot_path, "write bare x/y/ci triples to this path");

    auto* sweep = app.add_subcommand("sweep", "run the config's sweep block");
    sweep->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sweep->add_option("--plot-data", plot_path, "write bare x/y/ci triples to this path");

    std::string cal_rule;
    int cal_n = 0, cal_m = 0, cal_d = 0;
    double cal_gamma = 0.0;
    auto* calibrate = app.add_subcommand("calibrate", "print the local threshold h for a target gamma");
    calibrate->add_option("--rule", cal_rule, "simultaneous | multi_shot | genie")->required();
    calibrate->add_option("-N,--honest", cal_n, "honest sensor count")->required();
    calibrate->add_option("-M,--compromised", cal_m, "compromised sensor count")->required();
    calibrate->add_option("-d,--votes", cal_d, "vote count")->required();
    calibrate->add_option("--gamma", cal_gamma, "target mean time to false alarm/isolation")->required();

    double theory_gamma = 0.0;
    std::string theory_json;
    auto* theory = app.add_subcommand("theory", "print the closed-form theory report");
    theory->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    auto* gopt = theory->add_option("--gamma", theory_gamma, "also calibrate h for this gamma");
    theory->add_option("--json", theory_json, "write the report as JSON");

    std::vector<double> game_gammas;
    bool game_verify = false;
    auto* game = app.add_subcommand("game", "Stackelberg game: consensus leader vs reverse attack");
    game->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    game->add_option("--gammas", game_gammas, "gamma grid (default 1e2 1e3 1e4)");
    game->add_flag("--verify-false", game_verify,
                   "also estimate the false metric empirically (slower)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed())
            return cmd_simulate(config_path, metric,
                                isolation_target > 0 ? std::optional<int>(isolation_target)
                                                     : std::nullopt,
                                plot_path);
        if (sweep->parsed()) return cmd_sweep(config_path, plot_path);
        if (calibrate->parsed())
            return cmd_calibrate(cal_rule, cal_n, cal_m, cal_d, cal_gamma);
        if (theory->parsed())
            return cmd_theory(config_path,
                              gopt->count() ? std::optional<double>(theory_gamma)
                                            : std::nullopt,
                              theory_json);
        if (game->parsed()) return cmd_game(config_path, game_gammas, game_verify);
    } catch (const bdqcd::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
