// qbell: Bell-parameter simulation and analysis for two-photon polarization states.
//
//   qbell simulate  --state phi+ --method chsh,simplified --pairs 10000 --seed 7
//   qbell analyze   counts.csv [--angle-unit waveplate]
//   qbell variance  --state werner:0.75 --method simplified --trials 1000
//   qbell crossover --p-grid 0.5,0.6,0.7,0.8,0.9,1.0 --trials 1000
//   qbell classify  --s-plus 2.83 --s-minus 0.01  |  --state psi+

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qbell/qbell.hpp"

namespace {

using namespace qbell;

const std::map<std::string, Method> kMethodNames{
    {"chsh", Method::chsh}, {"simplified", Method::simplified}, {"fringe", Method::fringe}};
const std::map<std::string, AngleUnit> kUnitNames{{"analysis", AngleUnit::analysis},
                                                  {"waveplate", AngleUnit::waveplate}};
const std::map<std::string, ReportFormat> kFormatNames{{"json", ReportFormat::json}, {"table", ReportFormat::table}};

template <class Map>
std::vector<std::string> keys(const Map& m) {
    std::vector<std::string> out;
    for (const auto& [k, v] : m) out.push_back(k);
    return out;
}

std::vector<Sign> signs_from(const std::string& s) {
    if (s == "plus") return {Sign::plus};
    if (s == "minus") return {Sign::minus};
    return {Sign::plus, Sign::minus};
}

struct Common {
    std::vector<std::string> methods{"chsh", "simplified"};
    std::string sign = "both";
    std::string output = "-";
    std::string format = "json";
    std::string unit = "analysis";
    double tol = 0.1;

    std::vector<Method> method_list() const {
        std::vector<Method> out;
        for (const auto& m : methods) out.push_back(kMethodNames.at(m));
        return out;
    }
};

void add_output_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--output,-o", c.output, "Report destination ('-' for stdout)");
    cmd->add_option("--format", c.format, "Report format")->check(CLI::IsMember(keys(kFormatNames)));
}

void add_method_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--method,-m", c.methods, "Estimator(s): chsh, simplified, fringe")
        ->delimiter(',')
        ->check(CLI::IsMember(keys(kMethodNames)));
    cmd->add_option("--sign", c.sign, "Sign variant(s) to report")->check(CLI::IsMember({"plus", "minus", "both"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bell-parameter simulation and analysis for two-photon polarization states"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    ExperimentConfig cfg;
    Common common;

    auto add_experiment_flags = [&](CLI::App* cmd) {
        cmd->add_option("--state,-s", cfg.state, "phi+|phi-|psi+|psi-[@st], werner:<p>, mixed, matrix:<file>");
        cmd->add_option("--pairs,-n", cfg.n_total, "Total detected pairs per estimate");
        cmd->add_option("--seed", cfg.seed, "RNG seed");
        cmd->add_option("--beta-grid", cfg.beta_grid, "Fringe scan angles for Bob (in --angle-unit)")->delimiter(',');
        cmd->add_option("--angle-unit", common.unit, "analysis (radians) or waveplate (degrees)")
            ->check(CLI::IsMember(keys(kUnitNames)));
        cmd->add_option("--tol", common.tol, "Classification tolerance");
        cmd->add_option("--threads", cfg.threads, "Worker threads for Monte Carlo trials (0 = all cores)");
        add_method_flags(cmd, common);
        add_output_flags(cmd, common);
    };

    auto* simulate = app.add_subcommand("simulate", "Sample counts for a state and estimate the Bell parameter");
    add_experiment_flags(simulate);
    std::uint64_t sim_trials = 1, var_trials = 1000;
    simulate->add_option("--trials,-t", sim_trials, "Monte Carlo trials; > 1 adds variance sections");

    auto* variance = app.add_subcommand("variance", "Predicted vs Monte Carlo variance of the estimators");
    add_experiment_flags(variance);
    variance->add_option("--trials,-t", var_trials, "Monte Carlo trials");

    std::string input;
    auto* analyze = app.add_subcommand("analyze", "Estimate the Bell parameter from a counts file");
    analyze->add_option("input,--input,-i", input, "Counts file (alpha,beta,n_pp,n_pm,n_mp,n_mm)")->required();
    analyze->add_option("--angle-unit", common.unit, "analysis (radians) or waveplate (degrees)")
        ->check(CLI::IsMember(keys(kUnitNames)));
    analyze->add_option("--tol", common.tol, "Classification tolerance");
    add_method_flags(analyze, common);
    add_output_flags(analyze, common);

    std::vector<double> p_grid{0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0};
    std::uint64_t cross_pairs = 10000, cross_trials = 1000, cross_seed = 1;
    unsigned cross_threads = 0;
    auto* crossover = app.add_subcommand("crossover", "Scan Werner states for the variance crossover");
    crossover->add_option("--p-grid", p_grid, "Werner weights")->delimiter(',');
    crossover->add_option("--pairs,-n", cross_pairs, "Total pairs per estimate");
    crossover->add_option("--trials,-t", cross_trials, "Monte Carlo trials per point");
    crossover->add_option("--seed", cross_seed, "RNG seed");
    crossover->add_option("--threads", cross_threads, "Worker threads (0 = all cores)");
    add_output_flags(crossover, common);

    std::optional<double> s_plus, s_minus;
    std::string classify_state;
    auto* classify = app.add_subcommand("classify", "Identify a Bell state from (S'+, S'-)");
    auto* sp = classify->add_option("--s-plus", s_plus, "Measured S'+");
    auto* sm = classify->add_option("--s-minus", s_minus, "Measured S'-");
    auto* st = classify->add_option("--state,-s", classify_state, "Classify a state from exact values instead");
    sp->needs(sm);
    sm->needs(sp);
    st->excludes(sp)->excludes(sm);
    classify->add_option("--tol", common.tol, "Tolerance on both components");
    add_output_flags(classify, common);

    CLI11_PARSE(app, argc, argv);

    try {
        Report report;
        if (simulate->parsed() || variance->parsed()) {
            cfg.methods = common.method_list();
            cfg.signs = signs_from(common.sign);
            cfg.angle_unit = kUnitNames.at(common.unit);
            cfg.classify_tol = common.tol;
            cfg.output = common.output;
            cfg.format = kFormatNames.at(common.format);
            cfg.trials = simulate->parsed() ? sim_trials : var_trials;
            report = simulate->parsed() ? run_simulation(cfg) : run_variance(cfg);
        } else if (analyze->parsed()) {
            AnalyzeOptions opt;
            if (analyze->count("--method")) opt.methods = common.method_list();
            opt.signs = signs_from(common.sign);
            opt.classify_tol = common.tol;
            report = analyze_counts(ingest_counts(input, kUnitNames.at(common.unit)), opt);
        } else if (crossover->parsed()) {
            report = run_crossover(cross_pairs, cross_trials, p_grid, cross_seed, cross_threads);
        } else if (classify->parsed()) {
            if (!classify_state.empty())
                report = run_classify(classify_state, common.tol);
            else if (s_plus && s_minus)
                report = run_classify(*s_plus, *s_minus, common.tol);
            else
                throw UsageError("classify: give --s-plus and --s-minus, or --state");
        }
        emit_report(report, kFormatNames.at(common.format), common.output);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << input << ": " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
