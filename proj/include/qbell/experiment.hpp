#pragma once

// Experiment configuration and the end-to-end workflows behind the CLI:
// simulate, analyze, variance, crossover and classify. Each returns a Report.
// All randomness is derived from the configured seed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbell/counts_io.hpp"
#include "qbell/report.hpp"

namespace qbell {

// State spec grammar:
//   phi+ | phi- | psi+ | psi-    HV Bell state; append "@st" for the ST-basis state
//   werner:<p>                   p |Phi+><Phi+| + (1-p) I/4
//   mixed                        I/4
//   matrix:<path>                JSON 4x4 array; entries are numbers or [re, im]
inline DensityMatrix resolve_state(const std::string& spec) {
    try {
        if (spec == "mixed") return DensityMatrix::maximally_mixed();
        if (spec.rfind("werner:", 0) == 0) {
            const std::string arg = spec.substr(7);
            double p = 0.0;
            const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p);
            if (arg.empty() || ec != std::errc() || ptr != arg.data() + arg.size())
                throw ConfigError("state", "bad Werner weight '" + arg + "'");
            return werner_state(p);
        }
        if (spec.rfind("matrix:", 0) == 0) {
            const std::string path = spec.substr(7);
            std::ifstream in(path);
            if (!in) throw ConfigError("state", "cannot open matrix file '" + path + "'");
            const Json j = Json::parse(in);
            if (!j.is_array() || j.size() != 4) throw ConfigError("state", "matrix must have 4 rows");
            Matrix4 m;
            for (int r = 0; r < 4; ++r) {
                if (!j[r].is_array() || j[r].size() != 4)
                    throw ConfigError("state", "matrix row " + std::to_string(r) + " must have 4 entries");
                for (int c = 0; c < 4; ++c) {
                    const Json& e = j[r][c];
                    if (e.is_number())
                        m(r, c) = Complex(e.get<double>(), 0.0);
                    else if (e.is_array() && e.size() == 2)
                        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
                    else
                        throw ConfigError("state", "matrix entry (" + std::to_string(r) + "," + std::to_string(c) +
                                                       ") must be a number or [re, im]");
                }
            }
            return validate_density(m);
        }
        std::string name = spec;
        Basis basis = Basis::HV;
        if (const auto at = spec.find('@'); at != std::string::npos) {
            const std::string b = spec.substr(at + 1);
            if (b == "st") basis = Basis::ST;
            else if (b != "hv") throw ConfigError("state", "unknown basis '" + b + "'");
            name = spec.substr(0, at);
        }
        if (const auto kind = parse_bell_kind(name)) return pure_to_density(bell_state(*kind, basis));
        throw ConfigError("state", "unrecognized state spec '" + spec + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const Json::exception& e) {
        throw ConfigError("state", std::string("matrix file: ") + e.what());
    } catch (const Error& e) {
        throw ConfigError("state", e.what());
    }
}

struct ExperimentConfig {
    std::string state = "phi+";
    std::vector<Method> methods{Method::chsh, Method::simplified};
    std::vector<Sign> signs{Sign::plus, Sign::minus};
    std::uint64_t n_total = 10000;
    std::uint64_t trials = 1;
    std::uint64_t seed = 1;
    AngleUnit angle_unit = AngleUnit::analysis;
    std::vector<double> beta_grid;  // fringe scan in angle_unit; empty = 17 points over [0, π]
    double classify_tol = 0.1;
    // Not part of the experiment identity.
    std::string output;
    ReportFormat format = ReportFormat::json;
    unsigned threads = 0;
};

inline std::vector<double> beta_grid_radians(const ExperimentConfig& cfg) {
    if (cfg.beta_grid.empty()) return default_beta_grid();
    std::vector<double> out;
    for (double b : cfg.beta_grid) out.push_back(to_analysis_radians(b, cfg.angle_unit));
    return out;
}

inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Json config_json(const ExperimentConfig& cfg) {
    Json methods = Json::array(), signs = Json::array();
    for (Method m : cfg.methods) methods.push_back(to_string(m));
    for (Sign s : cfg.signs) signs.push_back(to_string(s));
    return {{"state", cfg.state},       {"methods", methods},     {"signs", signs},
            {"n_total", cfg.n_total},   {"trials", cfg.trials},   {"seed", cfg.seed},
            {"angle_unit", to_string(cfg.angle_unit)},            {"beta_grid", cfg.beta_grid},
            {"classify_tol", cfg.classify_tol}};
}

inline std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(config_json(cfg).dump()); }

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw ConfigError("methods", "at least one method is required");
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (cfg.methods[i] == cfg.methods[j])
                throw ConfigError("methods[" + std::to_string(i) + "]", "duplicate method");
    if (cfg.signs.empty()) throw ConfigError("signs", "at least one sign is required");
    if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
    if (!(cfg.classify_tol > 0.0)) throw ConfigError("classify_tol", "must be positive");
    const auto grid = beta_grid_radians(cfg);
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
        const Method m = cfg.methods[i];
        if (m == Method::fringe) {
            try {
                validate_beta_grid(grid);
            } catch (const UsageError& e) {
                throw ConfigError("beta_grid", e.what());
            }
        }
        const std::size_t needed = protocol_settings(m, grid).size();
        if (cfg.n_total < needed)
            throw ConfigError("n_total", "method " + std::string(to_string(m)) + " needs at least " +
                                             std::to_string(needed) + " pairs, got " + std::to_string(cfg.n_total));
    }
}

namespace detail {

inline std::uint64_t lane(Method m) { return static_cast<std::uint64_t>(m); }

inline Classification classify_from(Method source, std::span<const CorrelationMeasurement> ms, double tol) {
    Classification c;
    c.source = source;
    c.s_plus = estimate(source, ms, Sign::plus).value;
    c.s_minus = estimate(source, ms, Sign::minus).value;
    c.tol = tol;
    c.state = classify_bell_state(c.s_plus, c.s_minus, tol);
    return c;
}

inline std::string chsh_discrepancy_note(std::uint64_t n_total, double propagated) {
    const double closed = 4.0 / static_cast<double>(n_total);
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "chsh variance: near-maximum closed form 4/N = %.12g, first-order propagation under the equal "
                  "N/4 split = %.12g (ratio %.6g)%s",
                  closed, propagated, propagated / closed,
                  std::abs(propagated / closed - 1.0) > 0.05
                      ? "; DISCREPANCY: the closed form does not follow from an equal split of N pairs"
                      : "");
    return buf;
}

// Predictions and Monte Carlo variances for every method in cfg.
inline void add_variance_sections(Report& report, const ExperimentConfig& cfg, const DensityMatrix& rho,
                                  const RngStream& stream) {
    MonteCarloOptions opt;
    opt.sign = cfg.signs.front();
    opt.beta_grid = beta_grid_radians(cfg);
    opt.threads = cfg.threads;
    for (Method m : cfg.methods) {
        if (m == Method::chsh) {
            const double prop = derived_variance_chsh(rho, cfg.n_total);
            report.predictions.push_back(predicted_variance_chsh(cfg.n_total));
            report.predictions.push_back({m, VarianceModel::propagation, cfg.n_total, 0.0, prop});
            report.notes.push_back(chsh_discrepancy_note(cfg.n_total, prop));
        } else if (m == Method::simplified) {
            const double s = std::abs(expectation(rho, simplified_operator(opt.sign)));
            report.predictions.push_back(predicted_variance_simplified(cfg.n_total, std::min(s, kTsirelson)));
            report.predictions.push_back(
                {m, VarianceModel::propagation, cfg.n_total, 0.0, derived_variance_simplified(rho, cfg.n_total)});
        }
        report.empirical.push_back(empirical_variance(m, rho, cfg.n_total, cfg.trials, stream.child(lane(m)), opt));
    }
}

}  // namespace detail

// One sampled run of every configured method, Bell-state classification, and
// variance sections when trials > 1. Trial 0 of the estimates samples from
// seed/0/method/setting; the Monte Carlo trials from seed/1/method/trial/setting.
inline Report run_simulation(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const DensityMatrix rho = resolve_state(cfg.state);
    const auto grid = beta_grid_radians(cfg);
    const RngStream root(cfg.seed);

    Report report;
    report.command = "simulate";
    report.state = cfg.state;
    report.provenance = {config_hash(cfg), cfg.seed, kVersion};

    std::map<Method, std::vector<CorrelationMeasurement>> measured;
    for (Method m : cfg.methods) {
        const Protocol proto(m, rho, grid);
        const auto records = proto.sample(cfg.n_total, root.child(0).child(detail::lane(m)));
        auto& ms = measured[m];
        for (const auto& r : records) ms.push_back(correlation_from_counts(r));
        if (m == Method::fringe) {
            report.estimates.push_back(estimate_fringe(ms));
        } else {
            for (Sign s : cfg.signs) report.estimates.push_back(estimate(m, ms, s));
        }
    }
    for (Method source : {Method::simplified, Method::chsh}) {
        if (auto it = measured.find(source); it != measured.end()) {
            report.classification = detail::classify_from(source, it->second, cfg.classify_tol);
            break;
        }
    }
    if (cfg.trials > 1) detail::add_variance_sections(report, cfg, rho, root.child(1));
    return report;
}

// Predicted and empirical variances only.
inline Report run_variance(const ExperimentConfig& cfg) {
    validate_config(cfg);
    if (cfg.trials < 2) throw ConfigError("trials", "variance needs at least 2 trials");
    const DensityMatrix rho = resolve_state(cfg.state);
    Report report;
    report.command = "variance";
    report.state = cfg.state;
    report.provenance = {config_hash(cfg), cfg.seed, kVersion};
    detail::add_variance_sections(report, cfg, rho, RngStream(cfg.seed).child(1));
    return report;
}

struct AnalyzeOptions {
    std::vector<Method> methods;  // empty = every protocol whose settings are all present
    std::vector<Sign> signs{Sign::plus, Sign::minus};
    double classify_tol = 0.1;
};

// Estimates from measured counts. Rows not belonging to a requested protocol
// are ignored; a requested protocol with a missing or repeated setting is an
// error naming the setting (and source lines for repeats).
inline Report analyze_counts(std::span<const CountsRow> rows, const AnalyzeOptions& opt = {}) {
    if (!(opt.classify_tol > 0.0)) throw UsageError("analyze: classify tolerance must be positive");
    if (opt.signs.empty()) throw UsageError("analyze: at least one sign is required");

    auto select = [&](Method m, bool required) -> std::optional<std::vector<CorrelationMeasurement>> {
        std::vector<CorrelationMeasurement> ms;
        if (m == Method::fringe) {
            for (const auto& r : rows)
                for (double a : kFringeAlphas)
                    if (std::abs(r.record.setting.alpha - a) <= kAngleTol)
                        ms.push_back(correlation_from_counts(r.record));
            if (!required) {
                try {
                    (void)estimate_fringe(ms);
                } catch (const UsageError&) {
                    return std::nullopt;
                }
            }
            return ms;
        }
        for (const auto& s : protocol_settings(m)) {
            std::vector<const CountsRow*> hits;
            for (const auto& r : rows)
                if (r.record.setting.matches(s)) hits.push_back(&r);
            if (hits.empty()) {
                if (!required) return std::nullopt;
                throw UsageError("analyze: method " + std::string(to_string(m)) + " is missing setting " +
                                 to_string(s));
            }
            if (hits.size() > 1)
                throw UsageError("analyze: setting " + to_string(s) + " appears on lines " +
                                 std::to_string(hits[0]->line) + " and " + std::to_string(hits[1]->line));
            if (hits[0]->record.total() == 0)
                throw UsageError("analyze: setting " + to_string(s) + " on line " + std::to_string(hits[0]->line) +
                                 " has no counts");
            ms.push_back(correlation_from_counts(hits[0]->record));
        }
        return ms;
    };

    const bool automatic = opt.methods.empty();
    const std::vector<Method> candidates =
        automatic ? std::vector<Method>{Method::chsh, Method::simplified, Method::fringe} : opt.methods;

    Report report;
    report.command = "analyze";
    report.state = "counts (" + std::to_string(rows.size()) + " rows)";

    std::map<Method, std::vector<CorrelationMeasurement>> measured;
    for (Method m : candidates) {
        auto ms = select(m, !automatic);
        if (!ms) continue;
        if (m == Method::fringe) {
            report.estimates.push_back(estimate_fringe(*ms));
        } else {
            for (Sign s : opt.signs) report.estimates.push_back(estimate(m, *ms, s));
        }
        measured[m] = std::move(*ms);
    }
    if (report.estimates.empty())
        throw UsageError("analyze: counts contain no complete chsh, simplified or fringe protocol");
    for (Method source : {Method::simplified, Method::chsh}) {
        if (auto it = measured.find(source); it != measured.end()) {
            report.classification = detail::classify_from(source, it->second, opt.classify_tol);
            break;
        }
    }

    // Angles are hashed on a 1e-9 grid so that unit conversion does not change the identity.
    Json canon = Json::array();
    for (const auto& r : rows)
        canon.push_back({std::llround(r.record.setting.alpha * 1e9), std::llround(r.record.setting.beta * 1e9),
                         r.record.n_pp, r.record.n_pm, r.record.n_mp, r.record.n_mm});
    Json methods = Json::array();
    for (Method m : opt.methods) methods.push_back(to_string(m));
    Json signs = Json::array();
    for (Sign s : opt.signs) signs.push_back(to_string(s));
    report.provenance = {
        fnv1a_hex(Json{{"rows", canon}, {"methods", methods}, {"signs", signs}, {"tol", opt.classify_tol}}.dump()),
        0, kVersion};
    return report;
}

inline Report run_crossover(std::uint64_t n_total, std::uint64_t trials, std::span<const double> p_grid,
                            std::uint64_t seed, unsigned threads = 0) {
    if (trials < 2) throw ConfigError("trials", "crossover needs at least 2 trials");
    Report report;
    report.command = "crossover";
    report.state = "werner";
    report.crossover = crossover_scan(n_total, trials, p_grid, RngStream(seed), threads);
    const auto& t = *report.crossover;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "predicted crossover: |S'| = %.12g (p = %.6g) from 4/N vs (16/N)(1-|S'|/2sqrt2); |S'| = %.12g "
                  "(p = %.6g) from 8/N propagation vs the same",
                  t.predicted_crossover_s_closed_form, t.predicted_crossover_s_closed_form / kTsirelson,
                  t.predicted_crossover_s_oracle, t.predicted_crossover_s_oracle / kTsirelson);
    report.notes.push_back(buf);
    Json grid(std::vector<double>(p_grid.begin(), p_grid.end()));
    report.provenance = {
        fnv1a_hex(Json{{"n_total", n_total}, {"trials", trials}, {"p_grid", grid}, {"seed", seed}}.dump()), seed,
        kVersion};
    return report;
}

// Classification of given (S'+, S'-) values.
inline Report run_classify(double s_plus, double s_minus, double tol) {
    Report report;
    report.command = "classify";
    report.state = "values";
    report.classification = Classification{Method::simplified, s_plus, s_minus, tol,
                                           classify_bell_state(s_plus, s_minus, tol)};
    report.provenance = {fnv1a_hex(Json{{"s_plus", s_plus}, {"s_minus", s_minus}, {"tol", tol}}.dump()), 0, kVersion};
    return report;
}

// Classification of a state from its exact (S'+, S'-).
inline Report run_classify(const std::string& state, double tol) {
    const DensityMatrix rho = resolve_state(state);
    Report report = run_classify(expectation(rho, simplified_operator(Sign::plus)),
                                 expectation(rho, simplified_operator(Sign::minus)), tol);
    report.state = state;
    return report;
}

}  // namespace qbell
