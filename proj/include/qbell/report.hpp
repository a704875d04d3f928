#pragma once

// Analysis reports and their two serializations:
//   json  - machine-readable, schema-versioned, byte-stable; doubles are
//           written in shortest round-trip form (up to 17 significant digits)
//   table - plain text for humans, 12 significant digits
//
// JSON schema (version 1), keys in this order:
//   schema_version  int
//   command         "simulate" | "analyze" | "variance" | "crossover" | "classify"
//   state           string, state spec or input file
//   estimates       [{method, sign, value, std_error, pairs_used}]
//   classification  null | {source, s_plus, s_minus, tol, state}  (state: "phi+"... or "unclassified")
//   predictions     [{method, model, n_total, s_magnitude, variance}]
//   empirical       [{method, sign, n_total, trials, mean, variance, variance_stderr}]
//   crossover       null | {n_total, trials, p_star, p_star_significant,
//                           predicted_crossover_s_closed_form, predicted_crossover_s_oracle,
//                           rows: [{p, s_prime, chsh, simplified, predicted_chsh, derived_chsh,
//                                   predicted_simplified, derived_simplified}]}
//   notes           [string]
//   provenance      {config_hash, seed, version}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qbell/stats.hpp"

namespace qbell {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct Classification {
    Method source = Method::simplified;  // which estimator supplied (S+, S-)
    double s_plus = 0.0;
    double s_minus = 0.0;
    double tol = 0.0;
    std::optional<BellKind> state;  // nullopt = unclassified

    friend bool operator==(const Classification&, const Classification&) = default;
};

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version = kVersion;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Report {
    int schema_version = kReportSchemaVersion;
    std::string command;
    std::string state;
    std::vector<BellEstimate> estimates;
    std::optional<Classification> classification;
    std::vector<VariancePrediction> predictions;
    std::vector<EmpiricalVariance> empirical;
    std::optional<CrossoverTable> crossover;
    std::vector<std::string> notes;
    Provenance provenance;

    friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat { json, table };

using Json = nlohmann::ordered_json;

namespace detail {

template <typename E, std::size_t N>
E enum_from(const Json& j, const E (&options)[N]) {
    const std::string s = j.get<std::string>();
    for (E e : options)
        if (s == to_string(e)) return e;
    throw UsageError("report: unknown value '" + s + "'");
}

inline Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
inline std::optional<double> opt_double(const Json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline Json to_json(const BellEstimate& e) {
    return {{"method", to_string(e.method)},
            {"sign", to_string(e.sign)},
            {"value", e.value},
            {"std_error", e.std_error},
            {"pairs_used", e.pairs_used}};
}

inline BellEstimate estimate_from(const Json& j) {
    return {j.at("value").get<double>(), j.at("std_error").get<double>(),
            enum_from(j.at("sign"), {Sign::plus, Sign::minus}),
            enum_from(j.at("method"), {Method::chsh, Method::simplified, Method::fringe}),
            j.at("pairs_used").get<std::uint64_t>()};
}

inline Json to_json(const VariancePrediction& p) {
    return {{"method", to_string(p.method)},
            {"model", to_string(p.model)},
            {"n_total", p.n_total},
            {"s_magnitude", p.s_magnitude},
            {"variance", p.variance}};
}

inline VariancePrediction prediction_from(const Json& j) {
    return {enum_from(j.at("method"), {Method::chsh, Method::simplified, Method::fringe}),
            enum_from(j.at("model"), {VarianceModel::near_maximum, VarianceModel::propagation}),
            j.at("n_total").get<std::uint64_t>(), j.at("s_magnitude").get<double>(), j.at("variance").get<double>()};
}

inline Json to_json(const EmpiricalVariance& v) {
    return {{"method", to_string(v.method)}, {"sign", to_string(v.sign)},   {"n_total", v.n_total},
            {"trials", v.trials},            {"mean", v.mean},              {"variance", v.variance},
            {"variance_stderr", v.variance_stderr}};
}

inline EmpiricalVariance empirical_from(const Json& j) {
    return {enum_from(j.at("method"), {Method::chsh, Method::simplified, Method::fringe}),
            enum_from(j.at("sign"), {Sign::plus, Sign::minus}),
            j.at("n_total").get<std::uint64_t>(),
            j.at("trials").get<std::uint64_t>(),
            j.at("mean").get<double>(),
            j.at("variance").get<double>(),
            j.at("variance_stderr").get<double>()};
}

inline Json to_json(const CrossoverTable& t) {
    Json rows = Json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"p", r.p},
                        {"s_prime", r.s_prime},
                        {"chsh", to_json(r.chsh)},
                        {"simplified", to_json(r.simplified)},
                        {"predicted_chsh", r.predicted_chsh},
                        {"derived_chsh", r.derived_chsh},
                        {"predicted_simplified", r.predicted_simplified},
                        {"derived_simplified", r.derived_simplified}});
    return {{"n_total", t.n_total},
            {"trials", t.trials},
            {"p_star", opt(t.p_star)},
            {"p_star_significant", opt(t.p_star_significant)},
            {"predicted_crossover_s_closed_form", t.predicted_crossover_s_closed_form},
            {"predicted_crossover_s_oracle", t.predicted_crossover_s_oracle},
            {"rows", rows}};
}

inline CrossoverTable crossover_from(const Json& j) {
    CrossoverTable t;
    t.n_total = j.at("n_total").get<std::uint64_t>();
    t.trials = j.at("trials").get<std::uint64_t>();
    t.p_star = opt_double(j.at("p_star"));
    t.p_star_significant = opt_double(j.at("p_star_significant"));
    t.predicted_crossover_s_closed_form = j.at("predicted_crossover_s_closed_form").get<double>();
    t.predicted_crossover_s_oracle = j.at("predicted_crossover_s_oracle").get<double>();
    for (const auto& r : j.at("rows")) {
        CrossoverRow row;
        row.p = r.at("p").get<double>();
        row.s_prime = r.at("s_prime").get<double>();
        row.chsh = empirical_from(r.at("chsh"));
        row.simplified = empirical_from(r.at("simplified"));
        row.predicted_chsh = r.at("predicted_chsh").get<double>();
        row.derived_chsh = r.at("derived_chsh").get<double>();
        row.predicted_simplified = r.at("predicted_simplified").get<double>();
        row.derived_simplified = r.at("derived_simplified").get<double>();
        t.rows.push_back(row);
    }
    return t;
}

}  // namespace detail

inline Json to_json(const Report& r) {
    Json j;
    j["schema_version"] = r.schema_version;
    j["command"] = r.command;
    j["state"] = r.state;
    j["estimates"] = Json::array();
    for (const auto& e : r.estimates) j["estimates"].push_back(detail::to_json(e));
    if (r.classification) {
        const auto& c = *r.classification;
        j["classification"] = {{"source", to_string(c.source)},
                               {"s_plus", c.s_plus},
                               {"s_minus", c.s_minus},
                               {"tol", c.tol},
                               {"state", c.state ? to_string(*c.state) : std::string("unclassified")}};
    } else {
        j["classification"] = nullptr;
    }
    j["predictions"] = Json::array();
    for (const auto& p : r.predictions) j["predictions"].push_back(detail::to_json(p));
    j["empirical"] = Json::array();
    for (const auto& v : r.empirical) j["empirical"].push_back(detail::to_json(v));
    j["crossover"] = r.crossover ? detail::to_json(*r.crossover) : Json(nullptr);
    j["notes"] = r.notes;
    j["provenance"] = {{"config_hash", r.provenance.config_hash},
                       {"seed", r.provenance.seed},
                       {"version", r.provenance.version}};
    return j;
}

inline Report report_from_json(const Json& j) {
    Report r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion)
        throw UsageError("report: unsupported schema_version " + std::to_string(r.schema_version));
    r.command = j.at("command").get<std::string>();
    r.state = j.at("state").get<std::string>();
    for (const auto& e : j.at("estimates")) r.estimates.push_back(detail::estimate_from(e));
    if (const auto& c = j.at("classification"); !c.is_null()) {
        Classification cl;
        cl.source = detail::enum_from(c.at("source"), {Method::chsh, Method::simplified, Method::fringe});
        cl.s_plus = c.at("s_plus").get<double>();
        cl.s_minus = c.at("s_minus").get<double>();
        cl.tol = c.at("tol").get<double>();
        const std::string s = c.at("state").get<std::string>();
        if (s != "unclassified") {
            cl.state = parse_bell_kind(s);
            if (!cl.state) throw UsageError("report: unknown classification '" + s + "'");
        }
        r.classification = cl;
    }
    for (const auto& p : j.at("predictions")) r.predictions.push_back(detail::prediction_from(p));
    for (const auto& v : j.at("empirical")) r.empirical.push_back(detail::empirical_from(v));
    if (const auto& c = j.at("crossover"); !c.is_null()) r.crossover = detail::crossover_from(c);
    r.notes = j.at("notes").get<std::vector<std::string>>();
    const auto& p = j.at("provenance");
    r.provenance = {p.at("config_hash").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                    p.at("version").get<std::string>()};
    return r;
}

inline Report read_report(std::istream& in) { return report_from_json(Json::parse(in)); }

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

inline void write_table(std::ostream& out, const Report& r) {
    out << "qbell report (schema " << r.schema_version << ", " << r.command << ")\n";
    out << "state: " << r.state << "\n";
    if (!r.estimates.empty()) {
        out << "\nestimates\n";
        out << pad("method", 12) << pad("sign", 7) << pad("value", 20) << pad("+/- std_error", 20) << "pairs\n";
        for (const auto& e : r.estimates)
            out << pad(std::string(to_string(e.method)), 12) << pad(std::string(to_string(e.sign)), 7)
                << pad(num(e.value), 20) << pad(num(e.std_error), 20) << e.pairs_used << "\n";
    }
    if (r.classification) {
        const auto& c = *r.classification;
        out << "\nclassification: "
            << (c.state ? std::string(table_label(*c.state)) + " (" + to_string(*c.state) + ")"
                        : std::string("unclassified"))
            << "\n  from " << to_string(c.source) << ": S+ = " << num(c.s_plus) << ", S- = " << num(c.s_minus)
            << ", tol = " << num(c.tol) << "\n";
    }
    if (!r.predictions.empty()) {
        out << "\nvariance predictions\n";
        out << pad("method", 12) << pad("model", 14) << pad("n_total", 10) << pad("|S'|", 20) << "variance\n";
        for (const auto& p : r.predictions)
            out << pad(std::string(to_string(p.method)), 12) << pad(std::string(to_string(p.model)), 14)
                << pad(std::to_string(p.n_total), 10) << pad(num(p.s_magnitude), 20) << num(p.variance) << "\n";
    }
    if (!r.empirical.empty()) {
        out << "\nempirical variances\n";
        out << pad("method", 12) << pad("sign", 7) << pad("n_total", 10) << pad("trials", 8) << pad("mean", 20)
            << pad("variance", 20) << "+/- stderr\n";
        for (const auto& v : r.empirical)
            out << pad(std::string(to_string(v.method)), 12) << pad(std::string(to_string(v.sign)), 7)
                << pad(std::to_string(v.n_total), 10) << pad(std::to_string(v.trials), 8) << pad(num(v.mean), 20)
                << pad(num(v.variance), 20) << num(v.variance_stderr) << "\n";
    }
    if (r.crossover) {
        const auto& t = *r.crossover;
        out << "\ncrossover scan (N = " << t.n_total << ", trials = " << t.trials << ")\n";
        out << pad("p", 8) << pad("S'", 20) << pad("var chsh", 20) << pad("+/-", 20) << pad("var two-set", 20)
            << pad("+/-", 20) << pad("4/N", 20) << pad("prop chsh", 20) << pad("16/N(1-S'/2r2)", 20)
            << "prop two-set\n";
        for (const auto& row : t.rows)
            out << pad(num(row.p), 8) << pad(num(row.s_prime), 20) << pad(num(row.chsh.variance), 20)
                << pad(num(row.chsh.variance_stderr), 20) << pad(num(row.simplified.variance), 20)
                << pad(num(row.simplified.variance_stderr), 20) << pad(num(row.predicted_chsh), 20)
                << pad(num(row.derived_chsh), 20) << pad(num(row.predicted_simplified), 20)
                << num(row.derived_simplified) << "\n";
        out << "empirical crossover p*: " << (t.p_star ? num(*t.p_star) : std::string("none"))
            << " (3-sigma: " << (t.p_star_significant ? num(*t.p_star_significant) : std::string("none")) << ")\n";
        out << "predicted crossover |S'|: " << num(t.predicted_crossover_s_closed_form) << " (near-maximum closed forms), "
            << num(t.predicted_crossover_s_oracle) << " (closed form vs propagated 8/N)\n";
    }
    for (const auto& n : r.notes) out << "note: " << n << "\n";
    out << "\nprovenance: config " << r.provenance.config_hash << ", seed " << r.provenance.seed << ", qbell "
        << r.provenance.version << "\n";
}

}  // namespace detail

inline void emit_report(const Report& r, ReportFormat format, std::ostream& out) {
    if (format == ReportFormat::json)
        out << to_json(r).dump(2) << '\n';
    else
        detail::write_table(out, r);
}

// Writes to `path`, or to stdout when path is empty or "-".
inline void emit_report(const Report& r, ReportFormat format, const std::string& path) {
    if (path.empty() || path == "-") {
        emit_report(r, format, std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    emit_report(r, format, out);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace qbell
