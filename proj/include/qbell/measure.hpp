#pragma once

// Measurement statistics: exact outcome probabilities, seeded multinomial
// sampling of coincidence counts, and the CHSH, two-setting and
// fringe-visibility Bell-parameter estimators.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qbell/bell_ops.hpp"
#include "qbell/core.hpp"
#include "qbell/rng.hpp"

namespace qbell {

// Tolerance for matching measured angles to a protocol's settings.
inline constexpr double kAngleTol = 1e-9;

struct AnalyzerSetting {
    double alpha = 0.0;  // Alice, analysis angle in radians
    double beta = 0.0;   // Bob

    bool matches(const AnalyzerSetting& o, double tol = kAngleTol) const noexcept {
        return std::abs(alpha - o.alpha) <= tol && std::abs(beta - o.beta) <= tol;
    }
    friend bool operator==(const AnalyzerSetting&, const AnalyzerSetting&) = default;
};

inline std::string to_string(const AnalyzerSetting& s) {
    return "(alpha=" + std::to_string(s.alpha) + ", beta=" + std::to_string(s.beta) + ")";
}

enum class Method { chsh, simplified, fringe };

inline std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::chsh: return "chsh";
        case Method::simplified: return "simplified";
        case Method::fringe: return "fringe";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view text) {
    for (Method m : {Method::chsh, Method::simplified, Method::fringe})
        if (text == to_string(m)) return m;
    return std::nullopt;
}

// Settings in protocol order; pair budgets are split in this order.
inline constexpr std::array<AnalyzerSetting, 4> kChshSettings{
    {{0.0, kPi / 8}, {0.0, 3 * kPi / 8}, {kPi / 4, kPi / 8}, {kPi / 4, 3 * kPi / 8}}};
inline constexpr std::array<AnalyzerSetting, 2> kSimplifiedSettings{{{0.0, 0.0}, {kPi / 4, kPi / 4}}};

// Joint outcome probabilities; first index Alice, second Bob, p = pass, m = reject.
struct OutcomeDistribution {
    double p_pp = 0, p_pm = 0, p_mp = 0, p_mm = 0;

    double correlation() const noexcept { return (p_pp + p_mm) - (p_pm + p_mp); }
    std::array<double, 4> as_array() const noexcept { return {p_pp, p_pm, p_mp, p_mm}; }
};

inline OutcomeDistribution outcome_probabilities(const DensityMatrix& rho, const AnalyzerSetting& setting) {
    std::array<double, 4> p{};
    int idx = 0;
    for (Outcome a : {Outcome::pass, Outcome::reject}) {
        for (Outcome b : {Outcome::pass, Outcome::reject}) {
            const Operator4 proj =
                tensor_product(polarizer_projector(setting.alpha, a), polarizer_projector(setting.beta, b));
            p[idx++] = (rho.matrix() * proj.matrix()).trace().real();
        }
    }
    // Remove rounding residue so that impossible outcomes are exactly impossible.
    double sum = 0.0;
    for (double& x : p) {
        if (x < 1e-15) x = 0.0;
        sum += x;
    }
    for (double& x : p) x /= sum;
    return {p[0], p[1], p[2], p[3]};
}

struct CoincidenceRecord {
    AnalyzerSetting setting;
    std::uint64_t n_pp = 0, n_pm = 0, n_mp = 0, n_mm = 0;

    std::uint64_t total() const noexcept { return n_pp + n_pm + n_mp + n_mm; }
    friend bool operator==(const CoincidenceRecord&, const CoincidenceRecord&) = default;
};

// Multinomial draw of n joint outcomes. Deterministic in (rho, setting, n, stream).
inline CoincidenceRecord sample_coincidences(const OutcomeDistribution& dist, const AnalyzerSetting& setting,
                                             std::uint64_t n, const RngStream& stream) {
    if (n == 0) throw UsageError("sample_coincidences: n must be at least 1");
    const auto p = dist.as_array();
    std::array<double, 4> cum{};
    double acc = 0.0;
    int last = 0;
    for (int k = 0; k < 4; ++k) {
        acc += p[k];
        cum[k] = acc;
        if (p[k] > 0.0) last = k;
    }
    // u < cum[k] with u >= cum[k-1] implies p[k] > 0; capping at `last` keeps
    // rounding in the final cumulative sum from selecting an impossible outcome.
    std::array<std::uint64_t, 4> counts{};
    auto engine = stream.engine();
    for (std::uint64_t i = 0; i < n; ++i) {
        const double u = engine.uniform();
        int k = 0;
        while (k < last && u >= cum[k]) ++k;
        ++counts[k];
    }
    return {setting, counts[0], counts[1], counts[2], counts[3]};
}

inline CoincidenceRecord sample_coincidences(const DensityMatrix& rho, const AnalyzerSetting& setting,
                                             std::uint64_t n, const RngStream& stream) {
    return sample_coincidences(outcome_probabilities(rho, setting), setting, n, stream);
}

// A correlation coefficient at one setting, with its first-order standard error.
// pairs == 0 marks an exact (infinite-N) value.
struct CorrelationMeasurement {
    AnalyzerSetting setting;
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t pairs = 0;
};

// E = (n_pp + n_mm - n_pm - n_mp) / N, stderr = sqrt((1 - E^2) / N).
inline CorrelationMeasurement correlation_from_counts(const CoincidenceRecord& rec) {
    const std::uint64_t n = rec.total();
    if (n == 0) throw UsageError("correlation_from_counts: record at " + to_string(rec.setting) + " has no counts");
    const double nn = static_cast<double>(n);
    const double e = (static_cast<double>(rec.n_pp + rec.n_mm) - static_cast<double>(rec.n_pm + rec.n_mp)) / nn;
    return {rec.setting, e, std::sqrt(std::max(0.0, 1.0 - e * e) / nn), n};
}

inline CorrelationMeasurement exact_correlation(const DensityMatrix& rho, const AnalyzerSetting& setting) {
    return {setting, outcome_probabilities(rho, setting).correlation(), 0.0, 0};
}

struct BellEstimate {
    double value = 0.0;
    double std_error = 0.0;
    Sign sign = Sign::plus;
    Method method = Method::chsh;
    std::uint64_t pairs_used = 0;

    friend bool operator==(const BellEstimate&, const BellEstimate&) = default;
};

// Splits a total pair budget equally over k settings; the remainder goes to
// the earliest settings.
inline std::vector<std::uint64_t> split_pairs(std::uint64_t n_total, std::size_t k) {
    if (k == 0) throw UsageError("split_pairs: no settings");
    std::vector<std::uint64_t> out(k, n_total / k);
    for (std::size_t i = 0; i < n_total % k; ++i) ++out[i];
    return out;
}

namespace detail {

// Orders measurements to match `required`, rejecting missing, duplicate and
// unexpected settings.
template <std::size_t K>
std::array<CorrelationMeasurement, K> match_settings(std::span<const CorrelationMeasurement> ms,
                                                      const std::array<AnalyzerSetting, K>& required,
                                                      std::string_view who) {
    std::array<CorrelationMeasurement, K> out{};
    std::array<bool, K> seen{};
    for (const CorrelationMeasurement& m : ms) {
        bool placed = false;
        for (std::size_t i = 0; i < K; ++i) {
            if (!m.setting.matches(required[i])) continue;
            if (seen[i]) throw UsageError(std::string(who) + ": duplicate setting " + to_string(required[i]));
            seen[i] = true;
            out[i] = m;
            placed = true;
        }
        if (!placed) throw UsageError(std::string(who) + ": unexpected setting " + to_string(m.setting));
    }
    for (std::size_t i = 0; i < K; ++i)
        if (!seen[i]) throw UsageError(std::string(who) + ": missing setting " + to_string(required[i]));
    return out;
}

inline std::vector<CorrelationMeasurement> correlations(std::span<const CoincidenceRecord> records) {
    std::vector<CorrelationMeasurement> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(correlation_from_counts(r));
    return out;
}

inline BellEstimate checked(BellEstimate e) {
    if (!(std::abs(e.value) <= 4.0 + kStateTol) || !std::isfinite(e.std_error))
        throw UsageError("estimate out of the algebraic range |S| <= 4");
    return e;
}

}  // namespace detail

// S = ±(E11 - E12) + E21 + E22 with independent-setting error propagation.
inline BellEstimate estimate_chsh(std::span<const CorrelationMeasurement> ms, Sign sign) {
    const auto e = detail::match_settings(ms, kChshSettings, "estimate_chsh");
    const double s = sign_factor(sign);
    double var = 0.0;
    std::uint64_t pairs = 0;
    for (const auto& m : e) {
        var += m.std_error * m.std_error;
        pairs += m.pairs;
    }
    return detail::checked(
        {s * (e[0].value - e[1].value) + e[2].value + e[3].value, std::sqrt(var), sign, Method::chsh, pairs});
}

inline BellEstimate estimate_chsh(std::span<const CoincidenceRecord> records, Sign sign) {
    const auto ms = detail::correlations(records);
    return estimate_chsh(std::span<const CorrelationMeasurement>(ms), sign);
}

// S' = √2 (±E(0,0) + E(π/4,π/4)).
inline BellEstimate estimate_simplified(std::span<const CorrelationMeasurement> ms, Sign sign) {
    const auto e = detail::match_settings(ms, kSimplifiedSettings, "estimate_simplified");
    const double s = sign_factor(sign);
    const double se = kSqrt2 * std::hypot(e[0].std_error, e[1].std_error);
    return detail::checked(
        {kSqrt2 * (s * e[0].value + e[1].value), se, sign, Method::simplified, e[0].pairs + e[1].pairs});
}

inline BellEstimate estimate_simplified(std::span<const CoincidenceRecord> records, Sign sign) {
    const auto ms = detail::correlations(records);
    return estimate_simplified(std::span<const CorrelationMeasurement>(ms), sign);
}

// Coincidence fractions keyed by (Alice letter, Bob letter), within-basis only.
using CoincidenceFractions = std::map<std::pair<Pol, Pol>, double>;

inline constexpr std::array<std::pair<Pol, Pol>, 4> kHvPairs{
    {{Pol::h, Pol::h}, {Pol::h, Pol::v}, {Pol::v, Pol::h}, {Pol::v, Pol::v}}};
inline constexpr std::array<std::pair<Pol, Pol>, 4> kStPairs{
    {{Pol::s, Pol::s}, {Pol::s, Pol::t}, {Pol::t, Pol::s}, {Pol::t, Pol::t}}};

inline CoincidenceFractions coincidence_fractions(const DensityMatrix& rho) {
    CoincidenceFractions f;
    for (const auto& pairs : {kHvPairs, kStPairs})
        for (const auto& [a, b] : pairs) f[{a, b}] = expectation(rho, coincidence_operator(a, b));
    return f;
}

// S'/√2 = ±(f_hh + f_vv - f_hv - f_vh) + (f_ss + f_tt - f_st - f_ts).
inline double bell_from_fractions(const CoincidenceFractions& f, Sign sign) {
    auto get = [&](Pol a, Pol b) {
        auto it = f.find({a, b});
        if (it == f.end()) throw UsageError("bell_from_fractions: missing fraction");
        return it->second;
    };
    double hv_sum = 0.0, st_sum = 0.0;
    for (const auto& [a, b] : kHvPairs) hv_sum += get(a, b);
    for (const auto& [a, b] : kStPairs) st_sum += get(a, b);
    if (std::abs(hv_sum - 1.0) > kStateTol || std::abs(st_sum - 1.0) > kStateTol)
        throw UsageError("bell_from_fractions: fractions in each basis must sum to 1");

    using P = Pol;
    const double hv = get(P::h, P::h) + get(P::v, P::v) - get(P::h, P::v) - get(P::v, P::h);
    const double st = get(P::s, P::s) + get(P::t, P::t) - get(P::s, P::t) - get(P::t, P::s);
    return kSqrt2 * (sign_factor(sign) * hv + st);
}

// ---------------------------------------------------------------------------
// Fringe visibility
//
// For Alice fixed at alpha in {0, π/4}, E(alpha, beta) is scanned over a grid
// of beta values and fitted by linear least squares to a cos2β + b sin2β. The
// visibility V_alpha is the fitted component in phase with cos 2(alpha - beta),
// i.e. a cos2α + b sin2α, so an anticorrelated fringe gives V < 0. The
// estimate is 2√2 (V_0 + V_{π/4}) / 2.
//
// This "2√2 x mean visibility" formula is an interpretation of the
// fringe-visibility method and is meaningful only for rotationally symmetric
// states whose correlation varies sinusoidally with beta.

inline constexpr std::array<double, 2> kFringeAlphas{0.0, kPi / 4};
inline constexpr std::size_t kFringeMinPoints = 8;

// k * π / (points - 1) for k = 0 .. points-1, spanning exactly π.
inline std::vector<double> default_beta_grid(std::size_t points = 17) {
    if (points < 2) throw UsageError("default_beta_grid: need at least 2 points");
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) grid[k] = kPi * static_cast<double>(k) / static_cast<double>(points - 1);
    return grid;
}

inline void validate_beta_grid(std::span<const double> grid) {
    if (grid.size() < kFringeMinPoints)
        throw UsageError("fringe: beta grid needs at least " + std::to_string(kFringeMinPoints) + " points");
    double lo = grid[0], hi = grid[0];
    for (double b : grid) {
        if (!std::isfinite(b)) throw UsageError("fringe: non-finite beta");
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    if (hi - lo < kPi - kAngleTol) throw UsageError("fringe: beta grid must span at least pi");
}

namespace detail {

struct FringeFit {
    double visibility;
    double std_error;
};

inline FringeFit fit_fringe(double alpha, std::span<const CorrelationMeasurement> scan) {
    double cc = 0, cs = 0, ss = 0;
    for (const auto& m : scan) {
        const double c = std::cos(2 * m.setting.beta), s = std::sin(2 * m.setting.beta);
        cc += c * c;
        cs += c * s;
        ss += s * s;
    }
    const double det = cc * ss - cs * cs;
    if (!(det > 1e-9 * (cc + ss) * (cc + ss))) throw UsageError("fringe: degenerate beta grid");
    // V = w . E with w_k = c^T (A^T A)^{-1} (cos2β_k, sin2β_k), c = (cos2α, sin2α).
    const double ca = std::cos(2 * alpha), sa = std::sin(2 * alpha);
    const double u = (ss * ca - cs * sa) / det;
    const double v = (cc * sa - cs * ca) / det;
    double vis = 0, var = 0;
    for (const auto& m : scan) {
        const double w = u * std::cos(2 * m.setting.beta) + v * std::sin(2 * m.setting.beta);
        vis += w * m.value;
        var += w * w * m.std_error * m.std_error;
    }
    return {vis, std::sqrt(var)};
}

}  // namespace detail

// Fringe estimate from a beta scan at alpha = 0 and alpha = π/4. Every
// measurement must belong to one of the two scans.
inline BellEstimate estimate_fringe(std::span<const CorrelationMeasurement> ms) {
    std::array<std::vector<CorrelationMeasurement>, 2> scans;
    for (const auto& m : ms) {
        bool placed = false;
        for (std::size_t a = 0; a < 2; ++a) {
            if (std::abs(m.setting.alpha - kFringeAlphas[a]) <= kAngleTol) {
                scans[a].push_back(m);
                placed = true;
            }
        }
        if (!placed) throw UsageError("estimate_fringe: unexpected alpha in " + to_string(m.setting));
    }
    double sum = 0, var = 0;
    std::uint64_t pairs = 0;
    for (std::size_t a = 0; a < 2; ++a) {
        std::vector<double> betas;
        for (const auto& m : scans[a]) {
            betas.push_back(m.setting.beta);
            pairs += m.pairs;
        }
        validate_beta_grid(betas);
        const auto fit = detail::fit_fringe(kFringeAlphas[a], scans[a]);
        sum += fit.visibility;
        var += fit.std_error * fit.std_error;
    }
    // value = √2 (V0 + V1), so se = √2 sqrt(var0 + var1).
    return detail::checked({kSqrt2 * sum, kSqrt2 * std::sqrt(var), Sign::plus, Method::fringe, pairs});
}

inline BellEstimate estimate_fringe(std::span<const CoincidenceRecord> records) {
    const auto ms = detail::correlations(records);
    return estimate_fringe(std::span<const CorrelationMeasurement>(ms));
}

inline std::vector<AnalyzerSetting> fringe_settings(std::span<const double> beta_grid) {
    std::vector<AnalyzerSetting> out;
    for (double alpha : kFringeAlphas)
        for (double beta : beta_grid) out.push_back({alpha, beta});
    return out;
}

// Sampled fringe estimate: pairs_per_point pairs at every (alpha, beta) point.
inline BellEstimate estimate_fringe_visibility(const DensityMatrix& rho, std::uint64_t pairs_per_point,
                                               std::span<const double> beta_grid, const RngStream& stream) {
    validate_beta_grid(beta_grid);
    if (pairs_per_point == 0) throw UsageError("fringe: pairs_per_point must be at least 1");
    const auto settings = fringe_settings(beta_grid);
    std::vector<CoincidenceRecord> records;
    for (std::size_t i = 0; i < settings.size(); ++i)
        records.push_back(sample_coincidences(rho, settings[i], pairs_per_point, stream.child(i)));
    return estimate_fringe(std::span<const CoincidenceRecord>(records));
}

// Exact-probability fringe estimate (infinite pairs per point).
inline BellEstimate estimate_fringe_visibility(const DensityMatrix& rho, std::span<const double> beta_grid) {
    validate_beta_grid(beta_grid);
    std::vector<CorrelationMeasurement> ms;
    for (const auto& s : fringe_settings(beta_grid)) ms.push_back(exact_correlation(rho, s));
    return estimate_fringe(std::span<const CorrelationMeasurement>(ms));
}

// ---------------------------------------------------------------------------
// Protocol runs

inline std::vector<AnalyzerSetting> protocol_settings(Method method, std::span<const double> beta_grid = {}) {
    switch (method) {
        case Method::chsh: return {kChshSettings.begin(), kChshSettings.end()};
        case Method::simplified: return {kSimplifiedSettings.begin(), kSimplifiedSettings.end()};
        case Method::fringe: return fringe_settings(beta_grid);
    }
    return {};
}

// Precomputed outcome distributions for every setting of a protocol, so that
// repeated trials only pay for sampling.
struct Protocol {
    Method method;
    std::vector<AnalyzerSetting> settings;
    std::vector<OutcomeDistribution> distributions;

    Protocol(Method m, const DensityMatrix& rho, std::span<const double> beta_grid = {})
        : method(m), settings(protocol_settings(m, beta_grid)) {
        if (m == Method::fringe) validate_beta_grid(beta_grid);
        for (const auto& s : settings) distributions.push_back(outcome_probabilities(rho, s));
    }

    // Splits n_total pairs over the settings and samples setting i from stream.child(i).
    std::vector<CoincidenceRecord> sample(std::uint64_t n_total, const RngStream& stream) const {
        if (n_total < settings.size())
            throw UsageError(std::string(to_string(method)) + ": needs at least " + std::to_string(settings.size()) +
                             " pairs");
        const auto budget = split_pairs(n_total, settings.size());
        std::vector<CoincidenceRecord> out;
        out.reserve(settings.size());
        for (std::size_t i = 0; i < settings.size(); ++i)
            out.push_back(sample_coincidences(distributions[i], settings[i], budget[i], stream.child(i)));
        return out;
    }

    std::vector<CorrelationMeasurement> exact() const {
        std::vector<CorrelationMeasurement> out;
        for (std::size_t i = 0; i < settings.size(); ++i)
            out.push_back({settings[i], distributions[i].correlation(), 0.0, 0});
        return out;
    }
};

inline BellEstimate estimate(Method method, std::span<const CorrelationMeasurement> ms, Sign sign) {
    switch (method) {
        case Method::chsh: return estimate_chsh(ms, sign);
        case Method::simplified: return estimate_simplified(ms, sign);
        case Method::fringe: return estimate_fringe(ms);
    }
    throw UsageError("unknown method");
}

inline BellEstimate estimate(Method method, std::span<const CoincidenceRecord> records, Sign sign) {
    const auto ms = detail::correlations(records);
    return estimate(method, std::span<const CorrelationMeasurement>(ms), sign);
}

}  // namespace qbell
