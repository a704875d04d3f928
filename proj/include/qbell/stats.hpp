#pragma once

// Variance of the Bell-parameter estimators: closed-form predictions,
// first-order propagation, and Monte Carlo measurement over seeded trials.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "qbell/measure.hpp"

namespace qbell {

// Where a predicted variance comes from.
//   near_maximum: the closed forms 4/N (CHSH) and (16/N)(1 - |S'|/2√2)
//                 (two-setting), first order in 1/N and derived for |S| near 2√2.
//   propagation:  first-order propagation of the per-setting binomial errors
//                 of E through the estimator, for the actual state.
enum class VarianceModel { near_maximum, propagation };

inline std::string_view to_string(VarianceModel m) noexcept {
    return m == VarianceModel::near_maximum ? "near_maximum" : "propagation";
}

struct VariancePrediction {
    Method method = Method::chsh;
    VarianceModel model = VarianceModel::near_maximum;
    std::uint64_t n_total = 0;
    double s_magnitude = 0.0;  // |S'| used by the two-setting closed form; 0 otherwise
    double variance = 0.0;

    friend bool operator==(const VariancePrediction&, const VariancePrediction&) = default;
};

inline constexpr double kTwoSettingCrossoverS = 0.75 * kTsirelson;  // 2.1213...

// (ΔS)^2 = 4/N.
inline VariancePrediction predicted_variance_chsh(std::uint64_t n_total) {
    if (n_total < 1) throw UsageError("predicted_variance_chsh: n_total must be at least 1");
    return {Method::chsh, VarianceModel::near_maximum, n_total, 0.0, 4.0 / static_cast<double>(n_total)};
}

// (ΔS')^2 = (16/N)(1 - |S'|/2√2).
inline VariancePrediction predicted_variance_simplified(std::uint64_t n_total, double s_magnitude) {
    if (n_total < 1) throw UsageError("predicted_variance_simplified: n_total must be at least 1");
    if (!(s_magnitude >= 0.0 && s_magnitude <= kTsirelson + kAlgebraTol))
        throw UsageError("predicted_variance_simplified: |S'| must lie in [0, 2*sqrt(2)]");
    const double s = std::min(s_magnitude, kTsirelson);
    const double var = 16.0 / static_cast<double>(n_total) * (1.0 - s / kTsirelson);
    return {Method::simplified, VarianceModel::near_maximum, n_total, s, std::max(0.0, var)};
}

namespace detail {

// Σ_i c_i^2 (1 - E_i^2) / n_i over a protocol's settings under the equal split.
inline double propagate(Method method, const DensityMatrix& rho, std::uint64_t n_total, double coeff_sq) {
    const Protocol proto(method, rho);
    if (n_total < proto.settings.size())
        throw UsageError(std::string(to_string(method)) + ": n_total must be at least " +
                         std::to_string(proto.settings.size()));
    const auto budget = split_pairs(n_total, proto.settings.size());
    double var = 0.0;
    for (std::size_t i = 0; i < proto.settings.size(); ++i) {
        const double e = proto.distributions[i].correlation();
        var += coeff_sq * (1.0 - e * e) / static_cast<double>(budget[i]);
    }
    return var;
}

}  // namespace detail

// First-order CHSH variance, Σ_ij (1 - E_ij^2) / n_ij; equals (4/N) Σ (1 - E^2)
// when N is a multiple of 4.
inline double derived_variance_chsh(const DensityMatrix& rho, std::uint64_t n_total) {
    return detail::propagate(Method::chsh, rho, n_total, 1.0);
}

// First-order two-setting variance, 2 Σ_i (1 - E_i^2) / n_i.
inline double derived_variance_simplified(const DensityMatrix& rho, std::uint64_t n_total) {
    return detail::propagate(Method::simplified, rho, n_total, 2.0);
}

// p |Phi+><Phi+| + (1 - p) I/4.
inline DensityMatrix werner_state(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("werner_state: p must lie in [0, 1]");
    const DensityMatrix phi = pure_to_density(bell_state(kPhiPlus, Basis::HV));
    return validate_density(p * phi.matrix() + (1.0 - p) * DensityMatrix::maximally_mixed().matrix());
}

struct EmpiricalVariance {
    Method method = Method::chsh;
    Sign sign = Sign::plus;
    std::uint64_t n_total = 0;
    std::uint64_t trials = 0;
    double mean = 0.0;
    double variance = 0.0;         // unbiased, (trials - 1) normalizer
    double variance_stderr = 0.0;  // normal-theory: variance * sqrt(2 / (trials - 1))

    double mean_stderr() const { return std::sqrt(variance / static_cast<double>(trials)); }

    friend bool operator==(const EmpiricalVariance&, const EmpiricalVariance&) = default;
};

// Mean and unbiased variance. Values are shifted by the first sample, so a
// constant sequence has variance exactly 0.
inline std::pair<double, double> sample_mean_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw UsageError("sample_mean_variance: need at least 2 samples");
    const double shift = xs[0];
    double sum = 0.0;
    for (double x : xs) sum += x - shift;
    const double n = static_cast<double>(xs.size());
    const double mean_d = sum / n;
    double ss = 0.0;
    for (double x : xs) {
        const double d = (x - shift) - mean_d;
        ss += d * d;
    }
    return {shift + mean_d, ss / (n - 1.0)};
}

struct MonteCarloOptions {
    Sign sign = Sign::plus;
    std::vector<double> beta_grid = default_beta_grid();  // fringe only
    unsigned threads = 0;                                  // 0 = hardware concurrency
};

// Runs `trials` independent estimates; trial t samples from stream.child(t).
// The per-trial values are identical for any thread count.
inline std::vector<double> monte_carlo_estimates(Method method, const DensityMatrix& rho, std::uint64_t n_total,
                                                 std::uint64_t trials, const RngStream& stream,
                                                 const MonteCarloOptions& opt = {}) {
    const Protocol proto(method, rho, opt.beta_grid);
    if (n_total < proto.settings.size())
        throw UsageError(std::string(to_string(method)) + ": n_total must be at least " +
                         std::to_string(proto.settings.size()));
    std::vector<double> values(trials);
    auto run = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            const auto records = proto.sample(n_total, stream.child(t));
            values[t] = estimate(method, std::span<const CoincidenceRecord>(records), opt.sign).value;
        }
    };
    unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(trials, 1)));
    if (workers <= 1) {
        run(0, trials);
        return values;
    }
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (trials + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t b = std::min<std::uint64_t>(trials, w * chunk);
        const std::uint64_t e = std::min<std::uint64_t>(trials, b + chunk);
        if (b < e) pool.emplace_back(run, b, e);
    }
    pool.clear();  // joins
    return values;
}

inline EmpiricalVariance empirical_variance(Method method, const DensityMatrix& rho, std::uint64_t n_total,
                                            std::uint64_t trials, const RngStream& stream,
                                            const MonteCarloOptions& opt = {}) {
    if (trials < 2) throw UsageError("empirical_variance: trials must be at least 2");
    const auto values = monte_carlo_estimates(method, rho, n_total, trials, stream, opt);
    const auto [mean, var] = sample_mean_variance(values);
    const double var_se = var * std::sqrt(2.0 / static_cast<double>(trials - 1));
    const Sign sign = method == Method::fringe ? Sign::plus : opt.sign;
    return {method, sign, n_total, trials, mean, var, var_se};
}

// ---------------------------------------------------------------------------
// Crossover scan over the Werner family

struct CrossoverRow {
    double p = 0.0;
    double s_prime = 0.0;  // exact Tr(rho S'+) = 2√2 p
    EmpiricalVariance chsh;
    EmpiricalVariance simplified;
    double predicted_chsh = 0.0;        // 4/N
    double derived_chsh = 0.0;          // propagation
    double predicted_simplified = 0.0;  // (16/N)(1 - |S'|/2√2)
    double derived_simplified = 0.0;    // propagation

    // Standard error of (chsh variance - simplified variance).
    double combined_stderr() const { return std::hypot(chsh.variance_stderr, simplified.variance_stderr); }
    // Two-setting variance below CHSH by more than `k` combined standard errors.
    bool simplified_smaller(double k = 3.0) const {
        return chsh.variance - simplified.variance > k * combined_stderr();
    }

    friend bool operator==(const CrossoverRow&, const CrossoverRow&) = default;
};

struct CrossoverTable {
    std::uint64_t n_total = 0;
    std::uint64_t trials = 0;
    std::vector<CrossoverRow> rows;
    // First grid p (ascending) where the empirical two-setting variance is below CHSH.
    std::optional<double> p_star;
    // Same, but requiring a 3-standard-error margin.
    std::optional<double> p_star_significant;
    // |S'| where the near-maximum closed forms cross: 3/4 * 2√2 ≈ 2.12.
    double predicted_crossover_s_closed_form = kTwoSettingCrossoverS;
    // |S'| where (16/N)(1 - |S'|/2√2) meets the propagated CHSH maximum 8/N: √2.
    double predicted_crossover_s_oracle = kSqrt2;

    friend bool operator==(const CrossoverTable&, const CrossoverTable&) = default;
};

// Grid point i uses stream.child(i); within it, CHSH and two-setting trials use
// children 0 and 1.
inline CrossoverTable crossover_scan(std::uint64_t n_total, std::uint64_t trials, std::span<const double> p_grid,
                                     const RngStream& stream, unsigned threads = 0) {
    if (p_grid.empty()) throw UsageError("crossover_scan: empty p grid");
    for (double p : p_grid)
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError("crossover_scan: p grid must lie within [0, 1]");
    if (n_total < 4) throw UsageError("crossover_scan: n_total must be at least 4");

    std::vector<double> grid(p_grid.begin(), p_grid.end());
    std::sort(grid.begin(), grid.end());

    CrossoverTable table;
    table.n_total = n_total;
    table.trials = trials;
    MonteCarloOptions opt;
    opt.threads = threads;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = grid[i];
        const DensityMatrix rho = werner_state(p);
        CrossoverRow row;
        row.p = p;
        row.s_prime = expectation(rho, simplified_operator(Sign::plus));
        const RngStream point = stream.child(i);
        row.chsh = empirical_variance(Method::chsh, rho, n_total, trials, point.child(0), opt);
        row.simplified = empirical_variance(Method::simplified, rho, n_total, trials, point.child(1), opt);
        row.predicted_chsh = predicted_variance_chsh(n_total).variance;
        row.derived_chsh = derived_variance_chsh(rho, n_total);
        row.predicted_simplified =
            predicted_variance_simplified(n_total, std::min(std::abs(row.s_prime), kTsirelson)).variance;
        row.derived_simplified = derived_variance_simplified(rho, n_total);
        if (!table.p_star && row.simplified.variance < row.chsh.variance) table.p_star = p;
        if (!table.p_star_significant && row.simplified_smaller()) table.p_star_significant = p;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace qbell
