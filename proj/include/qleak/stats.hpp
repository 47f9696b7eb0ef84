#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qleak/rng.hpp"

namespace qleak {

/// Box-filter fences, frozen from the data they were computed on.
struct FilterSpec {
    double k;
    double q1;
    double q3;
    double iqr;

    double lower() const { return q1 - k * iqr; }
    double upper() const { return q3 + k * iqr; }
};

struct BoxFilterResult {
    std::vector<double> kept;
    std::vector<double> outliers;
    FilterSpec spec;
};

/// Linear-interpolation quantile at position (n-1)*q over the sorted data
/// (the "type 7" convention).
inline double quantile_type7(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Partition by the closed interval [Q1 - K*IQR, Q3 + K*IQR], preserving the
/// input order within each part.
inline BoxFilterResult box_filter(const std::vector<double>& samples, double k) {
    if (samples.size() < 4) throw std::invalid_argument("box_filter: need at least 4 samples");
    if (!(k > 0.0)) throw std::invalid_argument("box_filter: K must be positive");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_type7(sorted, 0.25);
    const double q3 = quantile_type7(sorted, 0.75);
    const FilterSpec spec{k, q1, q3, q3 - q1};
    BoxFilterResult out{{}, {}, spec};
    for (double x : samples) {
        if (x >= spec.lower() && x <= spec.upper())
            out.kept.push_back(x);
        else
            out.outliers.push_back(x);
    }
    return out;
}

struct WelchResult {
    double statistic;
    double df;       // Welch-Satterthwaite
    double p_value;  // one-tailed, H1: mean_a > mean_b, normal tail
};

namespace detail {

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace detail

/// One-tailed Welch's t-test for H1: mean(a) > mean(b). The p-value uses the
/// standard-normal tail (group sizes here are in the hundreds); the
/// Welch-Satterthwaite df is reported alongside.
inline WelchResult welch_one_tailed(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("welch_one_tailed: need at least 2 samples per group");
    const double ma = detail::mean(a);
    const double mb = detail::mean(b);
    const double va = detail::sample_variance(a, ma);
    const double vb = detail::sample_variance(b, mb);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) throw std::invalid_argument("welch_one_tailed: both variances are zero");
    const double statistic = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 /
                      ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    const double p = 0.5 * std::erfc(statistic / std::sqrt(2.0));
    return WelchResult{statistic, df, p};
}

struct FitPoint {
    double n_shots;
    double mean;
    double stderr_mean;
};

struct AnsatzCoefficients {
    double eta;        // bits, the N_S -> infinity intercept
    double eta_shots;  // bits * sqrt(shots)
};

/// Weighted linear least squares for mean = eta + eta_shots / sqrt(N_S), with
/// weights 1/stderr^2, via the closed-form normal equations.
inline AnsatzCoefficients fit_shot_ansatz(const std::vector<FitPoint>& points) {
    if (points.size() < 2) throw std::invalid_argument("fit_shot_ansatz: need at least 2 points");
    double s_ww = 0.0, s_wx = 0.0, s_wxx = 0.0, s_wy = 0.0, s_wxy = 0.0;
    double first_x = -1.0;
    bool distinct = false;
    for (const auto& p : points) {
        if (!(p.n_shots > 0.0)) throw std::invalid_argument("fit_shot_ansatz: nonpositive N_S");
        if (!(p.stderr_mean > 0.0)) throw std::invalid_argument("fit_shot_ansatz: nonpositive stderr");
        const double x = 1.0 / std::sqrt(p.n_shots);
        const double w = 1.0 / (p.stderr_mean * p.stderr_mean);
        if (first_x < 0.0)
            first_x = x;
        else if (x != first_x)
            distinct = true;
        s_ww += w;
        s_wx += w * x;
        s_wxx += w * x * x;
        s_wy += w * p.mean;
        s_wxy += w * x * p.mean;
    }
    if (!distinct) throw std::invalid_argument("fit_shot_ansatz: all N_S values equal");
    const double det = s_ww * s_wxx - s_wx * s_wx;
    return AnsatzCoefficients{(s_wxx * s_wy - s_wx * s_wxy) / det,
                              (s_ww * s_wxy - s_wx * s_wy) / det};
}

struct FitResult {
    double eta;
    double eta_shots;
    double eta_stderr;
    double eta_shots_stderr;
    std::size_t n_boot;
};

/// Bootstrap standard errors: each point's mean is redrawn from
/// Normal(mean, stderr), the ansatz refit, and the parameter standard
/// deviations across replicas reported.
inline FitResult bootstrap_fit(const std::vector<FitPoint>& points, std::size_t n_boot, Rng& rng) {
    if (n_boot < 100) throw std::invalid_argument("bootstrap_fit: n_boot must be >= 100");
    const AnsatzCoefficients base = fit_shot_ansatz(points);

    std::normal_distribution<double> normal(0.0, 1.0);
    double s_eta = 0.0, s_eta2 = 0.0, s_sh = 0.0, s_sh2 = 0.0;
    std::vector<FitPoint> replica = points;
    for (std::size_t r = 0; r < n_boot; ++r) {
        for (std::size_t i = 0; i < points.size(); ++i)
            replica[i].mean = points[i].mean + points[i].stderr_mean * normal(rng);
        const AnsatzCoefficients fit = fit_shot_ansatz(replica);
        s_eta += fit.eta;
        s_eta2 += fit.eta * fit.eta;
        s_sh += fit.eta_shots;
        s_sh2 += fit.eta_shots * fit.eta_shots;
    }
    const double nb = static_cast<double>(n_boot);
    const double var_eta = std::max(0.0, (s_eta2 - s_eta * s_eta / nb) / (nb - 1.0));
    const double var_sh = std::max(0.0, (s_sh2 - s_sh * s_sh / nb) / (nb - 1.0));
    return FitResult{base.eta, base.eta_shots, std::sqrt(var_eta), std::sqrt(var_sh), n_boot};
}

/// Left-closed right-open bins of the given width; bin edges are aligned to
/// integer multiples of the width.
inline std::vector<std::pair<double, std::uint64_t>> histogram_fixed_width(
    const std::vector<double>& samples, double bin_width) {
    if (samples.empty()) throw std::invalid_argument("histogram: no samples");
    if (!(bin_width > 0.0)) throw std::invalid_argument("histogram: nonpositive bin width");
    const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const auto first_bin = static_cast<std::int64_t>(std::floor(*mn_it / bin_width));
    const auto last_bin = static_cast<std::int64_t>(std::floor(*mx_it / bin_width));
    std::vector<std::pair<double, std::uint64_t>> bins;
    for (std::int64_t b = first_bin; b <= last_bin; ++b)
        bins.emplace_back(static_cast<double>(b) * bin_width, 0);
    for (double x : samples) {
        auto b = static_cast<std::int64_t>(std::floor(x / bin_width));
        bins[static_cast<std::size_t>(b - first_bin)].second += 1;
    }
    return bins;
}

/// Bins chosen to cover [min, max] with the requested count; the maximum lands
/// in the last bin.
inline std::vector<std::pair<double, std::uint64_t>> histogram_bin_count(
    const std::vector<double>& samples, std::size_t bin_count) {
    if (samples.empty()) throw std::invalid_argument("histogram: no samples");
    if (bin_count == 0) throw std::invalid_argument("histogram: zero bin count");
    const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const double mn = *mn_it;
    const double mx = *mx_it;
    if (mx == mn) return {{mn, samples.size()}};
    const double width = (mx - mn) / static_cast<double>(bin_count);
    std::vector<std::pair<double, std::uint64_t>> bins;
    for (std::size_t b = 0; b < bin_count; ++b)
        bins.emplace_back(mn + static_cast<double>(b) * width, 0);
    for (double x : samples) {
        auto b = static_cast<std::size_t>((x - mn) / width);
        if (b >= bin_count) b = bin_count - 1;
        bins[b].second += 1;
    }
    return bins;
}

}  // namespace qleak
