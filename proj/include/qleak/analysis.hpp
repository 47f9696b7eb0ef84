#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qleak/archive.hpp"
#include "qleak/rng.hpp"
#include "qleak/stats.hpp"

namespace qleak {

struct AnalysisOptions {
    double filter_k = 4.0;
    double bad_qubit_threshold = 0.12;  // reporting only, never filtering
    std::size_t n_boot = 1000;
    std::size_t histogram_bins = 40;
    std::uint64_t bootstrap_seed = 0x51a75b00757ULL;  // fixed so reports are reproducible
};

struct StratumStats {
    std::string kind;
    std::uint64_t n_shots = 0;
    std::size_t n_samples = 0;
    std::size_t n_kept = 0;
    std::size_t n_outliers = 0;
    std::optional<FilterSpec> filter;
    double mean = 0.0;
    double stderr_mean = 0.0;
    std::vector<double> kept;
    std::vector<std::pair<double, std::uint64_t>> histogram;
    std::string note;  // set when the stratum could not be analyzed
};

struct BadQubitReport {
    std::size_t sample_index;
    std::string device_label;
    std::size_t target;
    std::uint64_t n_shots;
    double delta_chi;
};

struct KindFit {
    std::string kind;
    FitResult fit{};
    bool available = false;
    std::string note;
};

struct WelchEntry {
    std::uint64_t n_shots;
    WelchResult result;
};

struct AnalysisReport {
    AnalysisOptions options;
    std::vector<StratumStats> strata;
    std::vector<WelchEntry> welch;  // plaquette vs random per shot count
    std::vector<KindFit> fits;
    std::vector<BadQubitReport> bad_qubits;
};

/// Per-(kind, N_S) box filtering, means/SEMs, Welch tests P vs R per shot
/// count, shot-noise ansatz fit + bootstrap per kind, bad-qubit listing.
inline AnalysisReport analyze_samples(const std::vector<ArchiveRow>& rows,
                                      const AnalysisOptions& options) {
    AnalysisReport report;
    report.options = options;

    std::map<std::pair<std::string, std::uint64_t>, std::vector<double>> groups;
    for (const auto& r : rows) groups[{r.kind, r.n_shots}].push_back(r.delta_chi);

    for (const auto& [key, values] : groups) {
        StratumStats st;
        st.kind = key.first;
        st.n_shots = key.second;
        st.n_samples = values.size();
        if (values.size() < 4) {
            st.note = "fewer than 4 samples; stratum skipped";
            report.strata.push_back(std::move(st));
            continue;
        }
        auto filtered = box_filter(values, options.filter_k);
        st.n_kept = filtered.kept.size();
        st.n_outliers = filtered.outliers.size();
        st.filter = filtered.spec;
        st.mean = detail::mean(filtered.kept);
        st.stderr_mean = filtered.kept.size() > 1
                             ? std::sqrt(detail::sample_variance(filtered.kept, st.mean) /
                                         static_cast<double>(filtered.kept.size()))
                             : 0.0;
        st.histogram = histogram_bin_count(filtered.kept, options.histogram_bins);
        st.kept = std::move(filtered.kept);
        report.strata.push_back(std::move(st));
    }

    // Welch P vs R per shot count
    std::map<std::uint64_t, std::pair<const StratumStats*, const StratumStats*>> pairs;
    for (const auto& st : report.strata) {
        if (st.kept.empty()) continue;
        if (st.kind == "plaquette") pairs[st.n_shots].first = &st;
        if (st.kind == "random") pairs[st.n_shots].second = &st;
    }
    for (const auto& [n_shots, pr] : pairs) {
        if (!pr.first || !pr.second) continue;
        if (pr.first->kept.size() < 2 || pr.second->kept.size() < 2) continue;
        report.welch.push_back(WelchEntry{n_shots, welch_one_tailed(pr.first->kept, pr.second->kept)});
    }

    // shot-noise ansatz fit per kind across shot counts
    std::map<std::string, std::vector<FitPoint>> fit_points;
    for (const auto& st : report.strata) {
        if (st.kept.size() < 2 || !(st.stderr_mean > 0.0)) continue;
        fit_points[st.kind].push_back(
            FitPoint{static_cast<double>(st.n_shots), st.mean, st.stderr_mean});
    }
    for (auto& [kind, points] : fit_points) {
        KindFit kf;
        kf.kind = kind;
        std::sort(points.begin(), points.end(),
                  [](const FitPoint& a, const FitPoint& b) { return a.n_shots < b.n_shots; });
        bool distinct = false;
        for (std::size_t i = 1; i < points.size(); ++i)
            if (points[i].n_shots != points[0].n_shots) distinct = true;
        if (points.size() < 2 || !distinct) {
            kf.note = "needs at least two distinct shot counts";
        } else {
            Rng rng(derive_seed(options.bootstrap_seed, std::hash<std::string>{}(kind)));
            kf.fit = bootstrap_fit(points, options.n_boot, rng);
            kf.available = true;
        }
        report.fits.push_back(std::move(kf));
    }

    for (const auto& r : rows)
        if (r.kind == "plaquette" && r.delta_chi >= options.bad_qubit_threshold)
            report.bad_qubits.push_back(
                BadQubitReport{r.sample_index, r.device_label, r.target, r.n_shots, r.delta_chi});

    return report;
}

inline json analysis_report_to_json(const AnalysisReport& report) {
    json j;
    j["thresholds"] = {{"filter_k", report.options.filter_k},
                       {"bad_qubit_threshold", report.options.bad_qubit_threshold},
                       {"n_boot", report.options.n_boot},
                       {"welch_tail", "normal"}};
    j["strata"] = json::array();
    for (const auto& st : report.strata) {
        json s;
        s["kind"] = st.kind;
        s["n_shots"] = st.n_shots;
        s["n_samples"] = st.n_samples;
        if (!st.note.empty()) {
            s["note"] = st.note;
            j["strata"].push_back(std::move(s));
            continue;
        }
        s["n_kept"] = st.n_kept;
        s["n_outliers"] = st.n_outliers;
        s["fence"] = {{"q1", st.filter->q1},
                      {"q3", st.filter->q3},
                      {"iqr", st.filter->iqr},
                      {"lower", st.filter->lower()},
                      {"upper", st.filter->upper()}};
        s["mean"] = st.mean;
        s["stderr"] = st.stderr_mean;
        j["strata"].push_back(std::move(s));
    }
    j["welch"] = json::array();
    for (const auto& w : report.welch)
        j["welch"].push_back({{"n_shots", w.n_shots},
                              {"statistic", w.result.statistic},
                              {"df", w.result.df},
                              {"p_value", w.result.p_value}});
    j["fits"] = json::array();
    for (const auto& f : report.fits) {
        json e;
        e["kind"] = f.kind;
        if (f.available) {
            e["eta"] = f.fit.eta;
            e["eta_stderr"] = f.fit.eta_stderr;
            e["eta_shots"] = f.fit.eta_shots;
            e["eta_shots_stderr"] = f.fit.eta_shots_stderr;
            e["n_boot"] = f.fit.n_boot;
        } else {
            e["note"] = f.note;
        }
        j["fits"].push_back(std::move(e));
    }
    j["bad_qubits"] = json::array();
    for (const auto& b : report.bad_qubits)
        j["bad_qubits"].push_back({{"sample_index", b.sample_index},
                                   {"device_label", b.device_label},
                                   {"target", b.target},
                                   {"n_shots", b.n_shots},
                                   {"delta_chi", b.delta_chi}});
    return j;
}

inline std::string fit_results_csv(const AnalysisReport& report) {
    std::string out = "kind,eta,eta_stderr,eta_shots,eta_shots_stderr,n_boot\n";
    for (const auto& f : report.fits) {
        if (!f.available) continue;
        out += f.kind;
        out += ',' + detail::format_double(f.fit.eta);
        out += ',' + detail::format_double(f.fit.eta_stderr);
        out += ',' + detail::format_double(f.fit.eta_shots);
        out += ',' + detail::format_double(f.fit.eta_shots_stderr);
        out += ',' + std::to_string(f.fit.n_boot);
        out.push_back('\n');
    }
    return out;
}

inline std::string histogram_csv(const std::vector<std::pair<double, std::uint64_t>>& bins) {
    std::string out = "bin_lower,count\n";
    for (const auto& [lower, count] : bins) {
        out += detail::format_double(lower);
        out += ',' + std::to_string(count);
        out.push_back('\n');
    }
    return out;
}

}  // namespace qleak
