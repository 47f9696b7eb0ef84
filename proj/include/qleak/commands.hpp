#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qleak/analysis.hpp"
#include "qleak/archive.hpp"
#include "qleak/config.hpp"
#include "qleak/protocol.hpp"
#include "qleak/tomography.hpp"

namespace qleak {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitIoError = 3;

namespace detail {

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_analysis(const fs::path& archive_dir, const AnalysisReport& report) {
    write_text_file(archive_dir / "report.json", analysis_report_to_json(report).dump(2) + "\n");
    fs::create_directories(archive_dir / "histograms");
    for (const auto& st : report.strata) {
        if (st.histogram.empty()) continue;
        write_text_file(archive_dir / "histograms" /
                            (st.kind + "_" + std::to_string(st.n_shots) + ".csv"),
                        histogram_csv(st.histogram));
    }
    write_text_file(archive_dir / "fits.csv", fit_results_csv(report));
}

}  // namespace detail

/// `run <config> -o <dir>`: execute the campaign and write the archive
/// atomically (temp dir + rename). Progress to stderr, data to files only.
inline int cmd_run(const std::string& config_path, const std::string& out_dir) {
    std::optional<ExperimentConfig> parsed;
    std::string config_bytes;
    try {
        parsed = load_experiment_config(config_path);
        config_bytes = detail::read_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    ExperimentConfig& cfg = *parsed;

    try {
        std::mutex progress_mutex;
        cfg.campaign.progress = [&](std::size_t done, std::size_t total) {
            if (done % 25 != 0 && done != total) return;
            std::lock_guard<std::mutex> lock(progress_mutex);
            std::cerr << "\r[" << done << "/" << total << "] samples" << std::flush;
            if (done == total) std::cerr << "\n";
        };
        const auto samples = run_campaign(cfg.campaign, cfg.master_seed);

        std::vector<ArchiveRow> rows;
        rows.reserve(samples.size());
        for (const auto& s : samples) rows.push_back(ArchiveRow::from_sample(s));

        AnalysisOptions opts;
        opts.filter_k = cfg.filter_k;
        opts.bad_qubit_threshold = cfg.bad_qubit_threshold;
        opts.n_boot = cfg.n_boot;
        const AnalysisReport report = analyze_samples(rows, opts);

        write_dir_atomically(out_dir, [&](const fs::path& dir) {
            write_text_file(dir / "samples.csv", samples_csv_to_string(rows));
            write_text_file(dir / "config.json", config_bytes);
            detail::write_analysis(dir, report);
            if (cfg.store_raw) {
                fs::create_directories(dir / "raw");
                for (const auto& s : samples) {
                    for (int msg = 0; msg <= 1; ++msg) {
                        const auto& dicts = (msg == 0) ? s.dicts0 : s.dicts1;
                        if (!dicts) continue;
                        std::vector<std::size_t> reg{s.target};
                        reg.insert(reg.end(), s.members.begin(), s.members.end());
                        const json doc = shot_dictionaries_to_json(reg, s.n_shots, *dicts);
                        write_gzip_file(dir / "raw" /
                                            ("sample_" + std::to_string(s.sample_index) + "_rho" +
                                             std::to_string(msg) + ".json.gz"),
                                        doc.dump());
                    }
                }
            }
            const auto now = std::chrono::system_clock::now().time_since_epoch();
            json meta;
            meta["written_unix_ms"] =
                std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
            write_text_file(dir / "meta.json", meta.dump(2) + "\n");
        });
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
    return kExitOk;
}

/// `analyze <archive> [--filter-k K]`: recompute the report from samples.csv.
inline int cmd_analyze(const std::string& archive_dir, std::optional<double> filter_k) {
    try {
        const auto rows = read_samples_csv(fs::path(archive_dir) / "samples.csv");
        AnalysisOptions opts;
        const fs::path config_path = fs::path(archive_dir) / "config.json";
        if (fs::exists(config_path)) {
            std::ifstream in(config_path);
            const auto j = nlohmann::ordered_json::parse(in);
            opts.filter_k = j.value("filter_k", opts.filter_k);
            opts.bad_qubit_threshold = j.value("bad_qubit_threshold", opts.bad_qubit_threshold);
            opts.n_boot = j.value("n_boot", opts.n_boot);
        }
        if (filter_k) opts.filter_k = *filter_k;
        if (!(opts.filter_k > 0.0)) {
            std::cerr << "error: filter K must be positive\n";
            return kExitBadConfig;
        }
        std::size_t analyzable = 0;
        for (const auto& r : rows) (void)r, ++analyzable;
        if (analyzable == 0) std::cerr << "warning: archive has no samples\n";
        const AnalysisReport report = analyze_samples(rows, opts);
        detail::write_analysis(archive_dir, report);
        for (const auto& st : report.strata)
            if (!st.note.empty())
                std::cerr << "warning: stratum " << st.kind << "/" << st.n_shots << ": " << st.note
                          << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
    return kExitOk;
}

/// `report <archive>`: human-readable summary of report.json on stdout.
inline int cmd_report(const std::string& archive_dir) {
    try {
        const fs::path path = fs::path(archive_dir) / "report.json";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path.string() +
                                          " (run `analyze` first?)");
        const auto j = nlohmann::ordered_json::parse(in);
        std::cout << "strata:\n";
        for (const auto& st : j.at("strata")) {
            std::cout << "  " << st.at("kind").get<std::string>() << " @ N_S="
                      << st.at("n_shots").get<std::uint64_t>();
            if (st.contains("note")) {
                std::cout << "  (" << st.at("note").get<std::string>() << ")\n";
                continue;
            }
            std::cout << "  kept " << st.at("n_kept").get<std::size_t>() << "/"
                      << st.at("n_samples").get<std::size_t>() << "  mean "
                      << st.at("mean").get<double>() << " +- " << st.at("stderr").get<double>()
                      << " bits\n";
        }
        std::cout << "welch (plaquette > random):\n";
        for (const auto& w : j.at("welch"))
            std::cout << "  N_S=" << w.at("n_shots").get<std::uint64_t>() << "  z="
                      << w.at("statistic").get<double>() << "  p=" << w.at("p_value").get<double>()
                      << "\n";
        std::cout << "fits:\n";
        for (const auto& f : j.at("fits")) {
            std::cout << "  " << f.at("kind").get<std::string>();
            if (f.contains("note")) {
                std::cout << "  (" << f.at("note").get<std::string>() << ")\n";
                continue;
            }
            std::cout << "  eta=" << f.at("eta").get<double>() << " +- "
                      << f.at("eta_stderr").get<double>() << "  eta_shots="
                      << f.at("eta_shots").get<double>() << " +- "
                      << f.at("eta_shots_stderr").get<double>() << "\n";
        }
        std::cout << "bad qubit candidates: " << j.at("bad_qubits").size() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
    return kExitOk;
}

struct IngestOutcome {
    std::vector<ArchiveRow> rows;
    json manifest;  // per-file status
    json log;       // per-file verified expectations
};

/// Ingest a directory of shot-dictionary JSON files. Files named
/// `<stem>_rho0.json` / `<stem>_rho1.json` with complete basis sets are paired
/// into delta-chi samples; every file gets its computable Pauli expectations
/// surfaced in the verification log (exact fractions included). Malformed
/// files are listed in the manifest without aborting the rest.
inline IngestOutcome ingest_directory(const fs::path& dir,
                                      std::size_t register_cap = kDefaultRegisterCap) {
    IngestOutcome out;
    out.manifest = json::array();
    out.log = json::object();

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    struct Parsed {
        ShotDictionaryFile data;
        bool complete = false;  // all 3^M bases present
    };
    std::map<std::string, Parsed> parsed;  // by file stem

    for (const auto& path : files) {
        json status;
        status["file"] = path.filename().string();
        try {
            std::ifstream in(path);
            const auto doc = nlohmann::ordered_json::parse(in);
            Parsed p{shot_dictionaries_from_json(doc)};
            const std::size_t m = p.data.register_qubits.size();
            if (m == 0 || m > register_cap)
                throw std::runtime_error("register size out of range");
            for (const auto& d : p.data.dicts)
                if (d.basis.size() != m)
                    throw std::runtime_error("dictionary basis length does not match register");

            // verification log: every Pauli string whose consistent bases are all present
            std::set<std::string> present;
            for (const auto& d : p.data.dicts) present.insert(d.basis.str());
            json expectations = json::object();
            json fractions = json::object();
            for (const auto& ps : PauliString::all(m)) {
                if (ps.weight() == 0) continue;
                bool have_all = true;
                std::vector<std::size_t> id_pos;
                for (std::size_t r = 0; r < m; ++r)
                    if (ps.at(r) == 'I') id_pos.push_back(r);
                std::size_t variants = 1;
                for (std::size_t i = 0; i < id_pos.size(); ++i) variants *= 3;
                for (std::size_t v = 0; v < variants && have_all; ++v) {
                    std::string s = ps.str();
                    std::size_t x = v;
                    for (std::size_t r : id_pos) {
                        s[r] = "XYZ"[x % 3];
                        x /= 3;
                    }
                    have_all = present.count(s) > 0;
                }
                if (!have_all) continue;
                const ShotDictionary marginal =
                    ps.has_identity() ? marginalize(p.data.dicts, ps)
                                      : *std::find_if(p.data.dicts.begin(), p.data.dicts.end(),
                                                      [&](const ShotDictionary& d) {
                                                          return d.basis.str() == ps.str();
                                                      });
                expectations[ps.str()] = expectation_from_dictionary(marginal);
                fractions[ps.str()] = std::to_string(expectation_numerator(marginal)) + "/" +
                                      std::to_string(marginal.n_shots);
            }
            out.log[path.filename().string()] = {{"expectations", expectations},
                                                 {"exact_fractions", fractions}};

            p.complete = [&]() {
                for (const auto& b : PauliString::all_identity_free(m))
                    if (!present.count(b.str())) return false;
                return true;
            }();
            status["status"] = p.complete ? "ok" : "partial";
            parsed[path.stem().string()] = std::move(p);
        } catch (const std::exception& e) {
            status["status"] = "error";
            status["error"] = e.what();
        }
        out.manifest.push_back(std::move(status));
    }

    // pair <stem>_rho0 / <stem>_rho1 into samples
    std::size_t index = 0;
    for (const auto& [stem, p0] : parsed) {
        constexpr std::string_view suffix = "_rho0";
        if (stem.size() <= suffix.size() ||
            stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        const std::string base = stem.substr(0, stem.size() - suffix.size());
        auto it1 = parsed.find(base + "_rho1");
        if (it1 == parsed.end() || !p0.complete || !it1->second.complete) continue;
        if (p0.data.register_qubits != it1->second.data.register_qubits) continue;

        const std::size_t m = p0.data.register_qubits.size();
        auto reconstruct = [&](const Parsed& p) {
            return ml_rephysicalize(
                       assemble_density_matrix(all_pauli_expectations(p.data.dicts, m), m))
                .rephysicalized;
        };
        const auto dc = delta_chi(reconstruct(p0), reconstruct(it1->second), 0);

        ArchiveRow row;
        row.sample_index = index++;
        row.device_label = base;
        row.target = p0.data.register_qubits.front();
        row.kind = "ingest";
        row.members.assign(p0.data.register_qubits.begin() + 1, p0.data.register_qubits.end());
        row.n_shots = p0.data.n_shots;
        row.chi_s = dc.chi_s;
        row.chi_sq = dc.chi_sq;
        row.delta_chi = dc.delta;
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// `ingest <dir> -o <archive>`: samples.csv shaped identically to simulated
/// runs, plus manifest.json and ingest_log.json.
inline int cmd_ingest(const std::string& counts_dir, const std::string& out_dir) {
    try {
        if (!fs::is_directory(counts_dir)) {
            std::cerr << "error: not a directory: " << counts_dir << "\n";
            return kExitBadConfig;
        }
        const IngestOutcome outcome = ingest_directory(counts_dir);
        if (outcome.manifest.empty()) std::cerr << "warning: no .json files found, empty archive\n";
        for (const auto& entry : outcome.manifest)
            if (entry.at("status") == "error")
                std::cerr << "warning: " << entry.at("file").get<std::string>() << ": "
                          << entry.at("error").get<std::string>() << "\n";
        write_dir_atomically(out_dir, [&](const fs::path& dir) {
            write_text_file(dir / "samples.csv", samples_csv_to_string(outcome.rows));
            write_text_file(dir / "manifest.json", outcome.manifest.dump(2) + "\n");
            write_text_file(dir / "ingest_log.json", outcome.log.dump(2) + "\n");
        });
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
    return kExitOk;
}

}  // namespace qleak
