#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>
#include <zlib.h>

#include <nlohmann/json.hpp>

#include "qleak/device.hpp"
#include "qleak/protocol.hpp"

namespace qleak {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// One samples.csv row. `kind` is a free string so externally ingested rows
/// can carry their own tag.
struct ArchiveRow {
    std::size_t sample_index = 0;
    std::string device_label;
    std::size_t target = 0;
    std::string kind;
    std::vector<std::size_t> members;
    std::uint64_t n_shots = 0;
    double wait_time_ns = 0.0;
    double chi_s = 0.0;
    double chi_sq = 0.0;
    double delta_chi = 0.0;
    std::uint64_t seed = 0;

    static ArchiveRow from_sample(const LeakageSample& s) {
        return ArchiveRow{s.sample_index, s.device_label, s.target, to_string(s.kind),
                          s.members,      s.n_shots,      s.wait_time_ns, s.chi_s,
                          s.chi_sq,       s.delta_chi,    s.seed};
    }
};

inline constexpr const char* kSamplesCsvHeader =
    "sample_index,device_label,target,kind,members,n_shots,wait_time_ns,chi_S,chi_SQ,delta_chi,seed";

namespace detail {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string join_members(const std::vector<std::size_t>& members) {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out.push_back(';');
        out += std::to_string(members[i]);
    }
    return out;
}

inline std::vector<std::size_t> parse_members(const std::string& field) {
    std::vector<std::size_t> out;
    std::stringstream ss(field);
    std::string tok;
    while (std::getline(ss, tok, ';'))
        if (!tok.empty()) out.push_back(std::stoull(tok));
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline std::string samples_csv_to_string(const std::vector<ArchiveRow>& rows) {
    std::string out = kSamplesCsvHeader;
    out.push_back('\n');
    for (const auto& r : rows) {
        out += std::to_string(r.sample_index);
        out += ',' + r.device_label;
        out += ',' + std::to_string(r.target);
        out += ',' + r.kind;
        out += ',' + detail::join_members(r.members);
        out += ',' + std::to_string(r.n_shots);
        out += ',' + detail::format_double(r.wait_time_ns);
        out += ',' + detail::format_double(r.chi_s);
        out += ',' + detail::format_double(r.chi_sq);
        out += ',' + detail::format_double(r.delta_chi);
        out += ',' + std::to_string(r.seed);
        out.push_back('\n');
    }
    return out;
}

inline std::vector<ArchiveRow> parse_samples_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kSamplesCsvHeader)
        throw std::runtime_error("samples.csv: unexpected header");
    std::vector<ArchiveRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 11) throw std::runtime_error("samples.csv: malformed row");
        ArchiveRow r;
        r.sample_index = std::stoull(f[0]);
        r.device_label = f[1];
        r.target = std::stoull(f[2]);
        r.kind = f[3];
        r.members = detail::parse_members(f[4]);
        r.n_shots = std::stoull(f[5]);
        r.wait_time_ns = std::stod(f[6]);
        r.chi_s = std::stod(f[7]);
        r.chi_sq = std::stod(f[8]);
        r.delta_chi = std::stod(f[9]);
        r.seed = std::stoull(f[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ArchiveRow> read_samples_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return parse_samples_csv(in);
}

inline void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline void write_gzip_file(const fs::path& path, const std::string& content) {
    gzFile gz = gzopen(path.string().c_str(), "wb");
    if (!gz) throw std::runtime_error("cannot write " + path.string());
    const int written = gzwrite(gz, content.data(), static_cast<unsigned>(content.size()));
    gzclose(gz);
    if (written != static_cast<int>(content.size()))
        throw std::runtime_error("gzip write failed for " + path.string());
}

/// JSON wire format for one tomography run's shot dictionaries. Also the
/// ingestion format for externally produced (hardware) counts.
inline json shot_dictionaries_to_json(const std::vector<std::size_t>& register_qubits,
                                      std::uint64_t n_shots,
                                      const std::vector<ShotDictionary>& dicts) {
    json j;
    j["register"] = register_qubits;
    j["n_shots"] = n_shots;
    j["dictionaries"] = json::array();
    for (const auto& d : dicts) {
        json entry;
        entry["basis"] = d.basis.str();
        entry["counts"] = json::object();
        for (const auto& [bits, cnt] : d.counts) entry["counts"][bits] = cnt;
        j["dictionaries"].push_back(std::move(entry));
    }
    return j;
}

struct ShotDictionaryFile {
    std::vector<std::size_t> register_qubits;
    std::uint64_t n_shots = 0;
    std::vector<ShotDictionary> dicts;
};

inline ShotDictionaryFile shot_dictionaries_from_json(const json& j) {
    if (!j.is_object() || !j.contains("register") || !j.contains("n_shots") ||
        !j.contains("dictionaries"))
        throw std::runtime_error("shot dictionary file: missing register/n_shots/dictionaries");
    ShotDictionaryFile out;
    out.register_qubits = j.at("register").get<std::vector<std::size_t>>();
    out.n_shots = j.at("n_shots").get<std::uint64_t>();
    for (const auto& entry : j.at("dictionaries")) {
        PauliString basis(entry.at("basis").get<std::string>());
        std::map<std::string, std::uint64_t> counts;
        for (const auto& [bits, cnt] : entry.at("counts").items())
            counts[bits] = cnt.get<std::uint64_t>();
        out.dicts.emplace_back(std::move(basis), std::move(counts), out.n_shots);
    }
    return out;
}

/// Write `fill(dir)` into a temp directory next to `target`, then rename.
template <typename Fill>
void write_dir_atomically(const fs::path& target, Fill&& fill) {
    const fs::path tmp = target.string() + ".tmp-" + std::to_string(::getpid());
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    try {
        fill(tmp);
    } catch (...) {
        fs::remove_all(tmp);
        throw;
    }
    fs::remove_all(target);
    fs::rename(tmp, target);
}

}  // namespace qleak
