#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "qleak/archive.hpp"

namespace fs = std::filesystem;
using qleak::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("qleak_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd =
        std::string(QLEAK_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kStarConfig = R"({
    "graph": {"n_qubits": 7, "edges": [[0, 1], [0, 2], [0, 3]]},
    "devices": [{"label": "dev_a", "seed": 5}],
    "hamiltonian": {
        "omega_rad_per_s": [1.0e5, 2.0e5],
        "exchange_j_rad_per_s": [1.0e4, 5.0e4]
    },
    "spam": {"p_prep": 0.0, "p_readout": 0.01},
    "wait_time_ns": 800,
    "neighborhood_radius": 1,
    "shot_grid": [200],
    "samples_per_stratum": {
        "plaquette": {"200": 6},
        "random": {"200": 6}
    },
    "filter_k": 4,
    "master_seed": 314159,
    "n_boot": 200
})";

}  // namespace

TEST_CASE("run rejects bad configs with exit code 2") {
    TempDir tmp;
    const fs::path log = tmp.path / "log.txt";
    CHECK(run_cli("run " + (tmp.path / "missing.json").string(), log) == 2);

    qleak::write_text_file(tmp.path / "broken.json", "{ not json");
    CHECK(run_cli("run " + (tmp.path / "broken.json").string(), log) == 2);

    qleak::write_text_file(tmp.path / "unknown.json", R"({"graph": "falcon27", "oops": 1})");
    CHECK(run_cli("run " + (tmp.path / "unknown.json").string() + " -o " +
                      (tmp.path / "a").string(),
                  log) == 2);
    CHECK(slurp(log).find("error:") != std::string::npos);
}

TEST_CASE("run, analyze and report round-trip an archive") {
    TempDir tmp;
    const fs::path log = tmp.path / "log.txt";
    const fs::path cfg = tmp.path / "config.json";
    qleak::write_text_file(cfg, kStarConfig);

    const fs::path arch1 = tmp.path / "arch1";
    REQUIRE(run_cli("run " + cfg.string() + " -o " + arch1.string(), log) == 0);
    CHECK(fs::exists(arch1 / "samples.csv"));
    CHECK(fs::exists(arch1 / "config.json"));
    CHECK(fs::exists(arch1 / "report.json"));
    CHECK(fs::exists(arch1 / "fits.csv"));
    CHECK(fs::exists(arch1 / "meta.json"));
    CHECK(fs::exists(arch1 / "histograms"));
    CHECK(slurp(arch1 / "config.json") == std::string(kStarConfig));

    const auto rows = qleak::read_samples_csv(arch1 / "samples.csv");
    REQUIRE(rows.size() == 12);
    for (const auto& r : rows) {
        CHECK(r.target == 0);
        CHECK(r.n_shots == 200);
        CHECK(r.members.size() == 3);
        CHECK(r.delta_chi == r.chi_sq - r.chi_s);
    }

    // the same seed reproduces samples.csv byte for byte
    const fs::path arch2 = tmp.path / "arch2";
    REQUIRE(run_cli("run " + cfg.string() + " -o " + arch2.string(), log) == 0);
    CHECK(slurp(arch1 / "samples.csv") == slurp(arch2 / "samples.csv"));

    // re-analysis with a different fence rewrites the report
    REQUIRE(run_cli("analyze " + arch1.string() + " --filter-k 2.5", log) == 0);
    const auto report = json::parse(slurp(arch1 / "report.json"));
    CHECK(report.at("thresholds").at("filter_k") == doctest::Approx(2.5));
    CHECK(run_cli("analyze " + arch1.string() + " --filter-k 0", log) == 2);
    CHECK(run_cli("analyze " + (tmp.path / "nowhere").string(), log) == 3);

    REQUIRE(run_cli("report " + arch1.string(), log) == 0);
    const std::string text = slurp(log);
    CHECK(text.find("strata:") != std::string::npos);
    CHECK(text.find("plaquette") != std::string::npos);
    CHECK(run_cli("report " + (tmp.path / "nowhere").string(), log) == 3);
}

namespace {

json one_qubit_counts(std::size_t qubit, bool excited) {
    json dicts = json::array();
    for (const char* basis : {"X", "Y", "Z"}) {
        json entry;
        entry["basis"] = basis;
        if (std::string(basis) == "Z")
            entry["counts"] = {{excited ? "1" : "0", 100}};
        else
            entry["counts"] = {{"0", 50}, {"1", 50}};
        dicts.push_back(entry);
    }
    return json{{"register", {qubit}}, {"n_shots", 100}, {"dictionaries", dicts}};
}

}  // namespace

TEST_CASE("ingest builds an archive from external counts") {
    TempDir tmp;
    const fs::path log = tmp.path / "log.txt";
    const fs::path counts = tmp.path / "counts";
    fs::create_directories(counts);

    qleak::write_text_file(counts / "q5_rho0.json", one_qubit_counts(5, false).dump());
    qleak::write_text_file(counts / "q5_rho1.json", one_qubit_counts(5, true).dump());
    // a three-qubit partial upload: verifiable marginals but no pairing
    qleak::write_text_file(counts / "partial_rho0.json", R"({
        "register": [1, 0, 4],
        "n_shots": 10,
        "dictionaries": [
            {"basis": "XXY", "counts": {"101": 6, "111": 1, "001": 2, "100": 1}},
            {"basis": "XYY", "counts": {"111": 4, "101": 4, "011": 2}},
            {"basis": "XZY", "counts": {"101": 2, "111": 3, "011": 2, "110": 2, "001": 1}}
        ]
    })");
    qleak::write_text_file(counts / "garbage.json", "....");

    const fs::path arch = tmp.path / "arch";
    REQUIRE(run_cli("ingest " + counts.string() + " -o " + arch.string(), log) == 0);
    CHECK(slurp(log).find("warning: garbage.json") != std::string::npos);

    const auto rows = qleak::read_samples_csv(arch / "samples.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].kind == "ingest");
    CHECK(rows[0].device_label == "q5");
    CHECK(rows[0].target == 5);
    CHECK(rows[0].n_shots == 100);
    // single-qubit register: tracing out nothing, the two chis agree
    CHECK(rows[0].delta_chi == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(rows[0].chi_s == doctest::Approx(1.0).epsilon(1e-6));

    const auto manifest = json::parse(slurp(arch / "manifest.json"));
    REQUIRE(manifest.size() == 4);
    std::map<std::string, std::string> status;
    for (const auto& e : manifest)
        status[e.at("file").get<std::string>()] = e.at("status").get<std::string>();
    CHECK(status.at("q5_rho0.json") == "ok");
    CHECK(status.at("q5_rho1.json") == "ok");
    CHECK(status.at("partial_rho0.json") == "partial");
    CHECK(status.at("garbage.json") == "error");

    const auto ingest_log = json::parse(slurp(arch / "ingest_log.json"));
    const auto& partial = ingest_log.at("partial_rho0.json");
    CHECK(partial.at("exact_fractions").at("XIY") == "10/30");
    CHECK(partial.at("expectations").at("XIY").get<double>() ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(partial.at("exact_fractions").at("XXY") == "2/10");
    CHECK_FALSE(partial.at("expectations").contains("ZZZ"));

    const auto& full = ingest_log.at("q5_rho0.json");
    CHECK(full.at("exact_fractions").at("Z") == "100/100");
    CHECK(full.at("exact_fractions").at("X") == "0/100");

    CHECK(run_cli("ingest " + (tmp.path / "nodir").string() + " -o " + arch.string(), log) == 2);

    // an empty directory still produces a valid, empty archive
    const fs::path empty = tmp.path / "empty";
    fs::create_directories(empty);
    REQUIRE(run_cli("ingest " + empty.string() + " -o " + (tmp.path / "arch_empty").string(),
                    log) == 0);
    CHECK(qleak::read_samples_csv(tmp.path / "arch_empty" / "samples.csv").empty());
    CHECK(slurp(log).find("warning") != std::string::npos);
}

TEST_CASE("usage errors do not crash") {
    TempDir tmp;
    const fs::path log = tmp.path / "log.txt";
    CHECK(run_cli("", log) != 0);
    CHECK(run_cli("frobnicate", log) != 0);
}
