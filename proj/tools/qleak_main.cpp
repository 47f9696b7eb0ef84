#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qleak/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"idle information leakage simulator and analysis toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_out = "archive";
    auto* run = app.add_subcommand("run", "execute a campaign from a config file");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("-o,--out", run_out, "output archive directory");

    std::string analyze_dir;
    double filter_k_value = 0.0;
    auto* analyze = app.add_subcommand("analyze", "recompute the analysis report of an archive");
    analyze->add_option("archive", analyze_dir, "archive directory")->required();
    auto* k_opt = analyze->add_option("--filter-k", filter_k_value, "box-filter tolerance K");

    std::string ingest_dir;
    std::string ingest_out = "archive";
    auto* ingest = app.add_subcommand("ingest", "ingest externally produced shot dictionaries");
    ingest->add_option("dir", ingest_dir, "directory of shot-dictionary JSON files")->required();
    ingest->add_option("-o,--out", ingest_out, "output archive directory");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "print a summary of an archive's report");
    report->add_option("archive", report_dir, "archive directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return qleak::cmd_run(config_path, run_out);
    if (analyze->parsed()) {
        std::optional<double> k;
        if (k_opt->count() > 0) k = filter_k_value;
        return qleak::cmd_analyze(analyze_dir, k);
    }
    if (ingest->parsed()) return qleak::cmd_ingest(ingest_dir, ingest_out);
    if (report->parsed()) return qleak::cmd_report(report_dir);
    return 1;
}
