#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qleak/device.hpp"
#include "qleak/protocol.hpp"

namespace qleak {

/// Everything a campaign needs, parsed from one JSON config file. Unknown keys
/// are errors, not warnings.
struct ExperimentConfig {
    CampaignConfig campaign;
    std::vector<std::uint64_t> shot_grid;
    double filter_k = 4.0;
    double bad_qubit_threshold = 0.12;
    std::uint64_t master_seed = 0;
    std::size_t n_boot = 1000;
    bool store_raw = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::ordered_json& j, const std::set<std::string>& known,
                                const std::string& context) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + context);
}

inline UniformInterval parse_interval(const nlohmann::ordered_json& j, const std::string& name) {
    if (!j.is_array() || j.size() != 2)
        throw std::invalid_argument("config: " + name + " must be a [lo, hi] pair");
    UniformInterval out{j.at(0).get<double>(), j.at(1).get<double>()};
    if (out.lo > out.hi) throw std::invalid_argument("config: " + name + " interval reversed");
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::ordered_json& j) {
    detail::reject_unknown_keys(
        j,
        {"graph", "devices", "hamiltonian", "spam", "wait_time_ns", "neighborhood_radius",
         "neighborhood_cap", "target_coordination", "shot_grid", "samples_per_stratum", "filter_k",
         "bad_qubit_threshold", "master_seed", "n_boot", "exact_mode", "store_raw",
         "environment_pattern"},
        "top level");
    for (const char* key : {"graph", "devices", "hamiltonian", "spam", "wait_time_ns",
                            "neighborhood_radius", "shot_grid", "samples_per_stratum", "filter_k",
                            "master_seed", "n_boot"})
        if (!j.contains(key))
            throw std::invalid_argument(std::string("config: missing required key \"") + key + "\"");

    // graph
    CouplingGraph graph = [&]() {
        const auto& g = j.at("graph");
        if (g.is_string()) {
            if (g.get<std::string>() == "falcon27") return falcon27_coupling_map();
            throw std::invalid_argument("config: unknown builtin graph " + g.get<std::string>());
        }
        detail::reject_unknown_keys(g, {"n_qubits", "edges"}, "graph");
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : g.at("edges"))
            edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        return CouplingGraph(g.at("n_qubits").get<std::size_t>(), std::move(edges));
    }();

    std::vector<DeviceSpec> devices;
    for (const auto& d : j.at("devices")) {
        detail::reject_unknown_keys(d, {"label", "seed"}, "devices entry");
        devices.push_back(DeviceSpec{d.at("label").get<std::string>(),
                                     d.at("seed").get<std::uint64_t>()});
    }
    if (devices.empty()) throw std::invalid_argument("config: devices list is empty");

    const auto& h = j.at("hamiltonian");
    detail::reject_unknown_keys(
        h, {"omega_rad_per_s", "exchange_j_rad_per_s", "zz_crosstalk_rad_per_s"}, "hamiltonian");
    HamiltonianDistributions ham;
    ham.omega = detail::parse_interval(h.at("omega_rad_per_s"), "omega_rad_per_s");
    ham.exchange_j = detail::parse_interval(h.at("exchange_j_rad_per_s"), "exchange_j_rad_per_s");
    if (h.contains("zz_crosstalk_rad_per_s"))
        ham.zz_crosstalk = detail::parse_interval(h.at("zz_crosstalk_rad_per_s"),
                                                  "zz_crosstalk_rad_per_s");

    const auto& sp = j.at("spam");
    detail::reject_unknown_keys(sp, {"p_prep", "p_readout"}, "spam");
    SpamModel spam(sp.value("p_prep", 0.0), sp.value("p_readout", 0.0));

    std::vector<std::uint64_t> shot_grid = j.at("shot_grid").get<std::vector<std::uint64_t>>();
    if (shot_grid.empty()) throw std::invalid_argument("config: shot_grid is empty");
    for (std::uint64_t n : shot_grid)
        if (n == 0) throw std::invalid_argument("config: shot_grid entries must be positive");

    std::vector<Stratum> strata;
    const auto& sps = j.at("samples_per_stratum");
    detail::reject_unknown_keys(sps, {"plaquette", "random"}, "samples_per_stratum");
    for (const std::string kind_name : {"plaquette", "random"}) {
        if (!sps.contains(kind_name)) continue;
        for (const auto& [shots_str, count] : sps.at(kind_name).items()) {
            const std::uint64_t n_shots = std::stoull(shots_str);
            if (std::find(shot_grid.begin(), shot_grid.end(), n_shots) == shot_grid.end())
                throw std::invalid_argument("config: stratum shot count " + shots_str +
                                            " is not in shot_grid");
            strata.push_back(Stratum{set_kind_from_string(kind_name), n_shots,
                                     count.get<std::size_t>()});
        }
    }

    ExperimentConfig cfg{
        CampaignConfig{std::move(graph), std::move(devices), ham, spam},
        std::move(shot_grid)};
    cfg.campaign.wait_time = j.at("wait_time_ns").get<double>() * 1e-9;
    cfg.campaign.neighborhood_radius = j.at("neighborhood_radius").get<std::size_t>();
    cfg.campaign.neighborhood_cap = j.value("neighborhood_cap", std::size_t{14});
    cfg.campaign.target_coordination = j.value("target_coordination", std::size_t{3});
    cfg.campaign.exact_mode = j.value("exact_mode", false);
    cfg.campaign.environment_pattern = j.value("environment_pattern", std::string{});
    cfg.campaign.strata = std::move(strata);
    cfg.filter_k = j.at("filter_k").get<double>();
    if (!(cfg.filter_k > 0.0)) throw std::invalid_argument("config: filter_k must be positive");
    cfg.bad_qubit_threshold = j.value("bad_qubit_threshold", 0.12);
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    cfg.n_boot = j.at("n_boot").get<std::size_t>();
    cfg.store_raw = j.value("store_raw", false);
    cfg.campaign.capture_dictionaries = cfg.store_raw;
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_experiment_config(j);
}

}  // namespace qleak
