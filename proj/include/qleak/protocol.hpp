#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qleak/device.hpp"
#include "qleak/parallel.hpp"
#include "qleak/qstate.hpp"
#include "qleak/rng.hpp"
#include "qleak/tomography.hpp"

namespace qleak {

/// Message ensemble {p_k, rho_k}.
struct Alphabet {
    std::vector<std::pair<double, DensityMatrix>> entries;

    explicit Alphabet(std::vector<std::pair<double, DensityMatrix>> e) : entries(std::move(e)) {
        if (entries.empty()) throw std::invalid_argument("alphabet: no entries");
        double total = 0.0;
        const std::size_t dim = entries.front().second.dim();
        for (const auto& [p, rho] : entries) {
            if (p < 0.0) throw std::invalid_argument("alphabet: negative probability");
            if (rho.dim() != dim) throw std::invalid_argument("alphabet: dimension mismatch");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("alphabet: probabilities do not sum to 1");
    }
};

/// Holevo quantity in bits: S(sum_k p_k rho_k) - sum_k p_k S(rho_k).
inline double holevo(const Alphabet& alphabet) {
    const auto dim = static_cast<Eigen::Index>(alphabet.entries.front().second.dim());
    Matrix avg = Matrix::Zero(dim, dim);
    double member_entropy = 0.0;
    for (const auto& [p, rho] : alphabet.entries) {
        if (!rho.physical())
            throw std::domain_error("holevo: aphysical alphabet member");
        avg += p * rho.matrix();
        if (p > 0.0) member_entropy += p * von_neumann_entropy(rho);
    }
    return von_neumann_entropy(DensityMatrix(std::move(avg))) - member_entropy;
}

struct DeltaChiResult {
    double chi_s;
    double chi_sq;
    double delta;
};

/// chi^{SQ} from the equiprobable two-state alphabet on the full register,
/// chi^{S} from the target-qubit reductions, delta = chi^{SQ} - chi^{S}.
inline DeltaChiResult delta_chi(const DensityMatrix& rho0_sq, const DensityMatrix& rho1_sq,
                                std::size_t target_position) {
    if (rho0_sq.dim() != rho1_sq.dim())
        throw std::invalid_argument("delta_chi: dimension mismatch");
    if (target_position >= rho0_sq.num_qubits())
        throw std::invalid_argument("delta_chi: target position out of range");

    const double chi_sq = holevo(Alphabet({{0.5, rho0_sq}, {0.5, rho1_sq}}));
    const double chi_s = holevo(Alphabet({{0.5, partial_trace(rho0_sq, {target_position})},
                                          {0.5, partial_trace(rho1_sq, {target_position})}}));
    return DeltaChiResult{chi_s, chi_sq, chi_sq - chi_s};
}

enum class SetKind { Plaquette, Random };

inline std::string to_string(SetKind kind) {
    return kind == SetKind::Plaquette ? "plaquette" : "random";
}

inline SetKind set_kind_from_string(const std::string& s) {
    if (s == "plaquette") return SetKind::Plaquette;
    if (s == "random") return SetKind::Random;
    throw std::invalid_argument("unknown complementary-set kind: " + s);
}

/// Complementary qubit set Q for a fixed target S. Plaquette: the nearest
/// neighbours, exactly. Random: uniform draw excluding target and neighbours.
struct ComplementarySet {
    SetKind kind;
    std::vector<std::size_t> members;  // sorted, size M-1
    std::size_t target;
};

inline ComplementarySet select_complementary(const CouplingGraph& graph, std::size_t target,
                                             SetKind kind, std::size_t size, Rng& rng) {
    if (target >= graph.n_qubits())
        throw std::invalid_argument("select_complementary: target out of range");
    if (kind == SetKind::Plaquette) {
        if (size != graph.degree(target))
            throw std::invalid_argument("select_complementary: plaquette size must equal degree");
        return ComplementarySet{kind, graph.neighbors(target), target};
    }
    std::vector<std::size_t> eligible;
    const auto& nbrs = graph.neighbors(target);
    for (std::size_t q = 0; q < graph.n_qubits(); ++q) {
        if (q == target) continue;
        if (std::binary_search(nbrs.begin(), nbrs.end(), q)) continue;
        eligible.push_back(q);
    }
    if (eligible.size() < size)
        throw std::invalid_argument("select_complementary: not enough eligible qubits");
    // partial Fisher-Yates for a uniform draw without replacement
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
        std::swap(eligible[i], eligible[pick(rng)]);
        members.push_back(eligible[i]);
    }
    std::sort(members.begin(), members.end());
    return ComplementarySet{kind, std::move(members), target};
}

/// One realization of protocol steps 1-7.
struct LeakageSample {
    std::size_t sample_index = 0;
    std::string device_label;
    std::size_t target = 0;
    SetKind kind = SetKind::Plaquette;
    std::vector<std::size_t> members;
    std::uint64_t n_shots = 0;  // 0 in exact mode
    double wait_time_ns = 0.0;
    double chi_s = 0.0;
    double chi_sq = 0.0;
    double delta_chi = 0.0;
    std::uint64_t seed = 0;
    // raw shot dictionaries per message state; populated only on request
    std::optional<std::vector<ShotDictionary>> dicts0;
    std::optional<std::vector<ShotDictionary>> dicts1;
};

struct ProtocolConfig {
    CouplingGraph graph;
    HamiltonianSpec hamiltonian;  // over the full graph
    std::size_t target = 0;
    SetKind kind = SetKind::Plaquette;
    std::size_t set_size = 3;
    SpamModel spam;
    double wait_time = 800e-9;            // seconds
    std::uint64_t n_shots = 4000;
    bool exact_mode = false;
    std::size_t neighborhood_radius = 2;
    std::size_t neighborhood_cap = 14;
    std::string device_label = "sim";
    std::string environment_pattern;      // full-graph bitstring; empty = all zeros
    bool capture_dictionaries = false;
    std::size_t register_cap = kDefaultRegisterCap;
};

namespace detail {

inline HamiltonianSpec restrict_hamiltonian(const HamiltonianSpec& full, const Neighborhood& nb) {
    std::vector<double> omega(nb.graph.n_qubits());
    for (std::size_t q = 0; q < nb.graph.n_qubits(); ++q)
        omega[q] = full.onsite_freqs[nb.old_of_new[q]];
    std::vector<double> j(nb.graph.edges().size());
    std::vector<double> zz(nb.graph.edges().size());
    for (std::size_t ei = 0; ei < nb.graph.edges().size(); ++ei) {
        const auto [a, b] = nb.graph.edges()[ei];
        auto old_a = nb.old_of_new[a];
        auto old_b = nb.old_of_new[b];
        if (old_a > old_b) std::swap(old_a, old_b);
        const auto& full_edges = full.graph.edges();
        const auto it = std::lower_bound(full_edges.begin(), full_edges.end(),
                                         std::make_pair(old_a, old_b));
        if (it == full_edges.end() || *it != std::make_pair(old_a, old_b))
            throw std::logic_error("restrict_hamiltonian: edge not found");
        const auto fi = static_cast<std::size_t>(it - full_edges.begin());
        j[ei] = full.exchange_j[fi];
        zz[ei] = full.zz(fi);
    }
    return HamiltonianSpec(nb.graph, std::move(omega), std::move(j), std::move(zz));
}

}  // namespace detail

/// Executes steps 1-7 for one sample: environment preparation, target in |b>,
/// idle evolution over the target's simulated neighborhood, tomography of the
/// measured register (target + complementary set), and the delta-chi readout.
/// Random complementary qubits outside the neighborhood are modeled as freshly
/// prepared independent qubits with the same SPAM and shot sampling.
inline LeakageSample run_leakage_sample(const ProtocolConfig& cfg, std::uint64_t seed) {
    const auto nb = extract_neighborhood(cfg.graph, cfg.target, cfg.neighborhood_radius,
                                         cfg.neighborhood_cap);
    const HamiltonianSpec sub = detail::restrict_hamiltonian(cfg.hamiltonian, nb);

    Rng set_rng(derive_seed(seed, 0));
    const ComplementarySet set =
        select_complementary(cfg.graph, cfg.target, cfg.kind, cfg.set_size, set_rng);

    // measured register: slot 0 = target, then members in ascending order
    std::vector<std::size_t> reg{cfg.target};
    reg.insert(reg.end(), set.members.begin(), set.members.end());
    const std::size_t m_reg = reg.size();
    if (m_reg > cfg.register_cap)
        throw std::invalid_argument("run_leakage_sample: measured register exceeds cap");

    std::string env_pattern = cfg.environment_pattern.empty()
                                  ? std::string(cfg.graph.n_qubits(), '0')
                                  : cfg.environment_pattern;
    if (env_pattern.size() != cfg.graph.n_qubits())
        throw std::invalid_argument("run_leakage_sample: environment pattern length mismatch");

    std::vector<int> slot_internal(m_reg, -1);  // position in the simulated register, or -1
    for (std::size_t i = 0; i < m_reg; ++i) {
        auto it = nb.new_of_old.find(reg[i]);
        if (it != nb.new_of_old.end()) slot_internal[i] = static_cast<int>(it->second);
    }
    std::vector<std::size_t> internal_slots;
    std::vector<std::size_t> internal_positions;
    std::vector<std::size_t> external_slots;
    for (std::size_t i = 0; i < m_reg; ++i) {
        if (slot_internal[i] >= 0) {
            internal_slots.push_back(i);
            internal_positions.push_back(static_cast<std::size_t>(slot_internal[i]));
        } else {
            external_slots.push_back(i);
        }
    }

    LeakageSample out;
    out.device_label = cfg.device_label;
    out.target = cfg.target;
    out.kind = cfg.kind;
    out.members = set.members;
    out.n_shots = cfg.exact_mode ? 0 : cfg.n_shots;
    out.wait_time_ns = cfg.wait_time * 1e9;
    out.seed = seed;

    std::vector<DensityMatrix> rho_sq;
    for (int message = 0; message <= 1; ++message) {
        Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(message)));

        // step 1 + 2: environment product state with the target bit set to the message
        std::string pattern(nb.graph.n_qubits(), '0');
        for (std::size_t q = 0; q < nb.graph.n_qubits(); ++q)
            pattern[q] = env_pattern[nb.old_of_new[q]];
        pattern[0] = static_cast<char>('0' + message);  // target relabels to 0
        const Statevector psi0 = prepare_state(pattern, cfg.spam, rng);

        // step 3: idle for the wait time
        const Statevector psi = evolve_statevector(psi0, sub, cfg.wait_time);

        // external complementary qubits: freshly prepared, same SPAM
        std::string ext_bits(external_slots.size(), '0');
        if (!external_slots.empty()) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (std::size_t i = 0; i < external_slots.size(); ++i) {
                char bit = env_pattern[reg[external_slots[i]]];
                if (cfg.spam.p_prep > 0.0 && u(rng) < cfg.spam.p_prep)
                    bit = (bit == '0') ? '1' : '0';
                ext_bits[i] = bit;
            }
        }

        // step 4: full state tomography of the measured register
        Tomogram tomo = [&]() {
            if (cfg.exact_mode) {
                const DensityMatrix rho_int =
                    partial_trace(DensityMatrix::pure(psi), internal_positions);
                return tomograph_exact(m_reg, [&](const PauliString& p) {
                    std::string internal_letters;
                    for (std::size_t i : internal_slots) internal_letters.push_back(p.at(i));
                    double e = pauli_expectation(rho_int, PauliString(internal_letters));
                    for (std::size_t i = 0; i < external_slots.size(); ++i) {
                        switch (p.at(external_slots[i])) {
                            case 'I': break;
                            case 'Z': e *= (ext_bits[i] == '0') ? 1.0 : -1.0; break;
                            default: e = 0.0; break;  // X/Y of a basis state
                        }
                    }
                    e *= std::pow(1.0 - 2.0 * cfg.spam.p_readout,
                                  static_cast<double>(p.weight()));
                    return e;
                });
            }
            std::vector<ShotDictionary> captured;
            auto sampler = [&](const PauliString& basis, std::uint64_t bseed) {
                std::string internal_letters;
                for (std::size_t i : internal_slots) internal_letters.push_back(basis.at(i));
                std::vector<double> dist_int{1.0};
                if (!internal_slots.empty())
                    dist_int =
                        measurement_distribution(psi, internal_positions, PauliString(internal_letters));

                // product-extend with the external qubits, in register slot order
                std::vector<double> dist(std::size_t{1} << m_reg, 0.0);
                const std::size_t k_int = internal_slots.size();
                for (std::size_t full = 0; full < dist.size(); ++full) {
                    std::size_t key_int = 0;
                    for (std::size_t i = 0; i < k_int; ++i) {
                        const std::size_t bit = (full >> (m_reg - 1 - internal_slots[i])) & 1u;
                        key_int |= bit << (k_int - 1 - i);
                    }
                    double p = dist_int[key_int];
                    for (std::size_t i = 0; i < external_slots.size() && p > 0.0; ++i) {
                        const std::size_t bit = (full >> (m_reg - 1 - external_slots[i])) & 1u;
                        const char letter = basis.at(external_slots[i]);
                        if (letter == 'Z')
                            p *= (bit == static_cast<std::size_t>(ext_bits[i] - '0')) ? 1.0 : 0.0;
                        else
                            p *= 0.5;  // X/Y measurement of a basis state
                    }
                    dist[full] = p;
                }
                Rng brng(bseed);
                auto dict = sample_counts(dist, basis, cfg.n_shots, cfg.spam.p_readout, brng);
                if (cfg.capture_dictionaries) captured.push_back(dict);
                return dict;
            };
            Tomogram t = tomograph(m_reg, sampler, derive_seed(seed, 3 + message), cfg.register_cap);
            if (cfg.capture_dictionaries) {
                auto& slot = (message == 0) ? out.dicts0 : out.dicts1;
                slot = std::move(captured);
            }
            return t;
        }();
        rho_sq.push_back(tomo.rephysicalized);
    }

    // steps 6 + 7
    const DeltaChiResult dc = delta_chi(rho_sq[0], rho_sq[1], 0);
    out.chi_s = dc.chi_s;
    out.chi_sq = dc.chi_sq;
    out.delta_chi = dc.delta;
    return out;
}

/// A simulated device: a label plus the seed its couplings are drawn from.
struct DeviceSpec {
    std::string label;
    std::uint64_t seed;
};

struct UniformInterval {
    double lo = 0.0;
    double hi = 0.0;

    double draw(Rng& rng) const {
        if (lo == hi) return lo;
        std::uniform_real_distribution<double> u(lo, hi);
        return u(rng);
    }
};

/// Hamiltonian parameter distributions: exchange and crosstalk couplings are
/// drawn once per device (from its seed), onsite disorder once per sample.
struct HamiltonianDistributions {
    UniformInterval omega;         // rad/s
    UniformInterval exchange_j;    // rad/s
    UniformInterval zz_crosstalk;  // rad/s
};

struct Stratum {
    SetKind kind;
    std::uint64_t n_shots;
    std::size_t count;
};

struct CampaignConfig {
    CouplingGraph graph;
    std::vector<DeviceSpec> devices;
    HamiltonianDistributions hamiltonian;
    SpamModel spam;
    double wait_time = 800e-9;  // seconds
    bool exact_mode = false;
    std::size_t neighborhood_radius = 2;
    std::size_t neighborhood_cap = 14;
    std::size_t target_coordination = 3;
    std::vector<Stratum> strata;
    std::string environment_pattern;
    bool capture_dictionaries = false;
    std::size_t n_threads = 0;  // 0 = hardware concurrency
    std::function<void(std::size_t done, std::size_t total)> progress;
};

namespace detail {

struct DeviceCouplings {
    std::vector<double> exchange_j;
    std::vector<double> zz_crosstalk;
};

inline DeviceCouplings draw_device_couplings(const CampaignConfig& cfg, const DeviceSpec& dev) {
    Rng rng(dev.seed);
    DeviceCouplings out;
    out.exchange_j.reserve(cfg.graph.edges().size());
    out.zz_crosstalk.reserve(cfg.graph.edges().size());
    for (std::size_t e = 0; e < cfg.graph.edges().size(); ++e)
        out.exchange_j.push_back(cfg.hamiltonian.exchange_j.draw(rng));
    for (std::size_t e = 0; e < cfg.graph.edges().size(); ++e)
        out.zz_crosstalk.push_back(cfg.hamiltonian.zz_crosstalk.draw(rng));
    return out;
}

}  // namespace detail

/// Runs every stratum, randomizing target (coordination constraint) and device
/// per sample. Per-sample seeds derive from the master seed and global sample
/// index, so execution order and thread count never affect results.
inline std::vector<LeakageSample> run_campaign(const CampaignConfig& cfg,
                                               std::uint64_t master_seed) {
    if (cfg.devices.empty()) throw std::invalid_argument("run_campaign: no devices configured");
    const auto targets = coordination_targets(cfg.graph, cfg.target_coordination);
    if (targets.empty())
        throw std::invalid_argument("run_campaign: no qubits with the required coordination");

    std::vector<detail::DeviceCouplings> couplings;
    couplings.reserve(cfg.devices.size());
    for (const auto& dev : cfg.devices)
        couplings.push_back(detail::draw_device_couplings(cfg, dev));

    struct Slot {
        SetKind kind;
        std::uint64_t n_shots;
    };
    std::vector<Slot> slots;
    for (const auto& stratum : cfg.strata)
        for (std::size_t i = 0; i < stratum.count; ++i)
            slots.push_back(Slot{stratum.kind, stratum.n_shots});

    std::vector<LeakageSample> samples(slots.size());
    std::atomic<std::size_t> done{0};
    parallel_for(
        slots.size(),
        [&](std::size_t idx) {
            Rng pick_rng(derive_seed(master_seed, idx, 0));
            std::uniform_int_distribution<std::size_t> pick_dev(0, cfg.devices.size() - 1);
            std::uniform_int_distribution<std::size_t> pick_target(0, targets.size() - 1);
            const std::size_t dev = pick_dev(pick_rng);
            const std::size_t target = targets[pick_target(pick_rng)];

            std::vector<double> omega(cfg.graph.n_qubits());
            for (std::size_t q = 0; q < cfg.graph.n_qubits(); ++q)
                omega[q] = cfg.hamiltonian.omega.draw(pick_rng);

            ProtocolConfig pc{cfg.graph,
                              HamiltonianSpec(cfg.graph, std::move(omega),
                                              couplings[dev].exchange_j,
                                              couplings[dev].zz_crosstalk)};
            pc.target = target;
            pc.kind = slots[idx].kind;
            pc.set_size = cfg.graph.degree(target);
            pc.spam = cfg.spam;
            pc.wait_time = cfg.wait_time;
            pc.n_shots = slots[idx].n_shots;
            pc.exact_mode = cfg.exact_mode;
            pc.neighborhood_radius = cfg.neighborhood_radius;
            pc.neighborhood_cap = cfg.neighborhood_cap;
            pc.device_label = cfg.devices[dev].label;
            pc.environment_pattern = cfg.environment_pattern;
            pc.capture_dictionaries = cfg.capture_dictionaries;

            samples[idx] = run_leakage_sample(pc, derive_seed(master_seed, idx, 1));
            samples[idx].sample_index = idx;
            const std::size_t d = done.fetch_add(1) + 1;
            if (cfg.progress) cfg.progress(d, slots.size());
        },
        cfg.n_threads);
    return samples;
}

}  // namespace qleak
