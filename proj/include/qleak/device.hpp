#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qleak/qstate.hpp"
#include "qleak/rng.hpp"

namespace qleak {

/// Undirected qubit-connectivity graph. Edges are stored normalized (a < b),
/// sorted, without duplicates or self-loops.
class CouplingGraph {
public:
    CouplingGraph(std::size_t n_qubits, std::vector<std::pair<std::size_t, std::size_t>> edges)
        : n_(n_qubits) {
        for (auto& [a, b] : edges) {
            if (a == b) throw std::invalid_argument("coupling graph: self-loop");
            if (a >= n_ || b >= n_) throw std::invalid_argument("coupling graph: index out of range");
            if (a > b) std::swap(a, b);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        edges_ = std::move(edges);
        adj_.assign(n_, {});
        for (const auto& [a, b] : edges_) {
            adj_[a].push_back(b);
            adj_[b].push_back(a);
        }
        for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
    }

    std::size_t n_qubits() const { return n_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
    const std::vector<std::size_t>& neighbors(std::size_t q) const { return adj_.at(q); }
    std::size_t degree(std::size_t q) const { return adj_.at(q).size(); }

private:
    std::size_t n_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
    std::vector<std::vector<std::size_t>> adj_;
};

/// 27-qubit heavy-hex lattice of the Falcon series.
inline CouplingGraph falcon27_coupling_map() {
    return CouplingGraph(27, {{0, 1},   {1, 2},   {1, 4},   {2, 3},   {3, 5},   {4, 7},   {5, 8},
                              {6, 7},   {7, 10},  {8, 9},   {8, 11},  {10, 12}, {11, 14}, {12, 13},
                              {12, 15}, {13, 14}, {14, 16}, {15, 18}, {16, 19}, {17, 18}, {18, 21},
                              {19, 20}, {19, 22}, {21, 23}, {22, 25}, {23, 24}, {24, 25}, {25, 26}});
}

/// All qubits whose coordination number (degree) equals n_c.
inline std::vector<std::size_t> coordination_targets(const CouplingGraph& graph, std::size_t n_c) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < graph.n_qubits(); ++q)
        if (graph.degree(q) == n_c) out.push_back(q);
    return out;
}

/// Induced subgraph of all nodes within graph distance `radius` of `center`,
/// relabeled in BFS discovery order (center -> 0). `max_nodes` truncates the
/// BFS frontier once the budget is exhausted.
struct Neighborhood {
    CouplingGraph graph;
    std::vector<std::size_t> old_of_new;           // new index -> original index
    std::unordered_map<std::size_t, std::size_t> new_of_old;

    bool contains(std::size_t old_index) const { return new_of_old.count(old_index) > 0; }
};

inline Neighborhood extract_neighborhood(const CouplingGraph& graph, std::size_t center,
                                         std::size_t radius,
                                         std::size_t max_nodes = std::numeric_limits<std::size_t>::max()) {
    if (center >= graph.n_qubits())
        throw std::invalid_argument("extract_neighborhood: center out of range");
    if (max_nodes == 0) throw std::invalid_argument("extract_neighborhood: zero node budget");

    std::vector<std::size_t> old_of_new{center};
    std::unordered_map<std::size_t, std::size_t> new_of_old{{center, 0}};
    std::deque<std::pair<std::size_t, std::size_t>> frontier{{center, 0}};  // (node, distance)
    while (!frontier.empty() && old_of_new.size() < max_nodes) {
        auto [node, dist] = frontier.front();
        frontier.pop_front();
        if (dist == radius) continue;
        for (std::size_t nb : graph.neighbors(node)) {
            if (new_of_old.count(nb)) continue;
            new_of_old[nb] = old_of_new.size();
            old_of_new.push_back(nb);
            frontier.emplace_back(nb, dist + 1);
            if (old_of_new.size() == max_nodes) break;
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> sub_edges;
    for (const auto& [a, b] : graph.edges()) {
        auto ia = new_of_old.find(a);
        auto ib = new_of_old.find(b);
        if (ia != new_of_old.end() && ib != new_of_old.end())
            sub_edges.emplace_back(ia->second, ib->second);
    }
    return Neighborhood{CouplingGraph(old_of_new.size(), std::move(sub_edges)),
                        std::move(old_of_new), std::move(new_of_old)};
}

/// Idle Hamiltonian: H = sum_i (w_i/2) Z_i + sum_<ij> (J_ij/2)(X_i X_j + Y_i Y_j)
///                     + sum_<ij> zeta_ij Z_i Z_j, angular frequencies in rad/s.
struct HamiltonianSpec {
    CouplingGraph graph;
    std::vector<double> onsite_freqs;   // per qubit
    std::vector<double> exchange_j;     // per edge, in graph.edges() order
    std::vector<double> zz_crosstalk;   // per edge; empty means all zero

    HamiltonianSpec(CouplingGraph g, std::vector<double> omega, std::vector<double> j,
                    std::vector<double> zz = {})
        : graph(std::move(g)),
          onsite_freqs(std::move(omega)),
          exchange_j(std::move(j)),
          zz_crosstalk(std::move(zz)) {
        if (onsite_freqs.size() != graph.n_qubits())
            throw std::invalid_argument("hamiltonian: onsite array size mismatch");
        if (exchange_j.size() != graph.edges().size())
            throw std::invalid_argument("hamiltonian: exchange array size mismatch");
        if (!zz_crosstalk.empty() && zz_crosstalk.size() != graph.edges().size())
            throw std::invalid_argument("hamiltonian: crosstalk array size mismatch");
        auto check_finite = [](const std::vector<double>& v) {
            for (double x : v)
                if (!std::isfinite(x)) throw std::invalid_argument("hamiltonian: non-finite entry");
        };
        check_finite(onsite_freqs);
        check_finite(exchange_j);
        check_finite(zz_crosstalk);
    }

    double zz(std::size_t edge_index) const {
        return zz_crosstalk.empty() ? 0.0 : zz_crosstalk[edge_index];
    }
};

/// Per-qubit state-preparation and readout bit-flip probabilities.
struct SpamModel {
    double p_prep = 0.0;
    double p_readout = 0.0;

    SpamModel() = default;
    SpamModel(double prep, double readout) : p_prep(prep), p_readout(readout) {
        if (p_prep < 0.0 || p_prep > 1.0 || p_readout < 0.0 || p_readout > 1.0)
            throw std::invalid_argument("spam probabilities must lie in [0, 1]");
    }
};

/// Bitstring counts for one identity-free measurement basis.
struct ShotDictionary {
    PauliString basis;
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t n_shots = 0;

    ShotDictionary(PauliString b, std::map<std::string, std::uint64_t> c, std::uint64_t n)
        : basis(std::move(b)), counts(std::move(c)), n_shots(n) {
        if (basis.has_identity())
            throw std::invalid_argument("shot dictionary basis contains identity letters");
        std::uint64_t total = 0;
        for (const auto& [bits, cnt] : counts) {
            if (bits.size() != basis.size())
                throw std::invalid_argument("shot dictionary bitstring length mismatch");
            for (char ch : bits)
                if (ch != '0' && ch != '1')
                    throw std::invalid_argument("shot dictionary bitstring has non-bit characters");
            total += cnt;
        }
        if (total != n_shots)
            throw std::invalid_argument("shot dictionary counts do not sum to n_shots");
    }
};

/// Computational-basis product state, with each pattern bit independently
/// flipped with probability p_prep before construction.
inline Statevector prepare_state(const std::string& pattern, const SpamModel& spam, Rng& rng) {
    std::string bits = pattern;
    if (spam.p_prep > 0.0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (char& c : bits)
            if (u(rng) < spam.p_prep) c = (c == '0') ? '1' : '0';
    }
    return Statevector::basis_state(bits);
}

namespace detail {

// Rotate the measured qubits into the computational frame: X -> H, Y -> H S^dag.
inline void apply_basis_rotations(CVector& amps, std::size_t m,
                                  const std::vector<std::size_t>& positions,
                                  const PauliString& basis) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const char letter = basis.at(i);
        if (letter == 'Z') continue;
        const std::size_t shift = m - 1 - positions[i];
        const std::size_t mask = std::size_t{1} << shift;
        for (std::size_t idx = 0; idx < static_cast<std::size_t>(amps.size()); ++idx) {
            if (idx & mask) continue;
            const auto i0 = static_cast<Eigen::Index>(idx);
            const auto i1 = static_cast<Eigen::Index>(idx | mask);
            Complex a0 = amps(i0);
            Complex a1 = amps(i1);
            if (letter == 'Y') a1 *= Complex(0.0, -1.0);  // S^dag
            amps(i0) = (a0 + a1) * inv_sqrt2;             // H
            amps(i1) = (a0 - a1) * inv_sqrt2;
        }
    }
}

}  // namespace detail

/// Born distribution over the measured sub-register `positions` (in that order)
/// after rotating each measured qubit into the requested Pauli basis.
inline std::vector<double> measurement_distribution(const Statevector& psi,
                                                    const std::vector<std::size_t>& positions,
                                                    const PauliString& basis) {
    if (basis.has_identity())
        throw std::invalid_argument("measurement basis contains identity letters");
    if (basis.size() != positions.size())
        throw std::invalid_argument("measurement basis length mismatch");
    const std::size_t m = psi.num_qubits();
    for (std::size_t p : positions)
        if (p >= m) throw std::invalid_argument("measurement position out of range");

    CVector amps = psi.amplitudes();
    detail::apply_basis_rotations(amps, m, positions, basis);

    const std::size_t k = positions.size();
    std::vector<double> probs(std::size_t{1} << k, 0.0);
    for (std::size_t idx = 0; idx < static_cast<std::size_t>(amps.size()); ++idx) {
        std::size_t key = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t bit = (idx >> (m - 1 - positions[i])) & 1u;
            key |= bit << (k - 1 - i);
        }
        probs[key] += std::norm(amps(static_cast<Eigen::Index>(idx)));
    }
    return probs;
}

/// Draw n_shots outcomes from a distribution over k-bit strings, flipping each
/// readout bit independently with probability p_readout.
inline ShotDictionary sample_counts(const std::vector<double>& probs, const PauliString& basis,
                                    std::uint64_t n_shots, double p_readout, Rng& rng) {
    const std::size_t k = basis.size();
    const std::size_t dim = std::size_t{1} << k;
    if (probs.size() != dim) throw std::invalid_argument("sample_counts: distribution size mismatch");

    std::vector<double> cdf(dim);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    cdf[dim - 1] = std::max(cdf[dim - 1], 1.0);  // absorb rounding in the last bin

    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint64_t> tallies(dim, 0);
    for (std::uint64_t s = 0; s < n_shots; ++s) {
        const double x = u(rng);
        std::size_t idx = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
        if (idx >= dim) idx = dim - 1;
        if (p_readout > 0.0)
            for (std::size_t b = 0; b < k; ++b)
                if (u(rng) < p_readout) idx ^= std::size_t{1} << (k - 1 - b);
        ++tallies[idx];
    }

    std::map<std::string, std::uint64_t> counts;
    for (std::size_t idx = 0; idx < dim; ++idx) {
        if (tallies[idx] == 0) continue;
        std::string bits(k, '0');
        for (std::size_t b = 0; b < k; ++b)
            if ((idx >> (k - 1 - b)) & 1u) bits[b] = '1';
        counts.emplace(std::move(bits), tallies[idx]);
    }
    return ShotDictionary(basis, std::move(counts), n_shots);
}

/// Measure a sub-register of psi in the given identity-free basis.
inline ShotDictionary sample_subregister_shots(const Statevector& psi,
                                               const std::vector<std::size_t>& positions,
                                               const PauliString& basis, std::uint64_t n_shots,
                                               const SpamModel& spam, Rng& rng) {
    return sample_counts(measurement_distribution(psi, positions, basis), basis, n_shots,
                         spam.p_readout, rng);
}

/// Measure the full register of psi in the given identity-free basis.
inline ShotDictionary sample_shots(const Statevector& psi, const PauliString& basis,
                                   std::uint64_t n_shots, const SpamModel& spam, Rng& rng) {
    std::vector<std::size_t> positions(psi.num_qubits());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    return sample_subregister_shots(psi, positions, basis, n_shots, spam, rng);
}

/// Unitary idle evolution exp(-iHt) via second-order Trotter splitting between
/// the diagonal part (Z, ZZ) and the exchange terms. The step count is chosen
/// from a commutator bound so the per-call unitary error stays below 1e-7.
inline Statevector evolve_statevector(const Statevector& psi, const HamiltonianSpec& ham, double t) {
    const std::size_t m = psi.num_qubits();
    if (ham.graph.n_qubits() != m)
        throw std::invalid_argument("evolve_statevector: register size mismatch");
    if (!std::isfinite(t)) throw std::invalid_argument("evolve_statevector: non-finite time");

    const std::size_t dim = psi.dim();
    const auto& edges = ham.graph.edges();

    // Diagonal energy per basis state.
    std::vector<double> diag(dim, 0.0);
    for (std::size_t idx = 0; idx < dim; ++idx) {
        double e = 0.0;
        for (std::size_t q = 0; q < m; ++q) {
            const double s = ((idx >> (m - 1 - q)) & 1u) ? -1.0 : 1.0;
            e += 0.5 * ham.onsite_freqs[q] * s;
        }
        for (std::size_t ei = 0; ei < edges.size(); ++ei) {
            const double za = ((idx >> (m - 1 - edges[ei].first)) & 1u) ? -1.0 : 1.0;
            const double zb = ((idx >> (m - 1 - edges[ei].second)) & 1u) ? -1.0 : 1.0;
            e += ham.zz(ei) * za * zb;
        }
        diag[idx] = e;
    }

    double j_total = 0.0;
    for (double j : ham.exchange_j) j_total += std::abs(j);

    CVector amps = psi.amplitudes();
    if (j_total == 0.0) {
        // Purely diagonal Hamiltonian: one exact step.
        for (std::size_t idx = 0; idx < dim; ++idx)
            amps(static_cast<Eigen::Index>(idx)) *= std::polar(1.0, -diag[idx] * t);
        return Statevector(std::move(amps));
    }

    // The uniform part of the onsite field commutes with every term, so only
    // the deviations from the mean enter the non-commuting scale.
    double omega_mean = 0.0;
    for (double w : ham.onsite_freqs) omega_mean += w;
    omega_mean /= static_cast<double>(m);
    double lambda_nc = j_total;
    for (double w : ham.onsite_freqs) lambda_nc += 0.5 * std::abs(w - omega_mean);
    for (std::size_t ei = 0; ei < edges.size(); ++ei) lambda_nc += std::abs(ham.zz(ei));

    const double abs_t = std::abs(t);
    const double budget = 1e-8;  // keeps the per-call bound under 1e-7 with margin
    const double c = std::pow(2.0 * lambda_nc, 3.0) / 12.0;
    std::size_t n_steps = 1;
    if (c > 0.0 && abs_t > 0.0) {
        const double n_real = std::sqrt(c * abs_t * abs_t * abs_t / budget);
        n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n_real)));
    }
    const double dt = t / static_cast<double>(n_steps);

    std::vector<Complex> half_phase(dim);
    for (std::size_t idx = 0; idx < dim; ++idx)
        half_phase[idx] = std::polar(1.0, -diag[idx] * dt / 2.0);

    struct EdgeGate {
        std::size_t mask_a, mask_b;
        Complex c, s;  // cos(J dt), -i sin(J dt)
    };
    std::vector<EdgeGate> gates;
    gates.reserve(edges.size());
    for (std::size_t ei = 0; ei < edges.size(); ++ei) {
        if (ham.exchange_j[ei] == 0.0) continue;
        const double theta = ham.exchange_j[ei] * dt / 2.0;  // half-step; swept twice
        gates.push_back(EdgeGate{std::size_t{1} << (m - 1 - edges[ei].first),
                                 std::size_t{1} << (m - 1 - edges[ei].second),
                                 Complex(std::cos(theta), 0.0), Complex(0.0, -std::sin(theta))});
    }

    auto apply_gate = [&](const EdgeGate& g) {
        for (std::size_t idx = 0; idx < dim; ++idx) {
            // act once per {|01>, |10>} pair: idx holds bit_a = 0, bit_b = 1
            if ((idx & g.mask_a) || !(idx & g.mask_b)) continue;
            const std::size_t partner = idx ^ g.mask_a ^ g.mask_b;
            const auto i0 = static_cast<Eigen::Index>(idx);
            const auto i1 = static_cast<Eigen::Index>(partner);
            const Complex a01 = amps(i0);
            const Complex a10 = amps(i1);
            amps(i0) = g.c * a01 + g.s * a10;
            amps(i1) = g.s * a01 + g.c * a10;
        }
    };

    for (std::size_t step = 0; step < n_steps; ++step) {
        for (std::size_t idx = 0; idx < dim; ++idx)
            amps(static_cast<Eigen::Index>(idx)) *= half_phase[idx];
        // symmetric (Strang) sweep over the exchange gates
        for (auto it = gates.begin(); it != gates.end(); ++it) apply_gate(*it);
        for (auto it = gates.rbegin(); it != gates.rend(); ++it) apply_gate(*it);
        for (std::size_t idx = 0; idx < dim; ++idx)
            amps(static_cast<Eigen::Index>(idx)) *= half_phase[idx];
    }
    amps.normalize();
    return Statevector(std::move(amps));
}

}  // namespace qleak
