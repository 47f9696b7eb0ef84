#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "qleak/device.hpp"
#include "qleak/qstate.hpp"
#include "qleak/rng.hpp"

namespace qleak {

inline constexpr std::size_t kDefaultRegisterCap = 4;

/// The 3^M identity-free measurement settings for an M-qubit register.
struct TomographyPlan {
    std::size_t m;
    std::vector<PauliString> bases;

    static TomographyPlan make(std::size_t m) {
        return TomographyPlan{m, PauliString::all_identity_free(m)};
    }
};

/// Tomographic estimate before and after maximum-likelihood rephysicalization.
/// eigen_shift_record holds (mu_j, rho_j) eigenvalue pairs in ascending mu order.
struct Tomogram {
    DensityMatrix raw;
    DensityMatrix rephysicalized;
    std::vector<std::pair<double, double>> eigen_shift_record;
};

/// Aggregate the dictionaries of every basis consistent with `target_string`
/// (matching letters at non-identity positions), dropping identity-position
/// bits. Exact integer count arithmetic throughout.
inline ShotDictionary marginalize(const std::vector<ShotDictionary>& dicts,
                                  const PauliString& target_string) {
    const std::size_t m = target_string.size();
    std::vector<std::size_t> keep;  // non-identity positions
    for (std::size_t r = 0; r < m; ++r)
        if (target_string.at(r) != 'I') keep.push_back(r);
    if (keep.empty())
        throw std::invalid_argument("marginalize: all-identity target string");

    auto consistent = [&](const PauliString& basis) {
        if (basis.size() != m) return false;
        for (std::size_t r : keep)
            if (basis.at(r) != target_string.at(r)) return false;
        return true;
    };

    // every basis obtained by substituting each identity with X/Y/Z must appear
    std::vector<std::size_t> id_pos;
    for (std::size_t r = 0; r < m; ++r)
        if (target_string.at(r) == 'I') id_pos.push_back(r);
    std::size_t required = 1;
    for (std::size_t i = 0; i < id_pos.size(); ++i) required *= 3;
    for (std::size_t v = 0; v < required; ++v) {
        std::string s = target_string.str();
        std::size_t x = v;
        for (std::size_t r : id_pos) {
            s[r] = "XYZ"[x % 3];
            x /= 3;
        }
        const bool present = std::any_of(dicts.begin(), dicts.end(), [&](const ShotDictionary& d) {
            return d.basis.str() == s;
        });
        if (!present)
            throw std::invalid_argument("marginalize: missing consistent basis " + s);
    }

    std::string reduced_letters;
    for (std::size_t r : keep) reduced_letters.push_back(target_string.at(r));

    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;
    for (const auto& d : dicts) {
        if (!consistent(d.basis)) continue;
        for (const auto& [bits, cnt] : d.counts) {
            std::string reduced;
            reduced.reserve(keep.size());
            for (std::size_t r : keep) reduced.push_back(bits[r]);
            counts[reduced] += cnt;
        }
        total += d.n_shots;
    }
    return ShotDictionary(PauliString(reduced_letters), std::move(counts), total);
}

/// Signed integer numerator of the dictionary expectation: each bitstring
/// contributes count * prod_r (-1)^{x_r}.
inline std::int64_t expectation_numerator(const ShotDictionary& d) {
    std::int64_t num = 0;
    for (const auto& [bits, cnt] : d.counts) {
        const std::size_t ones = static_cast<std::size_t>(std::count(bits.begin(), bits.end(), '1'));
        const std::int64_t sign = (ones % 2 == 0) ? 1 : -1;
        num += sign * static_cast<std::int64_t>(cnt);
    }
    return num;
}

inline double expectation_from_dictionary(const ShotDictionary& d) {
    if (d.n_shots == 0)
        throw std::invalid_argument("expectation_from_dictionary: empty dictionary");
    return static_cast<double>(expectation_numerator(d)) / static_cast<double>(d.n_shots);
}

/// rho = 2^{-M} sum_b <P_b> P_b; may be aphysical.
inline DensityMatrix assemble_density_matrix(const std::map<PauliString, double>& expectations,
                                             std::size_t m) {
    const std::size_t dim = std::size_t{1} << m;
    const double norm = 1.0 / static_cast<double>(dim);

    const auto strings = PauliString::all(m);
    if (expectations.size() != strings.size())
        throw std::invalid_argument("assemble_density_matrix: wrong number of expectations");

    Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (const auto& p : strings) {
        auto it = expectations.find(p);
        if (it == expectations.end())
            throw std::invalid_argument("assemble_density_matrix: missing expectation for " + p.str());
        const double e = it->second;
        if (p.weight() == 0 && std::abs(e - 1.0) > 1e-12)
            throw std::invalid_argument("assemble_density_matrix: identity expectation must be 1");
        for (std::size_t j = 0; j < dim; ++j) {
            std::size_t f;
            Complex phase;
            detail::pauli_action(p, j, f, phase);
            rho(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) += e * norm * phase;
        }
    }
    return DensityMatrix(std::move(rho));
}

/// Euclidean projection of a real vector onto the probability simplex
/// (sort-and-threshold pivot method).
inline std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumsum = 0.0;
    double shift = 0.0;
    std::size_t pivot = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumsum += sorted[k];
        const double c = (1.0 - cumsum) / static_cast<double>(k + 1);
        if (sorted[k] + c > 0.0) {
            pivot = k;
            shift = c;
        }
    }
    (void)pivot;
    for (double& x : v) x = std::max(0.0, x + shift);
    return v;
}

/// Maximum-likelihood rephysicalization: keep the eigenbasis of mu, project the
/// eigenvalue vector onto the probability simplex (2-norm minimizer).
inline Tomogram ml_rephysicalize(const DensityMatrix& mu) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(mu.matrix());
    if (es.info() != Eigen::Success)
        throw std::runtime_error("ml_rephysicalize: eigendecomposition failed");

    std::vector<double> mu_eigs(static_cast<std::size_t>(es.eigenvalues().size()));
    for (std::size_t j = 0; j < mu_eigs.size(); ++j)
        mu_eigs[j] = es.eigenvalues()(static_cast<Eigen::Index>(j));
    const std::vector<double> rho_eigs = project_to_simplex(mu_eigs);

    Matrix rho = Matrix::Zero(mu.matrix().rows(), mu.matrix().cols());
    std::vector<std::pair<double, double>> record;
    record.reserve(mu_eigs.size());
    for (std::size_t j = 0; j < mu_eigs.size(); ++j) {
        const auto col = es.eigenvectors().col(static_cast<Eigen::Index>(j));
        rho += rho_eigs[j] * (col * col.adjoint());
        record.emplace_back(mu_eigs[j], rho_eigs[j]);
    }
    // enforce exact Hermiticity against rounding in the outer products
    rho = ((rho + rho.adjoint()) / 2.0).eval();
    return Tomogram{mu, DensityMatrix(std::move(rho)), std::move(record)};
}

/// Produces the shot dictionary for one measurement setting; the seed is
/// derived per basis so settings may run concurrently.
using BasisSampler = std::function<ShotDictionary(const PauliString& basis, std::uint64_t seed)>;

/// Expectations for all 4^M Pauli strings from the 3^M identity-free
/// dictionaries (marginalizing where the string carries identities).
inline std::map<PauliString, double> all_pauli_expectations(
    const std::vector<ShotDictionary>& dicts, std::size_t m) {
    std::map<PauliString, double> out;
    std::map<std::string, const ShotDictionary*> by_basis;
    for (const auto& d : dicts) by_basis[d.basis.str()] = &d;
    for (const auto& p : PauliString::all(m)) {
        if (p.weight() == 0) {
            out.emplace(p, 1.0);
        } else if (p.identity_free()) {
            auto it = by_basis.find(p.str());
            if (it == by_basis.end())
                throw std::invalid_argument("missing dictionary for basis " + p.str());
            out.emplace(p, expectation_from_dictionary(*it->second));
        } else {
            out.emplace(p, expectation_from_dictionary(marginalize(dicts, p)));
        }
    }
    return out;
}

/// Full state tomography driven by a basis sampler: 3^M measurement settings,
/// 4^M expectations, density-matrix assembly, rephysicalization.
inline Tomogram tomograph(std::size_t m, const BasisSampler& sampler, std::uint64_t seed,
                          std::size_t register_cap = kDefaultRegisterCap) {
    if (m == 0 || m > register_cap)
        throw std::invalid_argument("tomograph: register size exceeds configured cap");
    const auto plan = TomographyPlan::make(m);
    std::vector<ShotDictionary> dicts;
    dicts.reserve(plan.bases.size());
    for (std::size_t b = 0; b < plan.bases.size(); ++b)
        dicts.push_back(sampler(plan.bases[b], derive_seed(seed, b)));
    return ml_rephysicalize(assemble_density_matrix(all_pauli_expectations(dicts, m), m));
}

/// Tomography of a sub-register of a pure state with finite shots.
inline Tomogram tomograph(const Statevector& psi, const std::vector<std::size_t>& register_positions,
                          std::uint64_t n_shots, const SpamModel& spam, std::uint64_t seed,
                          std::size_t register_cap = kDefaultRegisterCap) {
    auto sampler = [&](const PauliString& basis, std::uint64_t s) {
        Rng rng(s);
        return sample_subregister_shots(psi, register_positions, basis, n_shots, spam, rng);
    };
    return tomograph(register_positions.size(), sampler, seed, register_cap);
}

/// Infinite-shot tomography from an expectation oracle (exact mode). The
/// oracle receives each of the 4^M strings and must already include any
/// readout-error attenuation.
inline Tomogram tomograph_exact(std::size_t m,
                                const std::function<double(const PauliString&)>& expectation) {
    std::map<PauliString, double> exps;
    for (const auto& p : PauliString::all(m))
        exps.emplace(p, p.weight() == 0 ? 1.0 : expectation(p));
    return ml_rephysicalize(assemble_density_matrix(exps, m));
}

/// Exact-mode tomography of a known state with per-bit readout flip probability
/// p_readout (each non-identity letter attenuates by 1 - 2 p_readout).
inline Tomogram tomograph_exact(const DensityMatrix& rho, double p_readout = 0.0) {
    return tomograph_exact(rho.num_qubits(), [&](const PauliString& p) {
        const double atten = std::pow(1.0 - 2.0 * p_readout, static_cast<double>(p.weight()));
        return atten * pauli_expectation(rho, p);
    });
}

}  // namespace qleak
