#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "qleak/device.hpp"

using namespace qleak;

TEST_CASE("coupling graph normalization") {
    CouplingGraph g(4, {{1, 0}, {0, 1}, {2, 3}});
    CHECK(g.edges().size() == 2);
    CHECK(g.edges()[0] == std::make_pair<std::size_t, std::size_t>(0, 1));
    CHECK(g.neighbors(1) == std::vector<std::size_t>{0});
    CHECK(g.degree(2) == 1);
    CHECK_THROWS_AS(CouplingGraph(3, {{1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(CouplingGraph(3, {{0, 3}}), std::invalid_argument);
}

TEST_CASE("27-qubit heavy-hex map") {
    const auto g = falcon27_coupling_map();
    CHECK(g.n_qubits() == 27);
    CHECK(g.edges().size() == 28);
    std::map<std::size_t, std::size_t> degree_histogram;
    for (std::size_t q = 0; q < 27; ++q) ++degree_histogram[g.degree(q)];
    CHECK(degree_histogram[1] == 6);
    CHECK(degree_histogram[2] == 13);
    CHECK(degree_histogram[3] == 8);
    CHECK(coordination_targets(g, 3) ==
          std::vector<std::size_t>{1, 7, 8, 12, 14, 18, 19, 25});
    CHECK(g.neighbors(1) == std::vector<std::size_t>{0, 2, 4});
}

TEST_CASE("neighborhood extraction") {
    const auto g = falcon27_coupling_map();

    const auto nb1 = extract_neighborhood(g, 1, 1);
    CHECK(nb1.old_of_new == std::vector<std::size_t>{1, 0, 2, 4});
    CHECK(nb1.new_of_old.at(1) == 0);
    CHECK(nb1.graph.n_qubits() == 4);
    CHECK(nb1.graph.edges().size() == 3);  // star around the relabeled center

    const auto nb2 = extract_neighborhood(g, 12, 2);
    const std::set<std::size_t> got(nb2.old_of_new.begin(), nb2.old_of_new.end());
    CHECK(got == std::set<std::size_t>{12, 10, 13, 15, 7, 14, 18});
    CHECK(nb2.old_of_new[0] == 12);
    CHECK(nb2.contains(7));
    CHECK_FALSE(nb2.contains(6));

    // node budget truncates the BFS
    const auto capped = extract_neighborhood(g, 12, 10, 5);
    CHECK(capped.graph.n_qubits() == 5);
    CHECK(capped.old_of_new[0] == 12);
    CHECK_THROWS_AS(extract_neighborhood(g, 27, 1), std::invalid_argument);
    CHECK_THROWS_AS(extract_neighborhood(g, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("hamiltonian spec validation") {
    CouplingGraph g(2, {{0, 1}});
    CHECK_NOTHROW(HamiltonianSpec(g, {1.0, 2.0}, {0.5}));
    CHECK_NOTHROW(HamiltonianSpec(g, {1.0, 2.0}, {0.5}, {0.1}));
    CHECK_THROWS_AS(HamiltonianSpec(g, {1.0}, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(HamiltonianSpec(g, {1.0, 2.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(HamiltonianSpec(g, {1.0, 2.0}, {0.5}, {0.1, 0.2}), std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_AS(HamiltonianSpec(g, {nan, 2.0}, {0.5}), std::invalid_argument);
    HamiltonianSpec h(g, {1.0, 2.0}, {0.5});
    CHECK(h.zz(0) == 0.0);
}

TEST_CASE("spam model validation") {
    CHECK_NOTHROW(SpamModel(0.0, 0.0));
    CHECK_NOTHROW(SpamModel(1.0, 0.5));
    CHECK_THROWS_AS(SpamModel(-0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(SpamModel(0.0, 1.1), std::invalid_argument);
}

TEST_CASE("state preparation flips") {
    Rng rng(1);
    const auto clean = prepare_state("010", SpamModel(0.0, 0.0), rng);
    CHECK(std::abs(clean.amplitudes()(2) - 1.0) < 1e-15);

    const auto flipped = prepare_state("010", SpamModel(1.0, 0.0), rng);
    CHECK(std::abs(flipped.amplitudes()(5) - 1.0) < 1e-15);

    // flip rate is statistically consistent with p_prep
    std::size_t flips = 0;
    const std::size_t trials = 20000;
    for (std::size_t i = 0; i < trials; ++i) {
        const auto psi = prepare_state("0", SpamModel(0.3, 0.0), rng);
        if (std::abs(psi.amplitudes()(1)) > 0.5) ++flips;
    }
    const double rate = static_cast<double>(flips) / static_cast<double>(trials);
    CHECK(rate == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("measurement distributions in rotated bases") {
    CVector plus(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const Statevector psi_plus(plus);
    auto px = measurement_distribution(psi_plus, {0}, PauliString("X"));
    CHECK(px[0] == doctest::Approx(1.0).epsilon(1e-12));

    CVector yplus(2);
    yplus << 1.0 / std::sqrt(2.0), Complex(0.0, 1.0) / std::sqrt(2.0);
    auto py = measurement_distribution(Statevector(yplus), {0}, PauliString("Y"));
    CHECK(py[0] == doctest::Approx(1.0).epsilon(1e-12));

    auto pz = measurement_distribution(Statevector::basis_state("1"), {0}, PauliString("Z"));
    CHECK(pz[1] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(measurement_distribution(psi_plus, {0}, PauliString("I")),
                    std::invalid_argument);
    CHECK_THROWS_AS(measurement_distribution(psi_plus, {0}, PauliString("XZ")),
                    std::invalid_argument);
    CHECK_THROWS_AS(measurement_distribution(psi_plus, {1}, PauliString("X")),
                    std::invalid_argument);
}

TEST_CASE("distribution parities reproduce Pauli expectations") {
    std::mt19937_64 rng(13);
    const auto psi = oracles::random_statevector(3, rng);
    const auto rho = DensityMatrix::pure(psi);
    for (const auto& basis : PauliString::all_identity_free(3)) {
        const auto probs = measurement_distribution(psi, {0, 1, 2}, basis);
        double total = 0.0;
        double parity_sum = 0.0;
        for (std::size_t x = 0; x < probs.size(); ++x) {
            total += probs[x];
            parity_sum += (__builtin_popcountll(x) % 2 == 0 ? 1.0 : -1.0) * probs[x];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(parity_sum == doctest::Approx(pauli_expectation(rho, basis)).epsilon(1e-10));
    }

    // sub-register measurement marginalizes over the rest
    const auto sub = measurement_distribution(psi, {2, 0}, PauliString("ZZ"));
    const auto full = measurement_distribution(psi, {0, 1, 2}, PauliString("ZZZ"));
    for (std::size_t b2 = 0; b2 < 2; ++b2)
        for (std::size_t b0 = 0; b0 < 2; ++b0) {
            double want = 0.0;
            for (std::size_t b1 = 0; b1 < 2; ++b1) want += full[(b0 << 2) | (b1 << 1) | b2];
            CHECK(sub[(b2 << 1) | b0] == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("shot sampling") {
    Rng rng(99);
    const std::vector<double> point{0.0, 1.0, 0.0, 0.0};
    const auto d = sample_counts(point, PauliString("ZZ"), 100, 0.0, rng);
    CHECK(d.n_shots == 100);
    CHECK(d.counts.at("01") == 100);

    // deterministic readout flip
    const auto flipped = sample_counts(point, PauliString("ZZ"), 50, 1.0, rng);
    CHECK(flipped.counts.at("10") == 50);

    // statistical agreement with the distribution
    const std::vector<double> p{0.7, 0.3};
    const auto s = sample_counts(p, PauliString("Z"), 100000, 0.0, rng);
    const double f0 = static_cast<double>(s.counts.at("0")) / 100000.0;
    CHECK(f0 == doctest::Approx(0.7).epsilon(0.02));

    CHECK_THROWS_AS(sample_counts({1.0}, PauliString("Z"), 10, 0.0, rng), std::invalid_argument);
}

TEST_CASE("shot dictionary validation") {
    CHECK_THROWS_AS(ShotDictionary(PauliString("XI"), {}, 0), std::invalid_argument);
    CHECK_THROWS_AS(ShotDictionary(PauliString("X"), {{"0", 3}}, 4), std::invalid_argument);
    CHECK_THROWS_AS(ShotDictionary(PauliString("X"), {{"00", 3}}, 3), std::invalid_argument);
    CHECK_THROWS_AS(ShotDictionary(PauliString("X"), {{"2", 3}}, 3), std::invalid_argument);
    CHECK_NOTHROW(ShotDictionary(PauliString("X"), {{"0", 2}, {"1", 1}}, 3));
}

TEST_CASE("single-edge exchange dynamics are analytic") {
    CouplingGraph g(2, {{0, 1}});
    const double j = 0.7;
    const double t = 1.3;
    HamiltonianSpec ham(g, {0.0, 0.0}, {j});
    const auto out = evolve_statevector(Statevector::basis_state("01"), ham, t);
    // the {|01>, |10>} block evolves under exp(-i J t sigma_x)
    CHECK(std::abs(out.amplitudes()(1) - Complex(std::cos(j * t), 0.0)) < 1e-7);
    CHECK(std::abs(out.amplitudes()(2) - Complex(0.0, -std::sin(j * t))) < 1e-7);
    CHECK(std::abs(out.amplitudes()(0)) < 1e-12);
    CHECK(std::abs(out.amplitudes()(3)) < 1e-12);
}

TEST_CASE("evolution matches dense diagonalization") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CouplingGraph g(3, {{0, 1}, {1, 2}, {0, 2}});
    for (int rep = 0; rep < 4; ++rep) {
        HamiltonianSpec ham(g, {u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)},
                            {u(rng), u(rng), u(rng)});
        const auto psi = oracles::random_statevector(3, rng);
        const double t = 2.0 + u(rng);
        const auto got = evolve_statevector(psi, ham, t);
        const auto want = oracles::exact_evolve(psi, ham, t);
        CHECK((got.amplitudes() - want).norm() < 1e-7);
        CHECK(std::abs(got.amplitudes().norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("diagonal hamiltonians evolve in one exact step") {
    CouplingGraph g(2, {{0, 1}});
    HamiltonianSpec ham(g, {2.0, -1.0}, {0.0}, {0.5});
    const auto psi = Statevector::basis_state("10");
    const double t = 3.7;
    const auto got = evolve_statevector(psi, ham, t);
    // |10>: Z eigenvalues (-1, +1); energy = 0.5*(2*(-1) + (-1)*1) + 0.5*(-1)(+1)
    const double e = 0.5 * (2.0 * -1.0 + -1.0 * 1.0) + 0.5 * (-1.0 * 1.0);
    CHECK(std::abs(got.amplitudes()(2) - std::polar(1.0, -e * t)) < 1e-12);
}

TEST_CASE("exchange evolution conserves total magnetization") {
    std::mt19937_64 rng(23);
    CouplingGraph g(4, {{0, 1}, {1, 2}, {2, 3}});
    HamiltonianSpec ham(g, {0.3, -0.2, 0.9, 0.1}, {0.4, -0.6, 0.5}, {0.05, 0.0, -0.1});
    const auto psi = oracles::random_statevector(4, rng);
    const auto rho0 = DensityMatrix::pure(psi);
    const auto rho1 = DensityMatrix::pure(evolve_statevector(psi, ham, 5.0));
    double mag0 = 0.0, mag1 = 0.0;
    for (const char* s : {"ZIII", "IZII", "IIZI", "IIIZ"}) {
        mag0 += pauli_expectation(rho0, PauliString(s));
        mag1 += pauli_expectation(rho1, PauliString(s));
    }
    CHECK(mag1 == doctest::Approx(mag0).epsilon(1e-7));
}
