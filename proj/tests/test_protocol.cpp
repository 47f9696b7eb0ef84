#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "qleak/archive.hpp"
#include "qleak/protocol.hpp"

using namespace qleak;

namespace {

DensityMatrix plus_state() {
    CVector v(2);
    v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return DensityMatrix::pure(Statevector(v));
}

}  // namespace

TEST_CASE("alphabet validation") {
    const auto zero = DensityMatrix::pure(Statevector::basis_state("0"));
    CHECK_THROWS_AS(Alphabet({}), std::invalid_argument);
    CHECK_THROWS_AS(Alphabet({{0.7, zero}, {0.7, zero}}), std::invalid_argument);
    CHECK_THROWS_AS(Alphabet({{-0.5, zero}, {1.5, zero}}), std::invalid_argument);
    CHECK_THROWS_AS(Alphabet({{0.5, zero}, {0.5, DensityMatrix::maximally_mixed(2)}}),
                    std::invalid_argument);
    CHECK_NOTHROW(Alphabet({{0.5, zero}, {0.5, zero}}));
}

TEST_CASE("holevo quantity fixtures") {
    const auto zero = DensityMatrix::pure(Statevector::basis_state("0"));
    const auto one = DensityMatrix::pure(Statevector::basis_state("1"));

    // orthogonal pure states: a full bit
    CHECK(holevo(Alphabet({{0.5, zero}, {0.5, one}})) == doctest::Approx(1.0).epsilon(1e-12));
    // identical states: nothing
    CHECK(holevo(Alphabet({{0.5, zero}, {0.5, zero}})) == doctest::Approx(0.0).epsilon(1e-12));
    // |0> vs |+>: eigenvalues of the average are (1 +- 1/sqrt(2))/2
    const double lam = (1.0 + 1.0 / std::sqrt(2.0)) / 2.0;
    const double want = -lam * std::log2(lam) - (1.0 - lam) * std::log2(1.0 - lam);
    CHECK(want == doctest::Approx(0.60088).epsilon(1e-4));
    CHECK(holevo(Alphabet({{0.5, zero}, {0.5, plus_state()}})) ==
          doctest::Approx(want).epsilon(1e-12));

    Matrix indef(2, 2);
    indef << 1.2, 0.0, 0.0, -0.2;
    CHECK_THROWS_AS(holevo(Alphabet({{0.5, zero}, {0.5, DensityMatrix(indef)}})),
                    std::domain_error);
}

TEST_CASE("delta chi vanishes for product extensions") {
    std::mt19937_64 rng(3);
    const auto s0 = oracles::random_density_matrix(1, rng);
    const auto s1 = oracles::random_density_matrix(1, rng);
    const auto env = oracles::random_density_matrix(2, rng);
    const DensityMatrix r0(kron(s0.matrix(), env.matrix()));
    const DensityMatrix r1(kron(s1.matrix(), env.matrix()));
    const auto dc = delta_chi(r0, r1, 0);
    CHECK(dc.delta == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(dc.chi_sq == doctest::Approx(dc.chi_s).epsilon(1e-9));
}

TEST_CASE("delta chi is nonnegative on random alphabets") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const auto r0 = oracles::random_density_matrix(2, rng);
        const auto r1 = oracles::random_density_matrix(2, rng);
        const auto dc = delta_chi(r0, r1, rep % 2 == 0 ? 0 : 1);
        CHECK(dc.delta >= -1e-9);
        CHECK(dc.chi_s >= -1e-9);
        CHECK(dc.chi_sq <= 1.0 + 1e-9);  // two equiprobable messages
    }
    const auto r = oracles::random_density_matrix(2, rng);
    CHECK_THROWS_AS(delta_chi(r, r, 2), std::invalid_argument);
    CHECK_THROWS_AS(delta_chi(r, oracles::random_density_matrix(1, rng), 0),
                    std::invalid_argument);
}

TEST_CASE("full transfer across a star moves the whole bit") {
    // uniform exchange J on a 3-leaf star swaps the center excitation into the
    // leaves completely at sqrt(3) J t = pi/2
    CouplingGraph star(4, {{0, 1}, {0, 2}, {0, 3}});
    const double j = 1.0;
    const double t = (M_PI / 2.0) / std::sqrt(3.0);
    HamiltonianSpec ham(star, {0.0, 0.0, 0.0, 0.0}, {j, j, j});
    const auto psi = evolve_statevector(Statevector::basis_state("1000"), ham, t);
    const auto r1 = DensityMatrix::pure(psi);
    const auto r0 = DensityMatrix::pure(Statevector::basis_state("0000"));
    const auto dc = delta_chi(r0, r1, 0);
    CHECK(dc.chi_s == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(dc.delta == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("complementary set selection") {
    const auto g = falcon27_coupling_map();
    Rng rng(4);

    const auto plaq = select_complementary(g, 1, SetKind::Plaquette, 3, rng);
    CHECK(plaq.members == std::vector<std::size_t>{0, 2, 4});
    CHECK_THROWS_AS(select_complementary(g, 1, SetKind::Plaquette, 2, rng),
                    std::invalid_argument);

    const auto rand_set = select_complementary(g, 1, SetKind::Random, 3, rng);
    CHECK(rand_set.members.size() == 3);
    const std::set<std::size_t> forbidden{1, 0, 2, 4};
    for (std::size_t q : rand_set.members) {
        CHECK(forbidden.count(q) == 0);
        CHECK(q < 27);
    }
    CHECK(std::is_sorted(rand_set.members.begin(), rand_set.members.end()));

    // same seed, same draw
    Rng rng_a(77), rng_b(77);
    CHECK(select_complementary(g, 7, SetKind::Random, 5, rng_a).members ==
          select_complementary(g, 7, SetKind::Random, 5, rng_b).members);

    CouplingGraph tiny(3, {{0, 1}, {0, 2}});
    CHECK_THROWS_AS(select_complementary(tiny, 0, SetKind::Random, 1, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_complementary(g, 27, SetKind::Plaquette, 3, rng),
                    std::invalid_argument);
}

TEST_CASE("set kind names round-trip") {
    CHECK(to_string(SetKind::Plaquette) == "plaquette");
    CHECK(to_string(SetKind::Random) == "random");
    CHECK(set_kind_from_string("plaquette") == SetKind::Plaquette);
    CHECK(set_kind_from_string("random") == SetKind::Random);
    CHECK_THROWS_AS(set_kind_from_string("other"), std::invalid_argument);
}

namespace {

ProtocolConfig star_config(double j, bool exact) {
    // 3-leaf star plus three spectator qubits for random draws
    CouplingGraph g(7, {{0, 1}, {0, 2}, {0, 3}});
    ProtocolConfig cfg{g, HamiltonianSpec(g, std::vector<double>(7, 0.0), {j, j, j})};
    cfg.target = 0;
    cfg.kind = SetKind::Plaquette;
    cfg.set_size = 3;
    cfg.wait_time = 800e-9;
    cfg.n_shots = 400;
    cfg.exact_mode = exact;
    cfg.neighborhood_radius = 1;
    return cfg;
}

}  // namespace

TEST_CASE("exact-mode sample with no coupling leaks nothing") {
    auto cfg = star_config(0.0, true);
    const auto s = run_leakage_sample(cfg, 1);
    CHECK(s.chi_s == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.delta_chi == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.n_shots == 0);
    CHECK(s.members == std::vector<std::size_t>{1, 2, 3});
    CHECK(s.wait_time_ns == doctest::Approx(800.0));
}

TEST_CASE("exact-mode sample with coupling shows plaquette leakage") {
    const double jt = 1.0;  // J * T = 1 rad
    auto cfg = star_config(jt / 800e-9, true);
    const auto plaq = run_leakage_sample(cfg, 1);
    CHECK(plaq.delta_chi > 0.1);
    CHECK(plaq.chi_sq > plaq.chi_s);

    // a random set of spectators sees none of it
    cfg.kind = SetKind::Random;
    const auto rand_sample = run_leakage_sample(cfg, 1);
    CHECK(rand_sample.delta_chi == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(rand_sample.members == std::vector<std::size_t>{4, 5, 6});
}

TEST_CASE("sampled mode is deterministic in the seed") {
    auto cfg = star_config(0.5 / 800e-9, false);
    cfg.capture_dictionaries = true;
    const auto a = run_leakage_sample(cfg, 42);
    const auto b = run_leakage_sample(cfg, 42);
    CHECK(a.delta_chi == b.delta_chi);
    CHECK(a.chi_s == b.chi_s);
    CHECK(a.dicts0.has_value());
    CHECK(a.dicts0->size() == 81);
    CHECK(a.dicts0->front().n_shots == 400);
    const auto c = run_leakage_sample(cfg, 43);
    CHECK(c.delta_chi != a.delta_chi);
}

TEST_CASE("register cap rejects oversized measured registers") {
    auto cfg = star_config(0.0, true);
    cfg.register_cap = 3;
    CHECK_THROWS_AS(run_leakage_sample(cfg, 1), std::invalid_argument);
}

TEST_CASE("campaign results are independent of thread count") {
    CampaignConfig cfg{falcon27_coupling_map(),
                       {{"dev_a", 11}, {"dev_b", 12}},
                       {{1e5, 2e5}, {1e4, 5e4}, {0.0, 1e3}},
                       SpamModel(0.01, 0.02)};
    cfg.wait_time = 800e-9;
    cfg.neighborhood_radius = 1;
    cfg.strata = {{SetKind::Plaquette, 50, 3}, {SetKind::Random, 50, 3}};

    cfg.n_threads = 1;
    const auto a = run_campaign(cfg, 2024);
    cfg.n_threads = 3;
    const auto b = run_campaign(cfg, 2024);

    REQUIRE(a.size() == 6);
    REQUIRE(b.size() == 6);
    std::vector<ArchiveRow> rows_a, rows_b;
    for (const auto& s : a) rows_a.push_back(ArchiveRow::from_sample(s));
    for (const auto& s : b) rows_b.push_back(ArchiveRow::from_sample(s));
    CHECK(samples_csv_to_string(rows_a) == samples_csv_to_string(rows_b));

    std::size_t n_plaq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sample_index == i);
        CHECK(falcon27_coupling_map().degree(a[i].target) == 3);
        if (a[i].kind == SetKind::Plaquette) ++n_plaq;
        CHECK((a[i].device_label == "dev_a" || a[i].device_label == "dev_b"));
    }
    CHECK(n_plaq == 3);
}

TEST_CASE("campaign validation") {
    CampaignConfig cfg{CouplingGraph(2, {{0, 1}}), {}, {}, SpamModel()};
    CHECK_THROWS_AS(run_campaign(cfg, 1), std::invalid_argument);
    cfg.devices = {{"d", 1}};
    cfg.target_coordination = 5;  // no such qubit
    CHECK_THROWS_AS(run_campaign(cfg, 1), std::invalid_argument);
}
