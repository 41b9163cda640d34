#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ttnq/oracle.hpp"
#include "ttnq/rng.hpp"
#include "ttnq/tdvp.hpp"

using namespace ttnq;

namespace {

double max_mz_deviation(const Sample& a, const Sample& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.magnetization.size(); ++i)
        d = std::max(d, std::abs(a.magnetization[i] - b.magnetization[i]));
    return d;
}

double max_mz_deviation(const TimeSeries& a, const TimeSeries& b) {
    REQUIRE(a.samples.size() == b.samples.size());
    double d = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k].t == doctest::Approx(b.samples[k].t));
        d = std::max(d, max_mz_deviation(a.samples[k], b.samples[k]));
    }
    return d;
}

QuenchConfig quench(double g, double dt, double t_max, std::size_t chi) {
    QuenchConfig cfg;
    cfg.params = {1.0, g};
    cfg.dt = dt;
    cfg.t_max = t_max;
    cfg.chi = chi;
    return cfg;
}

}  // namespace

TEST_CASE("zero field leaves the polarized state invariant") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    for (auto mode : {TdvpMode::tdvp1, TdvpMode::tdvp2, TdvpMode::hybrid}) {
        auto cfg = quench(0.0, 0.05, 0.5, 8);
        cfg.mode = mode;
        cfg.hybrid_n = 3;
        const auto series = run(pattern, lat, cfg);
        REQUIRE_FALSE(series.error);
        CHECK(series.samples.size() == 11);
        for (const auto& s : series.samples) {
            for (double m : s.magnetization) CHECK(std::abs(m + 1.0) < 1e-12);
            CHECK(s.energy == doctest::Approx(-32.0).epsilon(1e-13));
            CHECK(s.discarded_weight < 1e-24);
        }
    }
}

TEST_CASE("two spins match the dense propagator") {
    const Lattice lat(1, 2, Boundary::open, Boundary::open);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto cfg = quench(0.5, 0.005, 1.0, 4);
    cfg.measure_every = 200;
    const auto series = run(pattern, lat, cfg);
    REQUIRE(series.samples.size() == 2);

    const auto mapping = build_mapping(lat);
    const Matrix h = support::dense_hamiltonian(build_hamiltonian(lat, cfg.params, mapping), 2);
    Vector psi = Vector::Zero(4);
    psi(3) = 1.0;  // both down
    const Vector out = support::dense_expm(h, cplx(0, -1.0)) * psi;
    const StateVector sv(lat, mapping, out);
    const auto exact = magnetization(sv);
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(series.samples[1].magnetization[i] - exact[i]) < 1e-8);
}

TEST_CASE("full-rank TDVP1 on 4x4 follows the oracle") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto cfg = quench(0.5, 0.005, 1.0, 256);
    cfg.measure_every = 50;
    const auto a = run(pattern, lat, cfg);
    const auto b = run_oracle(pattern, lat, cfg);
    REQUIRE_FALSE(a.error);
    CHECK(a.samples.back().max_bond == 256);
    CHECK(max_mz_deviation(a, b) < 1e-4);
}

TEST_CASE("full-rank TDVP1 is exact for every step size") {
    // The projector-splitting integrator reproduces the exact flow when the
    // manifold contains it, so there is no dt error left to converge.
    const Lattice lat(2, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto ref_cfg = quench(0.5, 0.1, 1.0, 16);
    ref_cfg.measure_every = 10;
    const auto ref = run_oracle(pattern, lat, ref_cfg);
    for (double dt : {0.1, 0.05, 0.025}) {
        auto cfg = quench(0.5, dt, 1.0, 16);
        cfg.measure_every = static_cast<std::size_t>(std::lround(1.0 / dt));
        const auto a = run(pattern, lat, cfg);
        CHECK(max_mz_deviation(a.samples.back(), ref.samples.back()) < 1e-10);
    }
}

TEST_CASE("TDVP2 grows bonds from a product state without noise") {
    const Lattice lat(2, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto cfg = quench(0.5, 0.05, 0.5, 16);
    cfg.mode = TdvpMode::tdvp2;
    cfg.noise = 0.0;
    const auto series = run(pattern, lat, cfg);
    REQUIRE_FALSE(series.error);
    CHECK(series.samples.front().max_bond == 1);
    CHECK(series.samples.back().max_bond > 1);
}

TEST_CASE("TDVP2 at full rank on 4x4 follows the oracle") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto cfg = quench(0.5, 0.01, 1.0, 256);
    cfg.mode = TdvpMode::tdvp2;
    cfg.measure_every = 20;
    const auto a = run(pattern, lat, cfg);
    const auto b = run_oracle(pattern, lat, cfg);
    REQUIRE_FALSE(a.error);
    CHECK(max_mz_deviation(a, b) < 1e-4);
    for (const auto& s : a.samples) CHECK(s.discarded_weight < 1e-20);
}

TEST_CASE("TDVP1 and TDVP2 agree on 4x4") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto c1 = quench(0.5, 0.02, 2.0, 64);
    c1.measure_every = 10;
    auto c2 = c1;
    c2.mode = TdvpMode::tdvp2;
    c2.truncation_cutoff = 1e-12;
    const auto a = run(pattern, lat, c1);
    const auto b = run(pattern, lat, c2);
    CHECK(max_mz_deviation(a, b) < 1e-3);
}

TEST_CASE("truncation is reported") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::square(2), lat);
    auto cfg = quench(0.8, 0.05, 1.0, 4);
    cfg.mode = TdvpMode::tdvp2;
    const auto series = run(pattern, lat, cfg);
    REQUIRE_FALSE(series.error);
    double total = 0.0;
    for (const auto& s : series.samples) {
        total += s.discarded_weight;
        CHECK(s.max_bond <= 4);
        CHECK(std::abs(s.norm - 1.0) < 1e-12);
    }
    CHECK(total > 0.0);
    CHECK(series.samples.back().renormalization < 1.0);
}

TEST_CASE("TDVP1 conserves energy and norm over 1000 steps") {
    const Lattice lat(4, 4);
    const auto pattern = make_pattern(PatternKind::square(2), lat);
    auto cfg = quench(0.5, 0.005, 5.0, 16);
    cfg.measure_every = 50;
    const auto series = run(pattern, lat, cfg);
    REQUIRE_FALSE(series.error);
    const double e0 = series.samples.front().energy;
    for (const auto& s : series.samples) {
        CHECK(std::abs(s.energy - e0) / std::abs(e0) <= 1e-8);
        CHECK(std::abs(s.norm - 1.0) <= 1e-10);
    }
}

TEST_CASE("TDVP1 is time reversible on 8-site systems") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const Lattice lat = seed % 2 ? Lattice(2, 4) : Lattice(1, 8, Boundary::open, Boundary::periodic);
        const auto mapping = build_mapping(lat);
        auto state = random_state(lat, mapping, 1 + rng.next() % 16, seed + 50);
        const Vector before = to_dense(state);
        const IsingParams p{rng.uniform(0.5, 1.5), rng.uniform(0.0, 1.5)};
        const double dt = rng.uniform(0.001, 0.1);
        TdvpEngine engine(state, build_hamiltonian(lat, p, mapping));
        engine.step_tdvp1(dt);
        engine.step_tdvp1(-dt);
        CHECK(std::abs(before.dot(to_dense(state))) >= 1.0 - 1e-8);
    }
}

TEST_CASE("run sampling and hooks") {
    const Lattice lat(2, 2);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);

    SUBCASE("t_max zero gives the initial sample") {
        const auto series = run(pattern, lat, quench(0.5, 0.01, 0.0, 4));
        REQUIRE(series.samples.size() == 1);
        CHECK(series.samples[0].t == 0.0);
        for (double m : series.samples[0].magnetization) CHECK(std::abs(m + 1.0) < 1e-14);
    }
    SUBCASE("measure_every thins the samples and hooks see every one") {
        auto cfg = quench(0.5, 0.01, 1.0, 4);
        cfg.measure_every = 25;
        cfg.observables.entropy_sites = {{{0, 0}}, {{0, 0}, {1, 1}}};
        cfg.observables.entropy_links = {1};
        cfg.observables.correlations = {{{0, 0}, CutDirection::row}};
        std::size_t seen = 0, checkpoints = 0;
        RunHooks hooks;
        hooks.on_sample = [&](const Sample&) { ++seen; };
        hooks.on_checkpoint = [&](const TreeState& s, double t) {
            ++checkpoints;
            CHECK(t == doctest::Approx(1.0));
            CHECK(s.site_count() == 4);
        };
        const auto series = run(pattern, lat, cfg, hooks);
        CHECK(series.samples.size() == 5);
        CHECK(seen == 5);
        CHECK(checkpoints == 1);
        CHECK(series.samples.back().t == doctest::Approx(1.0));
        CHECK(series.samples.back().entropies.size() == 3);
        CHECK(series.samples.back().correlations.size() == 1);
        CHECK(series.samples.back().entropies[1].entropy > 0.0);
    }
}

TEST_CASE("invalid configurations") {
    const Lattice lat(2, 2);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    CHECK_THROWS(run(pattern, lat, quench(0.5, 0.0, 1.0, 4)));
    CHECK_THROWS(run(pattern, lat, quench(0.5, 0.3, 1.0, 4)));
    CHECK_THROWS(run(pattern, lat, quench(0.5, 0.1, 1.0, 0)));
    CHECK_THROWS(run(pattern, Lattice(2, 3), quench(0.5, 0.1, 1.0, 4)));
    CHECK(tdvp_mode_from_string("hybrid") == TdvpMode::hybrid);
    CHECK_THROWS(tdvp_mode_from_string("tdvp3"));
}

TEST_CASE("step errors end the run with the samples kept") {
    const Lattice lat(2, 2);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto cfg = quench(5.0, 1.0, 3.0, 4);
    cfg.krylov_max_dim = 2;
    const auto series = run(pattern, lat, cfg);
    REQUIRE(series.error);
    CHECK(series.samples.size() >= 1);
}
