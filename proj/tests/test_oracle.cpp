#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ttnq/oracle.hpp"
#include "ttnq/rng.hpp"

using namespace ttnq;

namespace {

StateVector bell(const Lattice& lat) {
    Vector v = Vector::Zero(4);
    v(0) = v(3) = 1.0 / std::numbers::sqrt2;
    return StateVector(lat, build_mapping(lat), v);
}

std::vector<PauliTerm> random_terms(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PauliTerm> terms;
    const Axis axes[] = {Axis::x, Axis::y, Axis::z};
    for (int k = 0; k < 12; ++k) {
        PauliTerm t;
        t.coefficient = rng.uniform(-1, 1);
        const std::size_t a = rng.next() % n;
        t.factors.push_back({a, axes[rng.next() % 3]});
        if (rng.next() % 2 && n > 1) t.factors.push_back({(a + 1 + rng.next() % (n - 1)) % n, axes[rng.next() % 3]});
        terms.push_back(t);
    }
    return terms;
}

}  // namespace

TEST_CASE("single spin Rabi oscillation") {
    const Lattice lat(1, 1);
    const auto mapping = build_mapping(lat);
    const double g = 0.7;
    auto s = StateVector::product(make_pattern(PatternKind::polarized(), lat), mapping);
    const PauliOperator h(build_hamiltonian(lat, {1.0, g}, mapping), 1);
    evolve(s, h, 0.01, 100, {});
    CHECK(std::abs(magnetization(s)[0] + std::cos(2.0 * g * 1.0)) < 1e-9);
}

TEST_CASE("zero field keeps every magnetization") {
    const Lattice lat(3, 3);
    const auto mapping = build_mapping(lat);
    std::vector<bool> bits(9, false);
    bits[4] = true;
    const auto pattern = make_pattern(PatternKind::custom(bits), lat);
    auto s = StateVector::product(pattern, mapping);
    evolve(s, PauliOperator(build_hamiltonian(lat, {1.0, 0.0}, mapping), 9), 0.1, 10, {});
    const auto m = magnetization(s);
    for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(m[i] - pattern.spins[i]) < 1e-12);
}

TEST_CASE("2x2 evolution matches the dense exponential") {
    const Lattice lat(2, 2);
    const auto mapping = build_mapping(lat);
    const auto terms = build_hamiltonian(lat, {1.0, 0.5}, mapping);
    auto s = StateVector::product(make_pattern(PatternKind::polarized(), lat), mapping);
    const Vector start = s.amplitudes();
    evolve(s, PauliOperator(terms, 4), 0.05, 40, {});
    const Vector exact = support::dense_expm(support::dense_hamiltonian(terms, 4), cplx(0, -2.0)) * start;
    CHECK((s.amplitudes() - exact).norm() < 1e-9);
}

TEST_CASE("pauli operator matches the Kronecker construction") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t n = 1 + seed % 6;
        const auto terms = random_terms(n, seed);
        const PauliOperator op(terms, n);
        const Matrix dense = support::dense_hamiltonian(terms, n);
        const Vector v = support::random_vector(op.dim(), seed + 7);
        Vector out(v.size());
        op.apply(v.data(), out.data());
        CHECK((out - dense * v).norm() < 1e-12 * v.norm() * (1.0 + dense.norm()));
        CHECK(op.expectation(v / v.norm()) == doctest::Approx((v.adjoint() * dense * v)(0).real() / v.squaredNorm()));
    }
}

TEST_CASE("real application agrees with complex") {
    const Lattice lat(2, 3);
    const auto terms = build_hamiltonian(lat, {1.0, 0.3}, build_mapping(lat));
    const PauliOperator op(terms, 6);
    REQUIRE(op.is_real());
    Rng rng(3);
    std::vector<double> x(op.dim()), y(op.dim());
    Vector xc(static_cast<Eigen::Index>(op.dim())), yc(static_cast<Eigen::Index>(op.dim()));
    for (std::size_t i = 0; i < x.size(); ++i) xc(static_cast<Eigen::Index>(i)) = x[i] = rng.uniform(-1, 1);
    op.apply(x.data(), y.data());
    op.apply(xc.data(), yc.data());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - yc(static_cast<Eigen::Index>(i)).real()) < 1e-14);
}

TEST_CASE("lowest eigenvalues match dense diagonalization up to 8 sites") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::pair<int, int> shapes[] = {{1, 2}, {2, 2}, {1, 5}, {2, 3}, {1, 7}, {2, 4}};
        const auto [r, c] = shapes[seed % 6];
        const Lattice lat(r, c, rng.next() % 2 ? Boundary::open : Boundary::periodic, Boundary::periodic);
        const auto terms = build_hamiltonian(lat, {rng.uniform(0.5, 1.5), rng.uniform(0.0, 1.5)}, build_mapping(lat));
        const std::size_t count = std::min<std::size_t>(1 + rng.next() % 6, std::size_t{1} << lat.size());
        const auto slice = lowest_eigenvalues(terms, lat.size(), count);
        Eigen::SelfAdjointEigenSolver<Matrix> es(support::dense_hamiltonian(terms, lat.size()));
        REQUIRE(slice.eigenvalues.size() == count);
        for (std::size_t k = 0; k < count; ++k)
            CHECK(std::abs(slice.eigenvalues[k] - es.eigenvalues()(static_cast<Eigen::Index>(k))) < 1e-9);
        CHECK(slice.gaps[0] == 0.0);
    }
}

TEST_CASE("classical spectrum of the 4x4 torus") {
    const Lattice lat(4, 4);
    const auto terms = build_hamiltonian(lat, {1.0, 0.0}, build_mapping(lat));
    const auto slice = lowest_eigenvalues(terms, 16, 18);
    CHECK(slice.eigenvalues[0] == doctest::Approx(-32.0));
    CHECK(slice.eigenvalues[1] == doctest::Approx(-32.0));
    for (std::size_t k = 2; k < 18; ++k) CHECK(slice.eigenvalues[k] == doctest::Approx(-24.0));
}

TEST_CASE("two decoupled sectors of a single bond") {
    const Lattice lat(1, 2, Boundary::open, Boundary::open);
    const auto slice = lowest_eigenvalues(build_hamiltonian(lat, {1.0, 0.0}), 2, 4);
    CHECK(slice.eigenvalues == std::vector<double>{-1.0, -1.0, 1.0, 1.0});
}

TEST_CASE("sector eigenvalues from the polarized state") {
    const Lattice lat(2, 3);
    const auto mapping = build_mapping(lat);
    const auto terms = build_hamiltonian(lat, {1.0, 0.4}, mapping);
    const PauliOperator op(terms, 6);
    const auto start = StateVector::product(make_pattern(PatternKind::polarized(), lat), mapping).amplitudes();
    const auto sector = sector_eigenvalues(op, start, 3);
    REQUIRE(sector.size() == 3);
    Eigen::SelfAdjointEigenSolver<Matrix> es(support::dense_hamiltonian(terms, 6));
    CHECK(sector[0] == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-9));
    for (double e : sector) {
        bool found = false;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) found = found || std::abs(es.eigenvalues()(i) - e) < 1e-8;
        CHECK(found);
    }
}

TEST_CASE("lattice symmetries") {
    const Lattice torus = Lattice::periodic(4);
    const auto m = build_mapping(torus);
    const auto sym = lattice_symmetries(torus, m);
    CHECK(sym.size() == 128);
    CHECK(lattice_symmetries(Lattice(4, 4, Boundary::open, Boundary::open), m).size() == 8);
    const Lattice strip(3, 5, Boundary::open, Boundary::open);
    CHECK(lattice_symmetries(strip, build_mapping(strip)).size() == 4);

    // Every symmetry commutes with H.
    const auto terms = build_hamiltonian(torus, {1.0, 0.3}, m);
    const PauliOperator op(terms, 16);
    const Vector v = support::random_vector(op.dim(), 5);
    Vector hv(op.dim());
    op.apply(v.data(), hv.data());
    Rng rng(6);
    for (int k = 0; k < 10; ++k) {
        const auto& p = sym[rng.next() % sym.size()];
        auto permute = [&](const Vector& x) {
            Vector y(x.size());
            for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(x.size()); ++b) {
                std::uint64_t image = 0;
                for (std::size_t s = 0; s < 16; ++s)
                    if (b >> s & 1) image |= std::uint64_t{1} << p[s];
                y(static_cast<Eigen::Index>(image)) = x(static_cast<Eigen::Index>(b));
            }
            return y;
        };
        Vector hpv(op.dim());
        const Vector pv = permute(v);
        op.apply(pv.data(), hpv.data());
        CHECK((hpv - permute(hv)).norm() < 1e-10);
    }
}

TEST_CASE("projected sector Lanczos stays at zero momentum") {
    const Lattice lat = Lattice::periodic(4);
    const double g = 0.1, c = g * g / 8.0;
    const auto levels = continued_band_levels(lat, {1.0, g});
    CHECK(levels.e0 == doctest::Approx(-32.0 - 16.0 * c).epsilon(1e-7));
    CHECK(std::abs(levels.delta01() - (8.0 - 6.0 * c)) < 1e-4);
    CHECK(std::abs(levels.delta12() - (4.0 + 6.0 * c)) < 1e-4);
}

TEST_CASE("product and Bell observables") {
    const Lattice lat(1, 2, Boundary::open, Boundary::open);
    const auto p = StateVector::product(make_pattern(PatternKind::custom({true, false}), lat), build_mapping(lat));
    CHECK(correlation(p, {0, 0}, {0, 1}) == 0.0);
    CHECK(subsystem_entropy(p, {{0, 0}}).entropy < 1e-14);
    CHECK(magnetization(p) == std::vector<double>{1.0, -1.0});

    const auto b = bell(lat);
    CHECK(correlation(b, {0, 0}, {0, 1}) == doctest::Approx(1.0));
    CHECK(subsystem_entropy(b, {{0, 1}}).entropy == doctest::Approx(std::numbers::ln2));
    CHECK(bipartition_entropy(b, {0}).entropy == doctest::Approx(std::numbers::ln2));
    const Matrix rho = reduced_density_matrix(b, {{0, 0}, {0, 1}});
    CHECK(rho(0, 3).real() == doctest::Approx(0.5));
}

TEST_CASE("single-site entropies of an evolved 3x3 state stay in range") {
    const Lattice lat(3, 3);
    const auto mapping = build_mapping(lat);
    auto s = StateVector::product(make_pattern(PatternKind::polarized(), lat), mapping);
    evolve(s, PauliOperator(build_hamiltonian(lat, {1.0, 0.9}, mapping), 9), 0.05, 30, {});
    for (std::size_t i = 0; i < 9; ++i) {
        const double e = subsystem_entropy(s, {lat.coord(i)}).entropy;
        CHECK(e >= 0.0);
        CHECK(e <= std::numbers::ln2 + 1e-12);
    }
    CHECK(subsystem_entropy(s, {{0, 0}}).entropy > 1e-3);
}

TEST_CASE("step size does not change the Krylov evolution") {
    const Lattice lat(2, 3);
    const auto mapping = build_mapping(lat);
    const PauliOperator h(build_hamiltonian(lat, {1.0, 0.6}, mapping), 6);
    auto a = StateVector::product(make_pattern(PatternKind::stripe(0), lat), mapping);
    auto b = a;
    const KrylovOptions opts{1e-12, 40};
    evolve(a, h, 0.1, 10, opts);
    evolve(b, h, 0.05, 20, opts);
    CHECK((a.amplitudes() - b.amplitudes()).norm() < 10 * 1e-12 * 20);
}

TEST_CASE("run_oracle") {
    const Lattice lat(2, 2);
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    QuenchConfig cfg;
    cfg.params = {1.0, 0.5};
    cfg.dt = 0.1;
    cfg.t_max = 1.0;
    cfg.measure_every = 5;
    cfg.observables.entropy_sites = {{{0, 0}}};
    cfg.observables.entropy_links = {1};
    cfg.observables.correlations = {{{0, 0}, CutDirection::col}};
    StateVector final_state = StateVector::product(pattern, build_mapping(lat));
    const auto series = run_oracle(pattern, lat, cfg, {}, &final_state);
    CHECK(series.engine == "oracle");
    REQUIRE(series.samples.size() == 3);
    for (double m : series.samples[0].magnetization) CHECK(m == -1.0);
    CHECK(series.samples.back().magnetization == magnetization(final_state));
    CHECK(series.samples.back().entropies.size() == 2);

    CHECK_THROWS(run_oracle(make_pattern(PatternKind::polarized(), Lattice(5, 5)), Lattice(5, 5), cfg));
}

TEST_CASE("statevector round-trip") {
    const Lattice lat(2, 3);
    const auto mapping = build_mapping(lat);
    StateVector s(lat, mapping, support::random_vector(64, 5));
    std::stringstream buf;
    write_statevector(buf, s, 77);
    const auto [r, hash] = read_statevector(buf);
    CHECK(hash == 77);
    CHECK(r.lattice().rows == 2);
    CHECK(r.amplitudes() == s.amplitudes());
}
