#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "ttnq/oracle.hpp"
#include "ttnq/rng.hpp"
#include "ttnq/tdvp.hpp"
#include "ttnq/ttn.hpp"

using namespace ttnq;

namespace {

const std::vector<std::pair<int, int>> kShapes = {{1, 2}, {2, 2}, {1, 3}, {2, 3}, {3, 3}, {2, 4}, {1, 5},
                                                  {2, 5}, {3, 4}, {4, 3}, {1, 7}, {2, 6}};

struct RandomCase {
    Lattice lat;
    TreeState state;
    StateVector dense;
};

RandomCase random_case(std::uint64_t seed) {
    Rng rng(seed);
    const auto [r, c] = kShapes[rng.next() % kShapes.size()];
    const Lattice lat(r, c, rng.next() % 2 ? Boundary::open : Boundary::periodic, Boundary::periodic);
    const auto mapping = build_mapping(lat);
    const std::size_t chi = 1 + rng.next() % 16;
    auto state = random_state(lat, mapping, chi, seed);
    Vector v = to_dense(state);
    return {lat, state, StateVector(lat, mapping, v)};
}

std::vector<std::size_t> slots_below(const TreeState& s, std::size_t edge) {
    auto [lo, hi] = s.topology().slot_range(edge);
    std::vector<std::size_t> sites;
    for (std::size_t k = lo; k < std::min(hi, s.site_count()); ++k) sites.push_back(k);
    return sites;
}

TreeState bell_pair(double sign = 1.0) {
    const Lattice lat(1, 2, Boundary::open, Boundary::open);
    DenseTensor t({{"c0", 2}, {"c1", 2}, {"p", 1}});
    t.at({0, 0, 0}) = 1.0 / std::numbers::sqrt2;
    t.at({1, 1, 0}) = sign / std::numbers::sqrt2;
    return TreeState(lat, build_mapping(lat), {t}, 0, 4);
}

}  // namespace

TEST_CASE("topology") {
    const TreeTopology topo(16);
    CHECK(topo.leaf_slots() == 16);
    CHECK(topo.node_count() == 15);
    CHECK(topo.is_bottom(7));
    CHECK_FALSE(topo.is_bottom(6));
    CHECK(topo.path(7, 14) == std::vector<std::size_t>{7, 3, 1, 0, 2, 6, 14});
    CHECK(topo.edges().size() == 14);
    const TreeTopology odd(5);
    CHECK(odd.leaf_slots() == 8);
    CHECK(odd.sites_below(6) == 0);
    CHECK_FALSE(odd.active(6));
    CHECK(odd.sites_below(1) == 4);
}

TEST_CASE("bond dimensions respect the cut rank") {
    const auto dims = bond_dimensions(TreeTopology(4), 100);
    for (std::size_t n = 1; n < dims.size(); ++n) CHECK(dims[n] <= 4);
    const auto big = bond_dimensions(TreeTopology(16), 256);
    CHECK(big[1] == 256);
    CHECK(big[3] == 16);
    CHECK(big[7] == 4);
}

TEST_CASE("product states") {
    const Lattice lat(4, 4);
    const auto mapping = build_mapping(lat);
    std::vector<bool> bits(16, false);
    bits[3] = bits[6] = bits[9] = true;
    const auto pattern = make_pattern(PatternKind::custom(bits), lat);

    SUBCASE("noise zero") {
        const auto s = from_product(pattern, mapping, 8, 0.0, 1);
        const auto m = Observer(s).magnetization();
        for (std::size_t i = 0; i < 16; ++i) CHECK(m[i] == static_cast<double>(pattern.spins[i]));
    }
    SUBCASE("tiny noise") {
        const auto s = from_product(pattern, mapping, 100, 1e-16, 1);
        CHECK(std::abs(s.norm() - 1.0) < 1e-14);
        const auto m = Observer(s).magnetization();
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(m[i] - pattern.spins[i]) < 1e-14);
        CHECK(s.max_bond() > 1);
        CHECK(s.isometry_error() < 1e-10);
    }
    SUBCASE("four sites never exceed rank four") {
        const Lattice small(2, 2);
        const auto s = from_product(make_pattern(PatternKind::polarized(), small), build_mapping(small), 100, 1e-16, 2);
        CHECK(s.max_bond() <= 4);
    }
    SUBCASE("product observables") {
        const auto s = from_product(pattern, mapping, 4, 1e-16, 3);
        const Observer ob(s);
        CHECK(std::abs(ob.expect_local({0, 0}, Axis::x)) < 1e-14);
        CHECK(std::abs(ob.correlation({0, 0}, {2, 1})) < 1e-14);
        for (auto dir : {CutDirection::row, CutDirection::col, CutDirection::diagonal}) {
            const auto cut = ob.correlation_cut({1, 2}, dir);
            for (std::size_t i = 0; i < cut.values.size(); ++i) CHECK(std::abs(cut.values[i]) < 1e-14);
        }
        CHECK(ob.subsystem_entropy({{0, 0}, {1, 1}}).entropy < 1e-12);
        for (auto e : s.topology().edges()) CHECK(link_entropy(s, e).entropy < 1e-12);
    }
}

TEST_CASE("polarized energy") {
    const Lattice lat(4, 4);
    const auto mapping = build_mapping(lat);
    const auto s = from_product(make_pattern(PatternKind::polarized(), lat), mapping, 16, 0.0, 1);
    const auto terms = build_hamiltonian(lat, {1.0, 0.77}, mapping);
    CHECK(energy(s, terms) == doctest::Approx(-32.0).epsilon(1e-14));
    CHECK(Observer(s).expect_local({2, 3}, Axis::z) == -1.0);
    CHECK(Observer(s).expect_local({2, 3}, Axis::x) == 0.0);
}

TEST_CASE("bell pair") {
    const auto s = bell_pair();
    const Observer ob(s);
    CHECK(ob.correlation({0, 0}, {0, 1}) == doctest::Approx(1.0));
    CHECK(ob.subsystem_entropy({{0, 0}}).entropy == doctest::Approx(std::numbers::ln2));
    CHECK(ob.subsystem_entropy({{0, 0}}).max_entropy == doctest::Approx(std::numbers::ln2));
    CHECK(ob.subsystem_entropy({{0, 0}, {0, 1}}).entropy < 1e-12);
}

TEST_CASE("link entropy of a split pair") {
    // Sites 0 and 2 of a four-site chain share a Bell pair; sites 1 and 3 are
    // down. The link above node 1 (slots 0 and 1) cuts the pair.
    const Lattice lat(1, 4, Boundary::open, Boundary::open);
    const auto mapping = build_mapping(lat);
    const auto state = random_state(lat, mapping, 4, 5);
    Vector v = Vector::Zero(16);
    v(0b1010) = 1.0 / std::numbers::sqrt2;
    v(0b1111) = 1.0 / std::numbers::sqrt2;
    StateVector sv(lat, mapping, v);
    CHECK(bipartition_entropy(sv, {0, 1}).entropy == doctest::Approx(std::numbers::ln2));
    (void)state;
}

TEST_CASE("observables agree with the dense state on random inputs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto rc = random_case(seed);
        const auto& lat = rc.lat;
        const Observer ob(rc.state);
        const auto terms = build_hamiltonian(lat, {1.0, 0.7}, rc.state.mapping());
        CHECK(std::abs(rc.dense.norm() - 1.0) < 1e-12);

        const auto m1 = ob.magnetization(), m2 = magnetization(rc.dense);
        for (std::size_t i = 0; i < m1.size(); ++i) CHECK(std::abs(m1[i] - m2[i]) < 1e-8);

        Rng rng(seed + 1);
        const std::size_t ia = rng.next() % lat.size();
        const std::size_t ib = (ia + 1 + rng.next() % (lat.size() - 1)) % lat.size();
        const Coord a = lat.coord(ia), b = lat.coord(ib);
        CHECK(std::abs(ob.expect_local(a, Axis::x) - expect_local(rc.dense, a, Axis::x)) < 1e-8);
        CHECK(std::abs(ob.expect_local(b, Axis::y) - expect_local(rc.dense, b, Axis::y)) < 1e-8);
        CHECK(std::abs(ob.correlation(a, b) - correlation(rc.dense, a, b)) < 1e-8);
        CHECK(ob.correlation(a, b) == ob.correlation(b, a));
        const auto e1 = ob.subsystem_entropy({a, b}), e2 = subsystem_entropy(rc.dense, {a, b});
        CHECK(std::abs(e1.entropy - e2.entropy) < 1e-8);
        CHECK(std::abs(ob.subsystem_entropy({a}).entropy - subsystem_entropy(rc.dense, {a}).entropy) < 1e-8);

        const double e_dense = energy(rc.dense, terms);
        CHECK(std::abs(energy(rc.state, terms) - e_dense) < 1e-8);
        CHECK(std::abs(ob.energy_per_term(terms) - e_dense) < 1e-8);

        for (auto dir : {CutDirection::row, CutDirection::col, CutDirection::diagonal}) {
            const auto c1 = ob.correlation_cut(a, dir), c2 = correlation_cut(rc.dense, a, dir);
            REQUIRE(c1.values.size() == c2.values.size());
            for (std::size_t i = 0; i < c1.values.size(); ++i) CHECK(std::abs(c1.values[i] - c2.values[i]) < 1e-8);
        }

        for (auto e : rc.state.topology().edges()) {
            if (!rc.state.topology().active(e)) continue;
            const auto sites = slots_below(rc.state, e);
            if (sites.size() == lat.size()) continue;
            const auto le = link_entropy(rc.state, e);
            CHECK(std::abs(le.entropy - bipartition_entropy(rc.dense, sites).entropy) < 1e-8);
            const double bound = std::log(static_cast<double>(std::min(
                {std::size_t{1} << sites.size(), std::size_t{1} << (lat.size() - sites.size()), rc.state.bond_dim(e)})));
            CHECK(le.entropy <= bound + 1e-12);
        }
    }
}

TEST_CASE("moving the center preserves the state") {
    const Lattice lat(2, 4);
    const auto mapping = build_mapping(lat);
    auto s = random_state(lat, mapping, 8, 3);
    const Vector v = to_dense(s);
    const std::size_t leaf = s.topology().node_count() - 1;

    auto same = s;
    move_center(same, same.center());
    CHECK((to_dense(same) - v).norm() == 0.0);

    move_center(s, leaf);
    CHECK(s.isometry_error() < 1e-10);
    move_center(s, 0);
    move_center(s, 3);
    CHECK(std::abs(to_dense(s).dot(v)) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
        move_center(s, rng.next() % s.topology().node_count());
        CHECK(std::abs(s.norm() - 1.0) < 1e-12);
        CHECK(s.isometry_error() < 1e-10);
    }
    CHECK((to_dense(s) - v).norm() < 1e-12);
}

TEST_CASE("evolved 4x4 state") {
    const Lattice lat(4, 4);
    QuenchConfig cfg;
    cfg.params = {1.0, 0.5};
    cfg.chi = 16;
    const auto pattern = make_pattern(PatternKind::polarized(), lat);
    auto s = initial_state(pattern, cfg);
    const auto terms = build_hamiltonian(lat, cfg.params, s.mapping());
    TdvpEngine engine(s, terms);
    for (int k = 0; k < 20; ++k) engine.step_tdvp1(0.02);
    CHECK(s.isometry_error() < 1e-10);
    const StateVector sv(lat, s.mapping(), to_dense(s));
    const Observer ob(s);
    CHECK(std::abs(ob.subsystem_entropy({{0, 0}, {0, 1}}).entropy - subsystem_entropy(sv, {{0, 0}, {0, 1}}).entropy) < 1e-8);
    CHECK(std::abs(ob.subsystem_entropy({{1, 1}, {3, 2}}).entropy - subsystem_entropy(sv, {{1, 1}, {3, 2}}).entropy) < 1e-8);
    CHECK(ob.subsystem_entropy({{0, 0}, {0, 1}}).entropy > 1e-4);

    for (auto dir : {CutDirection::row, CutDirection::col, CutDirection::diagonal}) {
        const Coord anchor{1, 2};
        const auto cut = ob.correlation_cut(anchor, dir);
        for (std::size_t i = 0; i < cut.sites.size(); ++i) {
            if (i == cut.anchor_index) CHECK(std::abs(cut.values[i] - ob.variance(anchor)) < 1e-14);
            else CHECK(std::abs(cut.values[i] - ob.correlation(anchor, cut.sites[i])) < 1e-14);
        }
    }
}

TEST_CASE("reflection-symmetric state gives a symmetric cut") {
    // Full rank on 2x4, so the evolution keeps the translation symmetry of the
    // polarized quench exactly.
    const Lattice lat(2, 4);
    QuenchConfig cfg;
    cfg.params = {1.0, 0.5};
    cfg.chi = 16;
    cfg.noise = 0.0;
    auto s = initial_state(make_pattern(PatternKind::polarized(), lat), cfg);
    TdvpEngine engine(s, build_hamiltonian(lat, cfg.params, s.mapping()));
    for (int k = 0; k < 20; ++k) engine.step_tdvp1(0.05);
    const auto row = correlation_cut(s, {0, 1}, CutDirection::row);
    CHECK(std::abs(row.values[0] - row.values[2]) < 1e-10);
    CHECK(std::abs(row.values[0]) > 1e-4);
}

TEST_CASE("cut sites") {
    const Lattice lat(4, 6, Boundary::periodic, Boundary::open);
    CHECK(cut_sites(lat, {1, 2}, CutDirection::row).size() == 6);
    CHECK(cut_sites(lat, {1, 2}, CutDirection::col).size() == 4);
    const auto d = cut_sites(lat, {1, 2}, CutDirection::diagonal);
    REQUIRE(d.size() == 6);
    CHECK(d.front() == Coord{3, 0});
    CHECK(d[2] == Coord{1, 2});
    CHECK(d.back() == Coord{0, 5});
    CHECK(cut_direction_from_string("diagonal") == CutDirection::diagonal);
    CHECK_THROWS(cut_direction_from_string("up"));
}

TEST_CASE("checkpoint round-trip") {
    const Lattice lat(2, 3);
    auto s = random_state(lat, build_mapping(lat), 5, 8);
    move_center(s, 4);
    std::stringstream buf;
    write_checkpoint(buf, s, 0xabcdefULL);
    const auto [r, hash] = read_checkpoint(buf);
    CHECK(hash == 0xabcdefULL);
    CHECK(r.center() == 4);
    CHECK(r.max_chi() == s.max_chi());
    CHECK((to_dense(r) - to_dense(s)).norm() == 0.0);

    std::stringstream bad("not a checkpoint");
    CHECK_THROWS(read_checkpoint(bad));
}

TEST_CASE("invalid requests") {
    const auto s = bell_pair();
    CHECK_THROWS(link_entropy(s, 0));
    CHECK_THROWS(Observer(s).subsystem_entropy({{0, 0}, {0, 0}}));
    CHECK_THROWS(Observer(s).expect_local({1, 0}, Axis::z));
}
