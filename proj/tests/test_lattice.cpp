#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ttnq/lattice.hpp"

using namespace ttnq;

namespace {

// Recursive construction: the first quadrant holds the transposed curve of
// the previous order, the last quadrant the anti-transposed one.
std::vector<std::pair<std::uint64_t, std::uint64_t>> hilbert_points(int order) {
    if (order == 0) return {{0, 0}};
    const auto prev = hilbert_points(order - 1);
    const std::uint64_t h = std::uint64_t{1} << (order - 1);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (auto [x, y] : prev) out.emplace_back(y, x);
    for (auto [x, y] : prev) out.emplace_back(x, y + h);
    for (auto [x, y] : prev) out.emplace_back(x + h, y + h);
    for (auto [x, y] : prev) out.emplace_back(2 * h - 1 - y, h - 1 - x);
    return out;
}

bool open_adjacent(Coord a, Coord b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

std::size_t non_adjacent_steps(const Lattice& lat, const SiteMapping& m) {
    std::size_t count = 0;
    for (std::size_t k = 0; k + 1 < m.size(); ++k)
        if (!open_adjacent(lat.coord(m.to_lattice[k]), lat.coord(m.to_lattice[k + 1]))) ++count;
    return count;
}

}  // namespace

TEST_CASE("hilbert curve of order one") {
    CHECK(hilbert_xy_to_d(1, 0, 0) == 0);
    CHECK(hilbert_d_to_xy(1, 0) == std::pair<std::uint64_t, std::uint64_t>{0, 0});
    CHECK(hilbert_d_to_xy(1, 1) == std::pair<std::uint64_t, std::uint64_t>{0, 1});
    CHECK(hilbert_d_to_xy(1, 2) == std::pair<std::uint64_t, std::uint64_t>{1, 1});
    CHECK(hilbert_d_to_xy(1, 3) == std::pair<std::uint64_t, std::uint64_t>{1, 0});
}

TEST_CASE("hilbert curve matches the recursive construction") {
    for (int k = 1; k <= 6; ++k) {
        const auto pts = hilbert_points(k);
        for (std::uint64_t d = 0; d < pts.size(); ++d) {
            CHECK(hilbert_d_to_xy(k, d) == pts[d]);
            CHECK(hilbert_xy_to_d(k, pts[d].first, pts[d].second) == d);
        }
    }
}

TEST_CASE("hilbert curve is a bijection with unit steps up to order six") {
    for (int k = 1; k <= 6; ++k) {
        const std::uint64_t side = std::uint64_t{1} << k;
        std::set<std::uint64_t> seen;
        for (std::uint64_t x = 0; x < side; ++x)
            for (std::uint64_t y = 0; y < side; ++y) {
                const auto d = hilbert_xy_to_d(k, x, y);
                CHECK(hilbert_d_to_xy(k, d) == std::pair{x, y});
                seen.insert(d);
            }
        CHECK(seen.size() == side * side);
        CHECK(*seen.rbegin() == side * side - 1);

        const Lattice lat(static_cast<int>(side), static_cast<int>(side));
        const auto m = build_mapping(lat);
        CHECK(m.kind == MappingKind::hilbert);
        CHECK(non_adjacent_steps(lat, m) == 0);
    }
}

TEST_CASE("mapping is a bijection for every shape up to 64x64") {
    for (int r = 1; r <= 64; ++r)
        for (int c = 1; c <= 64; ++c) {
            const Lattice lat(r, c);
            const auto m = build_mapping(lat);
            REQUIRE(m.size() == lat.size());
            bool ok = true;
            for (std::size_t i = 0; i < lat.size(); ++i) {
                ok = ok && m.to_lattice[m.to_linear[i]] == i;
                ok = ok && m.to_linear[m.to_lattice[i]] == i;
            }
            CHECK_MESSAGE(ok, r << "x" << c);
        }
}

TEST_CASE("16x16 uses the Hilbert curve") {
    const auto m = build_mapping(Lattice(16, 16));
    CHECK(m.kind == MappingKind::hilbert);
    CHECK_FALSE(m.fallback);
    std::set<std::size_t> s(m.to_linear.begin(), m.to_linear.end());
    CHECK(s.size() == 256);
}

TEST_CASE("2:1 rectangles use two Hilbert tiles") {
    for (auto [r, c] : {std::pair{16, 8}, std::pair{8, 16}, std::pair{4, 8}, std::pair{8, 4}, std::pair{2, 4}}) {
        const Lattice lat(r, c, Boundary::periodic, Boundary::open);
        const auto m = build_mapping(lat);
        CHECK(m.kind == MappingKind::hilbert_tiles);
        CHECK_FALSE(m.fallback);
        CHECK(non_adjacent_steps(lat, m) <= 1);
        std::set<std::size_t> s(m.to_linear.begin(), m.to_linear.end());
        CHECK(s.size() == lat.size());
    }
}

TEST_CASE("other shapes fall back to a snake") {
    const Lattice lat(3, 5);
    const auto m = build_mapping(lat);
    CHECK(m.kind == MappingKind::snake);
    CHECK(m.fallback);
    CHECK(non_adjacent_steps(lat, m) == 0);
    CHECK(m.to_lattice[0] == lat.index({0, 0}));
    CHECK(m.to_lattice[5] == lat.index({1, 4}));
}

TEST_CASE("neighbor pairs") {
    CHECK(neighbor_pairs(Lattice(4, 4)).size() == 32);
    CHECK(neighbor_pairs(Lattice(2, 2)).size() == 4);
    CHECK(neighbor_pairs(Lattice(1, 2, Boundary::open, Boundary::open)).size() == 1);
    CHECK(neighbor_pairs(Lattice(1, 2)).size() == 1);
    CHECK(neighbor_pairs(Lattice(4, 8, Boundary::periodic, Boundary::open)).size() == 4 * 7 + 4 * 8);
    for (int n = 3; n <= 12; ++n) {
        const auto pairs = neighbor_pairs(Lattice::periodic(n));
        CHECK(pairs.size() == static_cast<std::size_t>(2 * n * n));
        std::set<std::pair<std::size_t, std::size_t>> unique(pairs.begin(), pairs.end());
        CHECK(unique.size() == pairs.size());
        for (auto [a, b] : pairs) CHECK(a < b);
    }
}

TEST_CASE("lattice index and coordinates") {
    const Lattice lat(3, 7);
    for (std::size_t i = 0; i < lat.size(); ++i) CHECK(lat.index(lat.coord(i)) == i);
    CHECK_THROWS(lat.index({3, 0}));
    CHECK_THROWS(Lattice(0, 4));
    CHECK(boundary_from_string(to_string(Boundary::open)) == Boundary::open);
    CHECK_THROWS(boundary_from_string("twisted"));
}

TEST_CASE("mapping table") {
    const Lattice lat(2, 2);
    std::ostringstream s;
    write_mapping_table(s, lat, build_mapping(lat));
    CHECK(s.str() == "# row col linear (hilbert)\n0 0 0\n0 1 1\n1 0 3\n1 1 2\n");
}
