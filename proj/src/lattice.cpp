#include "ttnq/lattice.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

namespace ttnq {

Lattice::Lattice(int rows_, int cols_, Boundary br, Boundary bc)
    : rows(rows_), cols(cols_), boundary_rows(br), boundary_cols(bc) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("lattice dimensions must be positive");
}

std::size_t Lattice::index(Coord c) const {
    if (!contains(c)) throw std::out_of_range("coordinate outside lattice");
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c.col);
}

Coord Lattice::coord(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("site index outside lattice");
    return {static_cast<int>(i / static_cast<std::size_t>(cols)), static_cast<int>(i % static_cast<std::size_t>(cols))};
}

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }

Boundary boundary_from_string(const std::string& s) {
    if (s == "periodic") return Boundary::periodic;
    if (s == "open") return Boundary::open;
    throw std::invalid_argument("unknown boundary '" + s + "' (expected periodic|open)");
}

std::string to_string(MappingKind k) {
    switch (k) {
        case MappingKind::hilbert: return "hilbert";
        case MappingKind::hilbert_tiles: return "hilbert_tiles";
        case MappingKind::snake: return "snake";
    }
    return "unknown";
}

std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const Lattice& lat) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto add = [&](std::size_t a, std::size_t b) {
        if (a == b) return;
        auto p = std::minmax(a, b);
        if (seen.insert(p).second) out.emplace_back(p.first, p.second);
    };
    for (int r = 0; r < lat.rows; ++r)
        for (int c = 0; c < lat.cols; ++c) {
            const auto here = lat.index({r, c});
            if (c + 1 < lat.cols)
                add(here, lat.index({r, c + 1}));
            else if (lat.boundary_cols == Boundary::periodic)
                add(here, lat.index({r, 0}));
            if (r + 1 < lat.rows)
                add(here, lat.index({r + 1, c}));
            else if (lat.boundary_rows == Boundary::periodic)
                add(here, lat.index({0, c}));
        }
    return out;
}

namespace {

void rotate(std::uint64_t n, std::uint64_t& x, std::uint64_t& y, std::uint64_t rx, std::uint64_t ry) {
    if (ry == 0) {
        if (rx == 1) {
            x = n - 1 - x;
            y = n - 1 - y;
        }
        std::swap(x, y);
    }
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(int v) {
    int k = 0;
    while ((1 << k) < v) ++k;
    return k;
}

}  // namespace

std::uint64_t hilbert_xy_to_d(int order, std::uint64_t x, std::uint64_t y) {
    if (order < 0 || order > 30) throw std::invalid_argument("hilbert order out of range");
    const std::uint64_t n = std::uint64_t{1} << order;
    if (x >= n || y >= n) throw std::out_of_range("hilbert coordinates out of range");
    std::uint64_t d = 0;
    for (std::uint64_t s = n / 2; s > 0; s /= 2) {
        const std::uint64_t rx = (x & s) > 0;
        const std::uint64_t ry = (y & s) > 0;
        d += s * s * ((3 * rx) ^ ry);
        rotate(n, x, y, rx, ry);
    }
    return d;
}

std::pair<std::uint64_t, std::uint64_t> hilbert_d_to_xy(int order, std::uint64_t d) {
    if (order < 0 || order > 30) throw std::invalid_argument("hilbert order out of range");
    const std::uint64_t n = std::uint64_t{1} << order;
    if (d >= n * n) throw std::out_of_range("hilbert index out of range");
    std::uint64_t x = 0, y = 0, t = d;
    for (std::uint64_t s = 1; s < n; s *= 2) {
        const std::uint64_t rx = 1 & (t / 2);
        const std::uint64_t ry = 1 & (t ^ rx);
        rotate(s, x, y, rx, ry);
        x += s * rx;
        y += s * ry;
        t /= 4;
    }
    return {x, y};
}

SiteMapping build_mapping(const Lattice& lat) {
    SiteMapping m;
    const std::size_t n = lat.size();
    m.to_linear.assign(n, 0);
    m.to_lattice.assign(n, 0);
    auto place = [&](std::size_t pos, Coord c) {
        const auto li = lat.index(c);
        m.to_linear[li] = pos;
        m.to_lattice[pos] = li;
    };

    if (lat.rows == lat.cols && is_pow2(lat.rows)) {
        m.kind = MappingKind::hilbert;
        const int k = log2_exact(lat.rows);
        for (std::size_t d = 0; d < n; ++d) {
            auto [x, y] = hilbert_d_to_xy(k, d);
            place(d, {static_cast<int>(x), static_cast<int>(y)});
        }
    } else if (is_pow2(lat.rows) && is_pow2(lat.cols) &&
               (lat.rows == 2 * lat.cols || lat.cols == 2 * lat.rows)) {
        // The curve starts at (0,0) and exits at (side-1, 0) in its own x/y
        // frame, so tiles are laid out along x with x pointing along the long side.
        m.kind = MappingKind::hilbert_tiles;
        const bool tall = lat.rows > lat.cols;
        const int side = std::min(lat.rows, lat.cols);
        const int k = log2_exact(side);
        const std::size_t tile = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t d = 0; d < tile; ++d) {
                auto [x, y] = hilbert_d_to_xy(k, d);
                const int along = static_cast<int>(x) + static_cast<int>(t) * side;
                const int across = static_cast<int>(y);
                place(t * tile + d, tall ? Coord{along, across} : Coord{across, along});
            }
    } else {
        m.kind = MappingKind::snake;
        m.fallback = true;
        std::size_t pos = 0;
        for (int r = 0; r < lat.rows; ++r)
            for (int i = 0; i < lat.cols; ++i) place(pos++, {r, (r % 2 == 0) ? i : lat.cols - 1 - i});
    }
    return m;
}

void write_mapping_table(std::ostream& out, const Lattice& lat, const SiteMapping& mapping) {
    out << "# row col linear (" << to_string(mapping.kind) << ")\n";
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto c = lat.coord(i);
        out << c.row << ' ' << c.col << ' ' << mapping.to_linear[i] << '\n';
    }
}

}  // namespace ttnq
