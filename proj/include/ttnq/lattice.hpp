#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ttnq {

enum class Boundary { periodic, open };

struct Coord {
    int row = 0;
    int col = 0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

/// Square lattice of rows x cols sites. `boundary_rows` applies to the row
/// coordinate (bonds between the first and last row), `boundary_cols` to the
/// column coordinate.
struct Lattice {
    int rows = 1;
    int cols = 1;
    Boundary boundary_rows = Boundary::periodic;
    Boundary boundary_cols = Boundary::periodic;

    Lattice() = default;
    Lattice(int rows, int cols, Boundary boundary_rows = Boundary::periodic,
            Boundary boundary_cols = Boundary::periodic);

    static Lattice periodic(int n) { return Lattice(n, n); }

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    std::size_t index(Coord c) const;
    Coord coord(std::size_t index) const;
    bool contains(Coord c) const { return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols; }
};

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// Unordered nearest-neighbour pairs as lattice indices (row * cols + col),
/// each pair listed once with first < second. Wrap bonds of length-2 rings
/// coincide with the direct bond and are kept once.
std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const Lattice& lat);

/// Hilbert curve index of cell (x, y) on a 2^order x 2^order grid.
std::uint64_t hilbert_xy_to_d(int order, std::uint64_t x, std::uint64_t y);
std::pair<std::uint64_t, std::uint64_t> hilbert_d_to_xy(int order, std::uint64_t d);

enum class MappingKind { hilbert, hilbert_tiles, snake };

/// Bijection between lattice sites and the 1D leaf order of the tree.
struct SiteMapping {
    std::vector<std::size_t> to_linear;   // lattice index -> position
    std::vector<std::size_t> to_lattice;  // position -> lattice index
    MappingKind kind = MappingKind::snake;
    bool fallback = false;  // true when neither the Hilbert curve nor a tiling applied

    std::size_t size() const { return to_linear.size(); }
};

/// Square power-of-two lattices use the Hilbert curve (x = row, y = col);
/// 2:1 rectangles with power-of-two sides use two Hilbert tiles joined at
/// adjacent corners; everything else falls back to a row-wise snake.
SiteMapping build_mapping(const Lattice& lat);

/// Text table "row col linear", one site per line in lattice order.
void write_mapping_table(std::ostream& out, const Lattice& lat, const SiteMapping& mapping);

std::string to_string(MappingKind k);

}  // namespace ttnq
