#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ttnq/lattice.hpp"

namespace ttnq {

/// H = -J sum_<ij> sz_i sz_j - g sum_i sx_i
struct IsingParams {
    double J = 1.0;
    double g = 0.0;
};

enum class Axis { x, y, z };

char axis_char(Axis a);

struct PauliFactor {
    std::size_t site = 0;  // position in SiteMapping order
    Axis axis = Axis::z;
    friend bool operator==(const PauliFactor&, const PauliFactor&) = default;
};

struct PauliTerm {
    double coefficient = 0.0;
    std::vector<PauliFactor> factors;  // 1 or 2 factors on distinct sites
};

/// Throws if a term is empty, has more than two factors or repeats a site, or
/// if a site is >= site_count.
void validate_terms(const std::vector<PauliTerm>& terms, std::size_t site_count);

/// One (-J, zz) term per neighbour pair followed by one (-g, x) term per site.
std::vector<PauliTerm> build_hamiltonian(const Lattice& lat, const IsingParams& p, const SiteMapping& mapping);
std::vector<PauliTerm> build_hamiltonian(const Lattice& lat, const IsingParams& p);

/// Per-site spins in lattice order: +1 = up, -1 = down.
struct SpinPattern {
    Lattice lattice;
    std::vector<int> spins;

    int at(Coord c) const { return spins.at(lattice.index(c)); }
    std::size_t up_count() const;
};

struct PatternKind {
    enum class Type { polarized, stripe, square, custom } type = Type::polarized;
    int interface_col = 0;              // stripe: columns <= interface_col are down
    int size = 0;                       // square: side length
    std::optional<Coord> offset;        // square: top-left corner, centered if empty
    std::vector<bool> bitmask;          // custom: bit k set = site k (lattice order) up

    static PatternKind polarized() { return {}; }
    static PatternKind stripe(int interface_col);
    static PatternKind square(int size, std::optional<Coord> offset = std::nullopt);
    static PatternKind custom(std::vector<bool> bitmask);
};

/// Polarized is all down. A stripe on a lattice periodic along the columns
/// necessarily has two interfaces (the wrap bond closes the second one).
SpinPattern make_pattern(const PatternKind& kind, const Lattice& lat);

std::vector<bool> to_bitmask(const SpinPattern& p);

/// Number of bonds with anti-aligned spins.
int domain_wall_length(const SpinPattern& pattern);

/// -J * sum over bonds of s_i s_j.
double classical_energy(const SpinPattern& pattern, const IsingParams& p);

/// Rows of '+'/'-' characters, one lattice row per line.
void write_pattern(std::ostream& out, const SpinPattern& p);
SpinPattern read_pattern(std::istream& in, const Lattice& lat);

std::string describe(const PatternKind& kind, const Lattice& lat);

}  // namespace ttnq
