#include "ttnq/model.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ttnq {

char axis_char(Axis a) {
    switch (a) {
        case Axis::x: return 'x';
        case Axis::y: return 'y';
        case Axis::z: return 'z';
    }
    return '?';
}

void validate_terms(const std::vector<PauliTerm>& terms, std::size_t site_count) {
    for (const auto& t : terms) {
        if (t.factors.empty() || t.factors.size() > 2)
            throw std::invalid_argument("Pauli term must have one or two factors");
        for (const auto& f : t.factors)
            if (f.site >= site_count) throw std::invalid_argument("Pauli term site out of range");
        if (t.factors.size() == 2 && t.factors[0].site == t.factors[1].site)
            throw std::invalid_argument("Pauli term factors must act on distinct sites");
    }
}

std::vector<PauliTerm> build_hamiltonian(const Lattice& lat, const IsingParams& p, const SiteMapping& mapping) {
    if (mapping.size() != lat.size()) throw std::invalid_argument("mapping does not match lattice");
    std::vector<PauliTerm> terms;
    for (const auto& [a, b] : neighbor_pairs(lat))
        terms.push_back({-p.J, {{mapping.to_linear[a], Axis::z}, {mapping.to_linear[b], Axis::z}}});
    for (std::size_t i = 0; i < lat.size(); ++i) terms.push_back({-p.g, {{mapping.to_linear[i], Axis::x}}});
    return terms;
}

std::vector<PauliTerm> build_hamiltonian(const Lattice& lat, const IsingParams& p) {
    return build_hamiltonian(lat, p, build_mapping(lat));
}

std::size_t SpinPattern::up_count() const {
    return static_cast<std::size_t>(std::count(spins.begin(), spins.end(), 1));
}

PatternKind PatternKind::stripe(int interface_col) {
    PatternKind k;
    k.type = Type::stripe;
    k.interface_col = interface_col;
    return k;
}

PatternKind PatternKind::square(int size, std::optional<Coord> offset) {
    PatternKind k;
    k.type = Type::square;
    k.size = size;
    k.offset = offset;
    return k;
}

PatternKind PatternKind::custom(std::vector<bool> bitmask) {
    PatternKind k;
    k.type = Type::custom;
    k.bitmask = std::move(bitmask);
    return k;
}

namespace {

Coord square_origin(const PatternKind& kind, const Lattice& lat) {
    return kind.offset.value_or(Coord{(lat.rows - kind.size) / 2, (lat.cols - kind.size) / 2});
}

}  // namespace

SpinPattern make_pattern(const PatternKind& kind, const Lattice& lat) {
    SpinPattern p{lat, std::vector<int>(lat.size(), -1)};
    switch (kind.type) {
        case PatternKind::Type::polarized:
            break;
        case PatternKind::Type::stripe:
            if (kind.interface_col < 0 || kind.interface_col >= lat.cols - 1)
                throw std::invalid_argument("stripe interface column must leave both domains nonempty");
            for (std::size_t i = 0; i < lat.size(); ++i)
                if (lat.coord(i).col > kind.interface_col) p.spins[i] = 1;
            break;
        case PatternKind::Type::square: {
            if (kind.size < 1) throw std::invalid_argument("square size must be positive");
            const Coord o = square_origin(kind, lat);
            if (o.row < 0 || o.col < 0 || o.row + kind.size > lat.rows || o.col + kind.size > lat.cols)
                throw std::invalid_argument("square does not fit inside the lattice");
            for (int r = 0; r < kind.size; ++r)
                for (int c = 0; c < kind.size; ++c) p.spins[lat.index({o.row + r, o.col + c})] = 1;
            break;
        }
        case PatternKind::Type::custom:
            if (kind.bitmask.size() != lat.size())
                throw std::invalid_argument("custom bitmask length does not match lattice");
            for (std::size_t i = 0; i < lat.size(); ++i) p.spins[i] = kind.bitmask[i] ? 1 : -1;
            break;
    }
    return p;
}

std::vector<bool> to_bitmask(const SpinPattern& p) {
    std::vector<bool> bits(p.spins.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = p.spins[i] > 0;
    return bits;
}

int domain_wall_length(const SpinPattern& pattern) {
    int walls = 0;
    for (const auto& [a, b] : neighbor_pairs(pattern.lattice))
        if (pattern.spins[a] != pattern.spins[b]) ++walls;
    return walls;
}

double classical_energy(const SpinPattern& pattern, const IsingParams& p) {
    double e = 0.0;
    for (const auto& [a, b] : neighbor_pairs(pattern.lattice))
        e -= p.J * pattern.spins[a] * pattern.spins[b];
    return e;
}

void write_pattern(std::ostream& out, const SpinPattern& p) {
    for (int r = 0; r < p.lattice.rows; ++r) {
        for (int c = 0; c < p.lattice.cols; ++c) out << (p.at({r, c}) > 0 ? '+' : '-');
        out << '\n';
    }
}

SpinPattern read_pattern(std::istream& in, const Lattice& lat) {
    SpinPattern p{lat, {}};
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (static_cast<int>(line.size()) != lat.cols)
            throw std::invalid_argument("pattern row " + std::to_string(rows) + " has wrong length");
        for (char ch : line) {
            if (ch == '+') p.spins.push_back(1);
            else if (ch == '-') p.spins.push_back(-1);
            else throw std::invalid_argument(std::string("invalid pattern character '") + ch + "'");
        }
        ++rows;
    }
    if (rows != lat.rows) throw std::invalid_argument("pattern has wrong number of rows");
    return p;
}

std::string describe(const PatternKind& kind, const Lattice& lat) {
    std::ostringstream s;
    switch (kind.type) {
        case PatternKind::Type::polarized:
            s << "polarized (all down)";
            break;
        case PatternKind::Type::stripe:
            s << "stripe: columns 0.." << kind.interface_col << " down, " << kind.interface_col + 1 << ".."
              << lat.cols - 1 << " up; interface between columns " << kind.interface_col << " and "
              << kind.interface_col + 1;
            if (lat.boundary_cols == Boundary::periodic) s << " (plus the wrap-around interface)";
            break;
        case PatternKind::Type::square: {
            const Coord o = square_origin(kind, lat);
            s << "square: " << kind.size << "x" << kind.size << " up block at (" << o.row << ", " << o.col << ")";
            break;
        }
        case PatternKind::Type::custom:
            s << "custom";
            break;
    }
    return s.str();
}

}  // namespace ttnq
