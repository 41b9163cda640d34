#pragma once

// Raw binary helpers shared by the checkpoint formats. Files are written in
// host byte order behind a tag so a reader on the other endianness can swap.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "ttnq/lattice.hpp"

namespace ttnq::detail {

inline constexpr std::uint32_t kEndianTag = 0x01020304u;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, bool swap) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint");
    if (swap) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

/// Checks the 8-byte magic and the byte-order tag; returns whether to swap.
inline bool read_preamble(std::istream& in, const char (&magic)[8]) {
    char got[8];
    in.read(got, sizeof(got));
    if (!in || !std::equal(got, got + 8, magic)) throw std::runtime_error("not a checkpoint file");
    std::uint32_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    if (tag == 0x04030201u) return true;
    if (tag != kEndianTag) throw std::runtime_error("bad checkpoint byte-order tag");
    return false;
}

inline void write_geometry(std::ostream& out, const Lattice& lat, const SiteMapping& mapping) {
    put<std::int32_t>(out, lat.rows);
    put<std::int32_t>(out, lat.cols);
    put<std::uint8_t>(out, lat.boundary_rows == Boundary::periodic ? 0 : 1);
    put<std::uint8_t>(out, lat.boundary_cols == Boundary::periodic ? 0 : 1);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(mapping.kind));
    put<std::uint8_t>(out, mapping.fallback ? 1 : 0);
    for (auto p : mapping.to_linear) put<std::uint64_t>(out, p);
}

inline std::pair<Lattice, SiteMapping> read_geometry(std::istream& in, bool swap) {
    const auto rows = get<std::int32_t>(in, swap);
    const auto cols = get<std::int32_t>(in, swap);
    const auto br = get<std::uint8_t>(in, swap);
    const auto bc = get<std::uint8_t>(in, swap);
    Lattice lat(rows, cols, br ? Boundary::open : Boundary::periodic, bc ? Boundary::open : Boundary::periodic);
    SiteMapping mapping;
    const auto kind = get<std::uint8_t>(in, swap);
    if (kind > 2) throw std::runtime_error("bad mapping kind in checkpoint");
    mapping.kind = static_cast<MappingKind>(kind);
    mapping.fallback = get<std::uint8_t>(in, swap) != 0;
    mapping.to_linear.resize(lat.size());
    mapping.to_lattice.assign(lat.size(), lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto p = get<std::uint64_t>(in, swap);
        if (p >= lat.size() || mapping.to_lattice[p] != lat.size())
            throw std::runtime_error("checkpoint mapping is not a bijection");
        mapping.to_linear[i] = p;
        mapping.to_lattice[p] = i;
    }
    return {lat, std::move(mapping)};
}

}  // namespace ttnq::detail
