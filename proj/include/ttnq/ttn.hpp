#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ttnq/environment.hpp"
#include "ttnq/lattice.hpp"
#include "ttnq/model.hpp"
#include "ttnq/tensor.hpp"

namespace ttnq {

/// Balanced binary tree over the sites in SiteMapping order.
///
/// Nodes use heap numbering: the root is 0 and node n has children 2n+1 and
/// 2n+2. Every node tensor has legs (c0, c1, p). Bottom nodes carry two
/// physical legs as c0/c1; leaf slots beyond the site count are dimension-1
/// dummies. The root's p leg has dimension 1.
class TreeTopology {
public:
    TreeTopology() = default;
    explicit TreeTopology(std::size_t site_count);

    std::size_t site_count() const { return sites_; }
    std::size_t leaf_slots() const { return slots_; }
    std::size_t node_count() const { return slots_ - 1; }

    static bool is_root(std::size_t n) { return n == 0; }
    static std::size_t parent(std::size_t n) { return (n - 1) / 2; }
    static std::size_t child(std::size_t n, std::size_t i) { return 2 * n + 1 + i; }
    static std::size_t which_child(std::size_t n) { return (n - 1) % 2; }

    bool is_bottom(std::size_t n) const { return n >= bottom_offset(); }
    std::size_t bottom_offset() const { return slots_ / 2 - 1; }
    /// Leaf slot attached to leg i (0 or 1) of a bottom node.
    std::size_t slot(std::size_t bottom_node, std::size_t i) const;
    bool is_real_site(std::size_t slot) const { return slot < sites_; }

    /// Half-open range of leaf slots below node n.
    std::pair<std::size_t, std::size_t> slot_range(std::size_t n) const;
    /// Number of real sites below node n.
    std::size_t sites_below(std::size_t n) const;
    bool active(std::size_t n) const { return sites_below(n) > 0; }

    /// Leg of n pointing at the adjacent node m.
    std::size_t leg_toward(std::size_t n, std::size_t m) const;
    bool adjacent(std::size_t a, std::size_t b) const;
    /// Nodes from a to b inclusive.
    std::vector<std::size_t> path(std::size_t a, std::size_t b) const;

    /// Internal tree edges, identified by the child node (every non-root node).
    std::vector<std::size_t> edges() const;

private:
    std::size_t sites_ = 0;
    std::size_t slots_ = 2;
};

class TreeState {
public:
    TreeState() = default;
    TreeState(Lattice lattice, SiteMapping mapping, std::vector<DenseTensor> tensors, std::size_t center,
              std::size_t max_chi);

    const Lattice& lattice() const { return lattice_; }
    const SiteMapping& mapping() const { return mapping_; }
    const TreeTopology& topology() const { return topo_; }
    std::size_t site_count() const { return topo_.site_count(); }
    std::size_t center() const { return center_; }
    std::size_t max_chi() const { return max_chi_; }
    void set_max_chi(std::size_t chi);

    const DenseTensor& tensor(std::size_t n) const { return tensors_.at(n); }
    DenseTensor& tensor(std::size_t n) { return tensors_.at(n); }
    const std::vector<DenseTensor>& tensors() const { return tensors_; }

    /// Only updates the bookkeeping; callers are responsible for the gauge.
    void set_center(std::size_t n) { center_ = n; }

    /// Dimension of the edge between `child` and its parent.
    std::size_t bond_dim(std::size_t child) const { return tensors_.at(child).dim(2); }
    std::size_t max_bond() const;
    double mean_bond() const;

    double norm() const { return tensors_.at(center_).norm(); }
    void normalize();

    /// Largest deviation from identity of T^dagger T over the legs pointing
    /// away from the center, over all non-center nodes.
    double isometry_error() const;

private:
    Lattice lattice_;
    SiteMapping mapping_;
    TreeTopology topo_;
    std::vector<DenseTensor> tensors_;
    std::size_t center_ = 0;
    std::size_t max_chi_ = 1;
};

/// Bond dimension of the edge above node n: min(chi, 2^min(inside, outside)),
/// then reduced until no leg exceeds the product of the other two at either end.
std::vector<std::size_t> bond_dimensions(const TreeTopology& topo, std::size_t chi);

/// Product state in the pattern with every bond padded to its working
/// dimension by entries of magnitude <= noise; center at the root, normalized.
TreeState from_product(const SpinPattern& pattern, const SiteMapping& mapping, std::size_t chi, double noise,
                       std::uint64_t seed);

/// Random normalized state with all bonds at their working dimension.
TreeState random_state(const Lattice& lattice, const SiteMapping& mapping, std::size_t chi, std::uint64_t seed);

/// Moves the isometry center along the tree path with QR steps.
void move_center(TreeState& state, std::size_t target);

/// Amplitudes in the oracle convention: bit k of the index is site k (mapping
/// order), bit value 0 = spin up. Intended for small systems.
Vector to_dense(const TreeState& state);

struct EntropyResult {
    double entropy = 0.0;
    std::vector<double> spectrum;  // descending, sums to 1
    double max_entropy = 0.0;
};

/// Von Neumann entropy (natural log) of a probability vector; sorts it descending.
EntropyResult entropy_from_probabilities(std::vector<double> p, double max_entropy);

enum class CutDirection { row, col, diagonal };
std::string to_string(CutDirection d);
CutDirection cut_direction_from_string(const std::string& s);

struct CorrelationCut {
    std::vector<Coord> sites;
    std::vector<double> values;    // C(anchor, site); at the anchor the variance 1 - <sz>^2
    std::size_t anchor_index = 0;
};

/// Sites on the line through `anchor`. Rows and columns cover the full
/// lattice line; diagonals follow the (+1, +1) line through the anchor in both
/// directions, wrapping only along periodic directions and stopping before a
/// site repeats or leaves the lattice.
std::vector<Coord> cut_sites(const Lattice& lat, Coord anchor, CutDirection dir);

/// Expectation values on a snapshot of the state. The snapshot is a copy with
/// its center at the root, so measuring never disturbs the state it came from.
class Observer {
public:
    explicit Observer(const TreeState& state);

    const TreeState& state() const { return state_; }

    /// <prod_k op_k> for 2x2 operators on distinct sites (mapping order).
    cplx expect_product(const std::vector<std::pair<std::size_t, Matrix>>& ops) const;

    double expect_local(Coord site, Axis axis) const;
    double expect_site(std::size_t site, Axis axis) const;
    /// <sz> for every site in lattice order.
    std::vector<double> magnetization() const;
    double correlation(Coord i, Coord j) const;
    double variance(Coord i) const;
    CorrelationCut correlation_cut(Coord anchor, CutDirection dir) const;
    EntropyResult subsystem_entropy(const std::vector<Coord>& sites) const;
    Matrix reduced_density_matrix(const std::vector<Coord>& sites) const;
    /// Sum of coefficient * <term>, one expectation per term.
    double energy_per_term(const std::vector<PauliTerm>& terms) const;

private:
    std::optional<Matrix> transfer(std::size_t node, const std::vector<const Matrix*>& slot_ops) const;

    TreeState state_;
    double norm2_ = 1.0;
};

double expect_local(const TreeState& state, Coord site, Axis axis);
double correlation(const TreeState& state, Coord i, Coord j);
CorrelationCut correlation_cut(const TreeState& state, Coord anchor, CutDirection dir);
EntropyResult link_entropy(const TreeState& state, std::size_t edge);
EntropyResult subsystem_entropy(const TreeState& state, const std::vector<Coord>& sites);
/// Energy through the tree environments (the fast path used by the evolution).
double energy(const TreeState& state, const std::vector<PauliTerm>& terms);

/// Checkpoint: topology, center, max_chi, config hash and all tensors.
void write_checkpoint(std::ostream& out, const TreeState& state, std::uint64_t config_hash);
std::pair<TreeState, std::uint64_t> read_checkpoint(std::istream& in);


}  // namespace ttnq
