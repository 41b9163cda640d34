#include "ttnq/ttn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "binary_io.hpp"
#include "leg_ops.hpp"
#include "ttnq/rng.hpp"

namespace ttnq {

namespace {

const std::vector<Leg> kNodeLegs = {{"c0", 1}, {"c1", 1}, {"p", 1}};

int floor_log2(std::size_t v) {
    int k = 0;
    while ((std::size_t{2} << k) <= v) ++k;
    return k;
}

std::vector<Leg> node_legs(std::size_t c0, std::size_t c1, std::size_t p) {
    auto legs = kNodeLegs;
    legs[0].dim = c0;
    legs[1].dim = c1;
    legs[2].dim = p;
    return legs;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

std::size_t slot_dim(const TreeTopology& topo, std::size_t slot) { return topo.is_real_site(slot) ? 2 : 1; }

std::size_t child_leg_dim(const TreeTopology& topo, const std::vector<std::size_t>& bonds, std::size_t n,
                          std::size_t i) {
    return topo.is_bottom(n) ? slot_dim(topo, topo.slot(n, i)) : bonds[TreeTopology::child(n, i)];
}

void canonicalize_to_root(std::vector<DenseTensor>& tensors) {
    for (std::size_t n = tensors.size(); n-- > 1;) {
        auto qr = detail::leg_qr(tensors[n], 2);
        tensors[n] = std::move(qr.q);
        auto& parent = tensors[TreeTopology::parent(n)];
        parent = detail::leg_apply(parent, TreeTopology::which_child(n), qr.r);
    }
}

}  // namespace

TreeTopology::TreeTopology(std::size_t site_count) : sites_(site_count) {
    if (site_count == 0) throw std::invalid_argument("tree needs at least one site");
    slots_ = 2;
    while (slots_ < site_count) slots_ *= 2;
}

std::size_t TreeTopology::slot(std::size_t bottom_node, std::size_t i) const {
    if (!is_bottom(bottom_node) || bottom_node >= node_count() || i > 1)
        throw std::out_of_range("not a bottom node leg");
    return 2 * (bottom_node - bottom_offset()) + i;
}

std::pair<std::size_t, std::size_t> TreeTopology::slot_range(std::size_t n) const {
    if (n >= node_count()) throw std::out_of_range("node id out of range");
    const int depth = floor_log2(n + 1);
    const std::size_t pos = n + 1 - (std::size_t{1} << depth);
    const std::size_t width = slots_ >> depth;
    return {pos * width, (pos + 1) * width};
}

std::size_t TreeTopology::sites_below(std::size_t n) const {
    const auto [lo, hi] = slot_range(n);
    const std::size_t top = std::min(hi, sites_);
    return top > lo ? top - lo : 0;
}

std::size_t TreeTopology::leg_toward(std::size_t n, std::size_t m) const {
    if (n != 0 && m == parent(n)) return 2;
    if (!is_bottom(n)) {
        if (m == child(n, 0)) return 0;
        if (m == child(n, 1)) return 1;
    }
    throw std::invalid_argument("nodes are not adjacent");
}

bool TreeTopology::adjacent(std::size_t a, std::size_t b) const {
    return (a != 0 && b == parent(a)) || (b != 0 && a == parent(b));
}

std::vector<std::size_t> TreeTopology::path(std::size_t a, std::size_t b) const {
    if (a >= node_count() || b >= node_count()) throw std::out_of_range("node id out of range");
    std::vector<std::size_t> up_a{a}, up_b{b};
    while (up_a.back() != 0) up_a.push_back(parent(up_a.back()));
    while (up_b.back() != 0) up_b.push_back(parent(up_b.back()));
    while (up_a.size() > 1 && up_b.size() > 1 && up_a[up_a.size() - 2] == up_b[up_b.size() - 2]) {
        up_a.pop_back();
        up_b.pop_back();
    }
    // Both now end at the lowest common ancestor.
    up_b.pop_back();
    up_a.insert(up_a.end(), up_b.rbegin(), up_b.rend());
    return up_a;
}

std::vector<std::size_t> TreeTopology::edges() const {
    std::vector<std::size_t> e;
    for (std::size_t n = 1; n < node_count(); ++n) e.push_back(n);
    return e;
}

TreeState::TreeState(Lattice lattice, SiteMapping mapping, std::vector<DenseTensor> tensors, std::size_t center,
                     std::size_t max_chi)
    : lattice_(std::move(lattice)),
      mapping_(std::move(mapping)),
      topo_(lattice_.size()),
      tensors_(std::move(tensors)),
      center_(center),
      max_chi_(max_chi) {
    if (mapping_.size() != lattice_.size()) throw std::invalid_argument("mapping does not match lattice");
    if (tensors_.size() != topo_.node_count()) throw std::invalid_argument("tensor count does not match tree");
    if (center_ >= tensors_.size()) throw std::out_of_range("center out of range");
    if (max_chi_ == 0) throw std::invalid_argument("max_chi must be positive");
    for (std::size_t n = 0; n < tensors_.size(); ++n) {
        const auto& t = tensors_[n];
        if (t.rank() != 3) throw std::invalid_argument("node tensors must have three legs");
        if (topo_.is_bottom(n))
            for (std::size_t i = 0; i < 2; ++i)
                if (t.dim(i) != slot_dim(topo_, topo_.slot(n, i)))
                    throw std::invalid_argument("physical leg dimension mismatch");
        if (n == 0 && t.dim(2) != 1) throw std::invalid_argument("root parent leg must have dimension 1");
        if (n != 0 && tensors_[TreeTopology::parent(n)].dim(TreeTopology::which_child(n)) != t.dim(2))
            throw std::invalid_argument("bond dimension mismatch between node and parent");
    }
}

void TreeState::set_max_chi(std::size_t chi) {
    if (chi == 0) throw std::invalid_argument("max_chi must be positive");
    max_chi_ = chi;
}

std::size_t TreeState::max_bond() const {
    std::size_t m = 1;
    for (std::size_t n = 1; n < tensors_.size(); ++n) m = std::max(m, bond_dim(n));
    return m;
}

double TreeState::mean_bond() const {
    std::size_t count = 0, total = 0;
    for (std::size_t n = 1; n < tensors_.size(); ++n) {
        if (!topo_.active(n)) continue;
        total += bond_dim(n);
        ++count;
    }
    return count ? static_cast<double>(total) / static_cast<double>(count) : 1.0;
}

void TreeState::normalize() {
    const double nrm = norm();
    if (nrm == 0.0) throw std::runtime_error("cannot normalize a zero state");
    tensors_[center_] *= 1.0 / nrm;
}

double TreeState::isometry_error() const {
    double worst = 0.0;
    for (std::size_t n = 0; n < tensors_.size(); ++n) {
        if (n == center_) continue;
        const auto path = topo_.path(n, center_);
        const std::size_t k = topo_.leg_toward(n, path[1]);
        const Matrix g = detail::leg_gram(tensors_[n], tensors_[n], k);
        worst = std::max(worst, (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
    return worst;
}

std::vector<std::size_t> bond_dimensions(const TreeTopology& topo, std::size_t chi) {
    if (chi == 0) throw std::invalid_argument("chi must be positive");
    const std::size_t nodes = topo.node_count();
    std::vector<std::size_t> d(nodes, 1);
    for (std::size_t n = 1; n < nodes; ++n) {
        const std::size_t inside = topo.sites_below(n);
        const std::size_t outside = topo.site_count() - inside;
        const std::size_t k = std::min(inside, outside);
        if (k == 0) continue;
        d[n] = k >= 62 ? chi : std::min<std::size_t>(chi, std::size_t{1} << k);
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t n = 0; n < nodes; ++n) {
            std::size_t c0 = child_leg_dim(topo, d, n, 0), c1 = child_leg_dim(topo, d, n, 1), p = d[n];
            if (n != 0 && p > c0 * c1) {
                d[n] = c0 * c1;
                changed = true;
            }
            if (!topo.is_bottom(n)) {
                for (std::size_t i = 0; i < 2; ++i) {
                    const std::size_t c = TreeTopology::child(n, i);
                    const std::size_t other = child_leg_dim(topo, d, n, 1 - i);
                    if (d[c] > other * d[n] && n != 0) {
                        d[c] = other * d[n];
                        changed = true;
                    } else if (n == 0 && d[c] > other) {
                        d[c] = other;
                        changed = true;
                    }
                }
            }
        }
    }
    return d;
}

TreeState from_product(const SpinPattern& pattern, const SiteMapping& mapping, std::size_t chi, double noise,
                       std::uint64_t seed) {
    const Lattice& lat = pattern.lattice;
    if (pattern.spins.size() != lat.size()) throw std::invalid_argument("pattern does not match lattice");
    if (mapping.size() != lat.size()) throw std::invalid_argument("mapping does not match lattice");
    if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
    const TreeTopology topo(lat.size());
    const auto bonds = bond_dimensions(topo, chi);

    std::vector<DenseTensor> tensors;
    tensors.reserve(topo.node_count());
    for (std::size_t n = 0; n < topo.node_count(); ++n) {
        const std::size_t c0 = child_leg_dim(topo, bonds, n, 0), c1 = child_leg_dim(topo, bonds, n, 1);
        DenseTensor t(node_legs(c0, c1, bonds[n]));
        std::size_t i0 = 0, i1 = 0;
        if (topo.is_bottom(n)) {
            auto phys = [&](std::size_t slot) -> std::size_t {
                if (!topo.is_real_site(slot)) return 0;
                return pattern.spins[mapping.to_lattice[slot]] > 0 ? 0 : 1;
            };
            i0 = phys(topo.slot(n, 0));
            i1 = phys(topo.slot(n, 1));
        }
        t.at({i0, i1, 0}) = 1.0;
        if (noise > 0.0) {
            Rng rng(derive_seed(seed, n));
            const bool bottom = topo.is_bottom(n);
            for (std::size_t a = 0; a < c0; ++a)
                for (std::size_t b = 0; b < c1; ++b)
                    for (std::size_t p = 0; p < bonds[n]; ++p) {
                        const bool padded = p > 0 || (!bottom && (a > 0 || b > 0));
                        if (!padded) continue;
                        const double r = noise * rng.uniform();
                        const double phi = 2.0 * std::numbers::pi * rng.uniform();
                        t.at({a, b, p}) = std::polar(r, phi);
                    }
        }
        tensors.push_back(std::move(t));
    }
    canonicalize_to_root(tensors);
    TreeState state(lat, mapping, std::move(tensors), 0, chi);
    state.normalize();
    return state;
}

TreeState random_state(const Lattice& lattice, const SiteMapping& mapping, std::size_t chi, std::uint64_t seed) {
    const TreeTopology topo(lattice.size());
    const auto bonds = bond_dimensions(topo, chi);
    std::vector<DenseTensor> tensors;
    for (std::size_t n = 0; n < topo.node_count(); ++n) {
        DenseTensor t(node_legs(child_leg_dim(topo, bonds, n, 0), child_leg_dim(topo, bonds, n, 1), bonds[n]));
        Rng rng(derive_seed(seed, n));
        for (auto& x : t.data()) x = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        tensors.push_back(std::move(t));
    }
    canonicalize_to_root(tensors);
    TreeState state(lattice, mapping, std::move(tensors), 0, chi);
    state.normalize();
    return state;
}

void move_center(TreeState& state, std::size_t target) {
    const auto& topo = state.topology();
    if (target >= topo.node_count()) throw std::out_of_range("center target out of range");
    const auto path = topo.path(state.center(), target);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const std::size_t a = path[i], b = path[i + 1];
        auto qr = detail::leg_qr(state.tensor(a), topo.leg_toward(a, b));
        state.tensor(a) = std::move(qr.q);
        state.tensor(b) = detail::leg_apply(state.tensor(b), topo.leg_toward(b, a), qr.r);
    }
    state.set_center(target);
}

namespace {

// Dense amplitudes of the subtree below n: rows index the subtree's real
// sites (lowest site = lowest bit), columns the parent leg.
RowMatrix dense_subtree(const TreeState& state, std::size_t n) {
    const auto& topo = state.topology();
    const DenseTensor& t = state.tensor(n);
    const std::size_t d0 = t.dim(0), d1 = t.dim(1), dp = t.dim(2);
    RowMatrix left, right;
    if (topo.is_bottom(n)) {
        left = RowMatrix::Identity(static_cast<Eigen::Index>(d0), static_cast<Eigen::Index>(d0));
        right = RowMatrix::Identity(static_cast<Eigen::Index>(d1), static_cast<Eigen::Index>(d1));
    } else {
        left = dense_subtree(state, TreeTopology::child(n, 0));
        right = dense_subtree(state, TreeTopology::child(n, 1));
    }
    const std::size_t rows_l = static_cast<std::size_t>(left.rows());
    const std::size_t rows_r = static_cast<std::size_t>(right.rows());
    RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(rows_l * rows_r), static_cast<Eigen::Index>(dp));
    detail::ConstRowMap tm(t.raw(), static_cast<Eigen::Index>(d0 * d1), static_cast<Eigen::Index>(dp));
    for (std::size_t ir = 0; ir < rows_r; ++ir)
        for (std::size_t il = 0; il < rows_l; ++il) {
            auto row = out.row(static_cast<Eigen::Index>(il + rows_l * ir));
            for (std::size_t a = 0; a < d0; ++a) {
                const cplx la = left(static_cast<Eigen::Index>(il), static_cast<Eigen::Index>(a));
                if (la == cplx{}) continue;
                for (std::size_t b = 0; b < d1; ++b) {
                    const cplx rb = right(static_cast<Eigen::Index>(ir), static_cast<Eigen::Index>(b));
                    if (rb == cplx{}) continue;
                    row += la * rb * tm.row(static_cast<Eigen::Index>(a * d1 + b));
                }
            }
        }
    return out;
}

}  // namespace

Vector to_dense(const TreeState& state) {
    if (state.site_count() > 24) throw std::invalid_argument("to_dense is limited to 24 sites");
    RowMatrix m = dense_subtree(state, 0);
    return m.col(0);
}

EntropyResult entropy_from_probabilities(std::vector<double> p, double max_entropy) {
    double total = 0.0;
    for (auto& x : p) {
        x = std::max(x, 0.0);
        total += x;
    }
    if (total > 0.0)
        for (auto& x : p) x /= total;
    std::sort(p.begin(), p.end(), std::greater<>());
    EntropyResult r;
    for (double x : p)
        if (x > 0.0) r.entropy -= x * std::log(x);
    r.entropy = std::max(r.entropy, 0.0);
    r.spectrum = std::move(p);
    r.max_entropy = max_entropy;
    return r;
}

std::string to_string(CutDirection d) {
    switch (d) {
        case CutDirection::row: return "row";
        case CutDirection::col: return "col";
        case CutDirection::diagonal: return "diagonal";
    }
    return "row";
}

CutDirection cut_direction_from_string(const std::string& s) {
    if (s == "row") return CutDirection::row;
    if (s == "col") return CutDirection::col;
    if (s == "diagonal") return CutDirection::diagonal;
    throw std::invalid_argument("unknown cut direction '" + s + "' (expected row|col|diagonal)");
}

std::vector<Coord> cut_sites(const Lattice& lat, Coord anchor, CutDirection dir) {
    if (!lat.contains(anchor)) throw std::out_of_range("cut anchor outside lattice");
    std::vector<Coord> out;
    switch (dir) {
        case CutDirection::row:
            for (int c = 0; c < lat.cols; ++c) out.push_back({anchor.row, c});
            break;
        case CutDirection::col:
            for (int r = 0; r < lat.rows; ++r) out.push_back({r, anchor.col});
            break;
        case CutDirection::diagonal: {
            auto step = [&](Coord c, int s) -> std::optional<Coord> {
                Coord n{c.row + s, c.col + s};
                if (n.row < 0 || n.row >= lat.rows) {
                    if (lat.boundary_rows != Boundary::periodic) return std::nullopt;
                    n.row = (n.row + lat.rows) % lat.rows;
                }
                if (n.col < 0 || n.col >= lat.cols) {
                    if (lat.boundary_cols != Boundary::periodic) return std::nullopt;
                    n.col = (n.col + lat.cols) % lat.cols;
                }
                return n;
            };
            std::vector<Coord> visited{anchor};
            auto seen = [&](Coord c) { return std::find(visited.begin(), visited.end(), c) != visited.end(); };
            std::vector<Coord> back, fwd;
            for (auto c = step(anchor, -1); c && !seen(*c); c = step(*c, -1)) {
                back.push_back(*c);
                visited.push_back(*c);
            }
            for (auto c = step(anchor, 1); c && !seen(*c); c = step(*c, 1)) {
                fwd.push_back(*c);
                visited.push_back(*c);
            }
            out.insert(out.end(), back.rbegin(), back.rend());
            out.push_back(anchor);
            out.insert(out.end(), fwd.begin(), fwd.end());
            break;
        }
    }
    return out;
}

Observer::Observer(const TreeState& state) : state_(state) {
    move_center(state_, 0);
    const double n = state_.tensor(0).norm();
    norm2_ = n * n;
    if (norm2_ == 0.0) throw std::runtime_error("cannot measure a zero state");
}

std::optional<Matrix> Observer::transfer(std::size_t node, const std::vector<const Matrix*>& slot_ops) const {
    const auto& topo = state_.topology();
    const auto [lo, hi] = topo.slot_range(node);
    bool any = false;
    for (std::size_t s = lo; s < hi; ++s) any = any || slot_ops[s] != nullptr;
    if (!any) return std::nullopt;

    const DenseTensor& t = state_.tensor(node);
    std::optional<Matrix> m0, m1;
    if (topo.is_bottom(node)) {
        if (slot_ops[lo]) m0 = *slot_ops[lo];
        if (slot_ops[lo + 1]) m1 = *slot_ops[lo + 1];
    } else {
        m0 = transfer(TreeTopology::child(node, 0), slot_ops);
        m1 = transfer(TreeTopology::child(node, 1), slot_ops);
    }
    DenseTensor x = t;
    if (m0) x = detail::leg_apply(x, 0, *m0);
    if (m1) x = detail::leg_apply(x, 1, *m1);
    return detail::leg_gram(t, x, 2);
}

cplx Observer::expect_product(const std::vector<std::pair<std::size_t, Matrix>>& ops) const {
    const auto& topo = state_.topology();
    std::vector<const Matrix*> slot_ops(topo.leaf_slots(), nullptr);
    for (const auto& [site, m] : ops) {
        if (site >= state_.site_count()) throw std::out_of_range("operator site out of range");
        if (slot_ops[site]) throw std::invalid_argument("operators must act on distinct sites");
        if (m.rows() != 2 || m.cols() != 2) throw std::invalid_argument("local operators must be 2x2");
        slot_ops[site] = &m;
    }
    auto m = transfer(0, slot_ops);
    if (!m) return 1.0;
    return (*m)(0, 0) / norm2_;
}

double Observer::expect_site(std::size_t site, Axis axis) const {
    return expect_product({{site, pauli(axis)}}).real();
}

double Observer::expect_local(Coord site, Axis axis) const {
    return expect_site(state_.mapping().to_linear[state_.lattice().index(site)], axis);
}

std::vector<double> Observer::magnetization() const {
    std::vector<double> m(state_.site_count());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = expect_site(state_.mapping().to_linear[i], Axis::z);
    return m;
}

double Observer::correlation(Coord i, Coord j) const {
    const auto& lat = state_.lattice();
    std::size_t a = state_.mapping().to_linear[lat.index(i)];
    std::size_t b = state_.mapping().to_linear[lat.index(j)];
    if (a == b) throw std::invalid_argument("correlation needs two distinct sites; use variance()");
    if (a > b) std::swap(a, b);
    const double zz = expect_product({{a, pauli(Axis::z)}, {b, pauli(Axis::z)}}).real();
    return zz - expect_site(a, Axis::z) * expect_site(b, Axis::z);
}

double Observer::variance(Coord i) const {
    const double z = expect_local(i, Axis::z);
    return 1.0 - z * z;
}

CorrelationCut Observer::correlation_cut(Coord anchor, CutDirection dir) const {
    CorrelationCut cut;
    cut.sites = cut_sites(state_.lattice(), anchor, dir);
    for (std::size_t k = 0; k < cut.sites.size(); ++k) {
        if (cut.sites[k] == anchor) {
            cut.anchor_index = k;
            cut.values.push_back(variance(anchor));
        } else {
            cut.values.push_back(correlation(anchor, cut.sites[k]));
        }
    }
    return cut;
}

Matrix Observer::reduced_density_matrix(const std::vector<Coord>& sites) const {
    if (sites.empty() || sites.size() > 2) throw std::invalid_argument("reduced density matrix supports 1 or 2 sites");
    const auto& lat = state_.lattice();
    std::vector<std::size_t> lin;
    for (const auto& c : sites) lin.push_back(state_.mapping().to_linear[lat.index(c)]);
    const Matrix id = Matrix::Identity(2, 2);
    const std::array<const Matrix*, 4> basis = {&id, &pauli(Axis::x), &pauli(Axis::y), &pauli(Axis::z)};
    if (lin.size() == 1) {
        Matrix rho = 0.5 * id;
        for (std::size_t a = 1; a < 4; ++a)
            rho += 0.5 * expect_product({{lin[0], *basis[a]}}).real() * *basis[a];
        return rho;
    }
    if (lin[0] == lin[1]) throw std::invalid_argument("sites must be distinct");
    Matrix rho = Matrix::Zero(4, 4);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            std::vector<std::pair<std::size_t, Matrix>> ops;
            if (a) ops.emplace_back(lin[0], *basis[a]);
            if (b) ops.emplace_back(lin[1], *basis[b]);
            const double v = ops.empty() ? 1.0 : expect_product(ops).real();
            rho += 0.25 * v * kron(*basis[a], *basis[b]);
        }
    return rho;
}

EntropyResult Observer::subsystem_entropy(const std::vector<Coord>& sites) const {
    const Matrix rho = reduced_density_matrix(sites);
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    std::vector<double> p(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return entropy_from_probabilities(std::move(p), static_cast<double>(sites.size()) * std::numbers::ln2);
}

double Observer::energy_per_term(const std::vector<PauliTerm>& terms) const {
    validate_terms(terms, state_.site_count());
    double e = 0.0;
    for (const auto& term : terms) {
        std::vector<std::pair<std::size_t, Matrix>> ops;
        for (const auto& f : term.factors) ops.emplace_back(f.site, pauli(f.axis));
        e += term.coefficient * expect_product(ops).real();
    }
    return e;
}

double expect_local(const TreeState& state, Coord site, Axis axis) {
    return Observer(state).expect_local(site, axis);
}

double correlation(const TreeState& state, Coord i, Coord j) { return Observer(state).correlation(i, j); }

CorrelationCut correlation_cut(const TreeState& state, Coord anchor, CutDirection dir) {
    return Observer(state).correlation_cut(anchor, dir);
}

EntropyResult subsystem_entropy(const TreeState& state, const std::vector<Coord>& sites) {
    return Observer(state).subsystem_entropy(sites);
}

EntropyResult link_entropy(const TreeState& state, std::size_t edge) {
    const auto& topo = state.topology();
    if (edge == 0 || edge >= topo.node_count()) throw std::out_of_range("not a tree edge");
    TreeState copy = state;
    move_center(copy, edge);
    const RowMatrix m = detail::unfold(copy.tensor(edge), 2);
    Eigen::BDCSVD<Matrix> svd{Matrix(m)};
    const auto& s = svd.singularValues();
    std::vector<double> p;
    for (Eigen::Index i = 0; i < s.size(); ++i) p.push_back(s(i) * s(i));
    const std::size_t inside = topo.sites_below(edge);
    const std::size_t k = std::min(inside, topo.site_count() - inside);
    return entropy_from_probabilities(std::move(p), static_cast<double>(k) * std::numbers::ln2);
}

double energy(const TreeState& state, const std::vector<PauliTerm>& terms) {
    const CompiledHamiltonian ham(terms, state.site_count());
    TreeState copy = state;
    move_center(copy, 0);
    const auto& topo = copy.topology();
    // toward_parent[n]: environment of the subtree below n, seen from its parent.
    std::vector<LegEnvironment> toward_parent(topo.node_count());
    std::array<LegEnvironment, 3> root_env;
    for (std::size_t n = topo.node_count(); n-- > 0;) {
        std::array<LegEnvironment, 2> kids;
        for (std::size_t i = 0; i < 2; ++i) {
            if (topo.is_bottom(n)) kids[i] = physical_environment(ham, topo.slot(n, i));
            else kids[i] = std::move(toward_parent[TreeTopology::child(n, i)]);
        }
        const LegEnvironment none = trivial_environment(ham.site_count);
        if (n == 0) {
            root_env = {std::move(kids[0]), std::move(kids[1]), none};
            break;
        }
        if (!topo.active(n)) {
            toward_parent[n] = none;
            continue;
        }
        const std::array<const LegEnvironment*, 3> envs = {&kids[0], &kids[1], nullptr};
        toward_parent[n] = environment_through(ham, copy.tensor(n), 2, envs);
    }
    EffectiveOperator op(ham, {&root_env[0], &root_env[1], &root_env[2]}, copy.tensor(0).dims());
    return op.expectation(copy.tensor(0));
}

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'T', 'N', 'Q', 'C', 'K', 'P', '1'};

}  // namespace

void write_checkpoint(std::ostream& out, const TreeState& state, std::uint64_t config_hash) {
    using detail::put;
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, detail::kEndianTag);
    put<std::uint64_t>(out, config_hash);
    detail::write_geometry(out, state.lattice(), state.mapping());
    put<std::uint64_t>(out, state.max_chi());
    put<std::uint64_t>(out, state.center());
    put<std::uint64_t>(out, state.tensors().size());
    for (const auto& t : state.tensors()) t.write(out);
    if (!out) throw std::runtime_error("failed to write checkpoint");
}

std::pair<TreeState, std::uint64_t> read_checkpoint(std::istream& in) {
    using detail::get;
    const bool swap = detail::read_preamble(in, kCheckpointMagic);
    const auto hash = get<std::uint64_t>(in, swap);
    auto [lat, mapping] = detail::read_geometry(in, swap);
    const auto chi = get<std::uint64_t>(in, swap);
    const auto center = get<std::uint64_t>(in, swap);
    const auto count = get<std::uint64_t>(in, swap);
    if (count != TreeTopology(lat.size()).node_count()) throw std::runtime_error("checkpoint node count mismatch");
    std::vector<DenseTensor> tensors;
    for (std::uint64_t i = 0; i < count; ++i) tensors.push_back(DenseTensor::read(in));
    return {TreeState(lat, std::move(mapping), std::move(tensors), center, chi), hash};
}

}  // namespace ttnq
