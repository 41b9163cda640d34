#include "ttnq/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "binary_io.hpp"
#include "ttnq/rng.hpp"

namespace ttnq {

namespace {

void check_sites(std::size_t n) {
    if (n == 0) throw std::invalid_argument("oracle needs at least one site");
    if (n > kOracleMaxSites)
        throw std::invalid_argument("oracle is limited to " + std::to_string(kOracleMaxSites) + " sites (got " +
                                    std::to_string(n) + ")");
}

std::size_t linear_site(const StateVector& s, Coord c) { return s.mapping().to_linear[s.lattice().index(c)]; }

double sign_of(std::uint64_t b, std::uint64_t mask) { return (std::popcount(b & mask) & 1) ? -1.0 : 1.0; }

}  // namespace

StateVector::StateVector(Lattice lattice, SiteMapping mapping, Vector amplitudes)
    : lattice_(std::move(lattice)), mapping_(std::move(mapping)), amps_(std::move(amplitudes)) {
    check_sites(lattice_.size());
    if (mapping_.size() != lattice_.size()) throw std::invalid_argument("mapping does not match lattice");
    if (static_cast<std::size_t>(amps_.size()) != (std::size_t{1} << lattice_.size()))
        throw std::invalid_argument("amplitude count does not match site count");
}

StateVector StateVector::product(const SpinPattern& pattern, const SiteMapping& mapping) {
    const std::size_t n = pattern.lattice.size();
    check_sites(n);
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (pattern.spins[i] < 0) index |= std::uint64_t{1} << mapping.to_linear[i];
    Vector v = Vector::Zero(static_cast<Eigen::Index>(std::size_t{1} << n));
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return StateVector(pattern.lattice, mapping, std::move(v));
}

PauliOperator::PauliOperator(const std::vector<PauliTerm>& terms, std::size_t site_count) : sites_(site_count) {
    check_sites(site_count);
    validate_terms(terms, site_count);
    diagonal_.assign(dim(), 0.0);
    for (const auto& term : terms) {
        std::uint64_t flip = 0, sign = 0;
        int ny = 0;
        for (const auto& f : term.factors) {
            const std::uint64_t bit = std::uint64_t{1} << f.site;
            if (f.axis == Axis::x) flip |= bit;
            if (f.axis == Axis::y) {
                flip |= bit;
                sign |= bit;
                ++ny;
            }
            if (f.axis == Axis::z) sign |= bit;
        }
        if (flip == 0) {
            for (std::uint64_t b = 0; b < dim(); ++b) diagonal_[b] += term.coefficient * sign_of(b, sign);
            continue;
        }
        cplx c = term.coefficient;
        for (int k = 0; k < ny; ++k) c *= cplx(0.0, 1.0);
        if (ny % 2) real_ = false;
        flips_.push_back({flip, sign, c});
    }
}

void PauliOperator::apply(const cplx* in, cplx* out) const {
    const std::uint64_t n = dim();
    for (std::uint64_t b = 0; b < n; ++b) out[b] = diagonal_[b] * in[b];
    for (const auto& f : flips_)
        for (std::uint64_t b = 0; b < n; ++b) out[b ^ f.flip] += f.coefficient * sign_of(b, f.sign_mask) * in[b];
}

void PauliOperator::apply(const double* in, double* out) const {
    if (!real_) throw std::logic_error("real apply on a complex operator");
    const std::uint64_t n = dim();
    for (std::uint64_t b = 0; b < n; ++b) out[b] = diagonal_[b] * in[b];
    for (const auto& f : flips_) {
        const double c = f.coefficient.real();
        if (f.sign_mask == 0) {
            for (std::uint64_t b = 0; b < n; ++b) out[b ^ f.flip] += c * in[b];
        } else {
            for (std::uint64_t b = 0; b < n; ++b) out[b ^ f.flip] += c * sign_of(b, f.sign_mask) * in[b];
        }
    }
}

LinearMap PauliOperator::as_map() const {
    return [this](std::span<const cplx> in, std::span<cplx> out) { apply(in.data(), out.data()); };
}

double PauliOperator::expectation(const Vector& v) const {
    Vector hv(v.size());
    apply(v.data(), hv.data());
    return v.dot(hv).real() / v.squaredNorm();
}

namespace {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Orthonormalizes the columns of w against q (first `used` columns) and among
// themselves; columns that collapse are replaced by random directions.
void orthonormalize_block(const RealMatrix& q, Eigen::Index used, RealMatrix& w, Rng& rng) {
    const Eigen::Index n = w.rows();
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            const double before = w.col(j).norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (used > 0) w.col(j) -= q.leftCols(used) * (q.leftCols(used).transpose() * w.col(j));
                for (Eigen::Index i = 0; i < j; ++i) w.col(j) -= w.col(i).dot(w.col(j)) * w.col(i);
            }
            const double after = w.col(j).norm();
            if (after > 1e-10 * std::max(before, 1e-300) && after > 1e-280) {
                w.col(j) /= after;
                break;
            }
            for (Eigen::Index i = 0; i < n; ++i) w(i, j) = rng.uniform(-1.0, 1.0);
        }
    }
}

}  // namespace

SpectrumSlice lowest_eigenvalues(const std::vector<PauliTerm>& terms, std::size_t site_count, std::size_t count,
                                 double tol, const EigenOptions& opts) {
    const PauliOperator h(terms, site_count);
    if (!h.is_real()) throw std::invalid_argument("lowest_eigenvalues expects a real Hamiltonian");
    const std::size_t dim = h.dim();
    if (count < 1 || count > 64) throw std::invalid_argument("count must be in 1..64");
    if (count > dim) throw std::invalid_argument("count exceeds the Hilbert space dimension");

    auto finish = [&](std::vector<double> ev) {
        ev.resize(count);
        SpectrumSlice s;
        s.eigenvalues = ev;
        for (double e : ev) s.gaps.push_back(e - ev.front());
        return s;
    };

    if (dim <= opts.dense_limit) {
        RealMatrix dense(dim, dim);
        RealVector e(static_cast<Eigen::Index>(dim)), col(static_cast<Eigen::Index>(dim));
        for (std::size_t j = 0; j < dim; ++j) {
            e.setZero();
            e(static_cast<Eigen::Index>(j)) = 1.0;
            h.apply(e.data(), col.data());
            dense.col(static_cast<Eigen::Index>(j)) = col;
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(dense);
        return finish({es.eigenvalues().data(), es.eigenvalues().data() + dim});
    }

    const auto n = static_cast<Eigen::Index>(dim);
    const std::size_t block = std::min(dim, count + opts.block_guard);
    // Keep the basis below ~1.5 GB.
    const std::size_t memory_cap = std::max<std::size_t>(3 * block, (std::size_t{3} << 27) / dim);
    const std::size_t max_basis = std::min({dim, std::max(opts.max_subspace, 3 * block), memory_cap});
    const auto b = static_cast<Eigen::Index>(block);

    Rng rng(opts.seed);
    RealMatrix start(n, b);
    for (Eigen::Index j = 0; j < b; ++j)
        for (Eigen::Index i = 0; i < n; ++i) start(i, j) = rng.uniform(-1.0, 1.0);
    orthonormalize_block(RealMatrix(n, 0), 0, start, rng);

    RealMatrix q(n, static_cast<Eigen::Index>(max_basis));
    RealMatrix hq(n, b);
    for (std::size_t restart = 0; restart < opts.max_restarts; ++restart) {
        Eigen::Index used = 0;
        RealMatrix t = RealMatrix::Zero(static_cast<Eigen::Index>(max_basis), static_cast<Eigen::Index>(max_basis));
        RealMatrix w = start;
        while (used + w.cols() <= static_cast<Eigen::Index>(max_basis)) {
            const Eigen::Index cols = w.cols();
            q.middleCols(used, cols) = w;
            for (Eigen::Index j = 0; j < cols; ++j) h.apply(q.col(used + j).data(), hq.col(j).data());
            const Eigen::Index now = used + cols;
            const RealMatrix proj = q.leftCols(now).transpose() * hq.leftCols(cols);
            t.block(0, used, now, cols) = proj;
            t.block(used, 0, cols, now) = proj.transpose();
            used = now;
            if (used >= static_cast<Eigen::Index>(max_basis)) break;
            const Eigen::Index next = std::min<Eigen::Index>(cols, static_cast<Eigen::Index>(max_basis) - used);
            w = hq.leftCols(next);
            orthonormalize_block(q, used, w, rng);
        }
        const RealMatrix tt = t.topLeftCorner(used, used);
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(tt);
        const RealMatrix ritz = q.leftCols(used) * es.eigenvectors().leftCols(b);

        bool converged = true;
        RealVector r(n);
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(count); ++j) {
            h.apply(ritz.col(j).data(), r.data());
            r -= es.eigenvalues()(j) * ritz.col(j);
            if (r.norm() > tol) {
                converged = false;
                break;
            }
        }
        if (converged || used == n) {
            std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + used);
            return finish(std::move(ev));
        }
        start = ritz;
        orthonormalize_block(RealMatrix(n, 0), 0, start, rng);
    }
    throw std::runtime_error("lowest_eigenvalues: no convergence within the restart limit");
}

std::vector<std::vector<std::size_t>> lattice_symmetries(const Lattice& lat, const SiteMapping& mapping) {
    const bool pr = lat.boundary_rows == Boundary::periodic, pc = lat.boundary_cols == Boundary::periodic;
    const bool square = lat.rows == lat.cols && lat.boundary_rows == lat.boundary_cols;
    auto bonds_of = [&](const std::vector<std::size_t>& perm) {
        std::set<std::pair<std::size_t, std::size_t>> out;
        for (auto [a, b] : neighbor_pairs(lat)) out.insert(std::minmax(perm[a], perm[b]));
        return out;
    };
    std::vector<std::size_t> identity(lat.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    const auto bonds = bonds_of(identity);

    std::vector<std::vector<std::size_t>> out;
    for (int dr = 0; dr < (pr ? lat.rows : 1); ++dr)
        for (int dc = 0; dc < (pc ? lat.cols : 1); ++dc)
            for (int flip = 0; flip < 4; ++flip)
                for (int tr = 0; tr < (square ? 2 : 1); ++tr) {
                    std::vector<std::size_t> perm(lat.size());
                    for (std::size_t i = 0; i < lat.size(); ++i) {
                        Coord c = lat.coord(i);
                        if (tr) std::swap(c.row, c.col);
                        if (flip & 1) c.row = lat.rows - 1 - c.row;
                        if (flip & 2) c.col = lat.cols - 1 - c.col;
                        c.row = (c.row + dr) % lat.rows;
                        c.col = (c.col + dc) % lat.cols;
                        perm[i] = lat.index(c);
                    }
                    if (bonds_of(perm) != bonds) continue;
                    std::vector<std::size_t> linear(lat.size());
                    for (std::size_t k = 0; k < lat.size(); ++k)
                        linear[k] = mapping.to_linear[perm[mapping.to_lattice[k]]];
                    out.push_back(std::move(linear));
                }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

// Group average of a real amplitude vector over bit permutations, using
// per-byte lookup tables for the permuted index.
class SymmetryAverage {
public:
    SymmetryAverage(const std::vector<std::vector<std::size_t>>& perms, std::size_t sites) : sites_(sites) {
        const std::size_t chunks = (sites + 7) / 8;
        for (const auto& p : perms) {
            if (p.size() != sites) throw std::invalid_argument("symmetry permutation has the wrong size");
            std::vector<std::uint32_t> t(chunks * 256, 0);
            for (std::size_t c = 0; c < chunks; ++c)
                for (std::uint32_t byte = 0; byte < 256; ++byte)
                    for (std::size_t k = 0; k < 8 && 8 * c + k < sites; ++k)
                        if (byte >> k & 1u) t[c * 256 + byte] |= std::uint32_t{1} << p[8 * c + k];
            tables_.push_back(std::move(t));
        }
    }

    bool empty() const { return tables_.empty(); }

    void apply(RealVector& v) const {
        RealVector out = RealVector::Zero(v.size());
        const std::size_t chunks = (sites_ + 7) / 8;
        for (const auto& t : tables_)
            for (std::uint32_t b = 0; b < static_cast<std::uint32_t>(v.size()); ++b) {
                std::uint32_t image = 0;
                for (std::size_t c = 0; c < chunks; ++c) image |= t[c * 256 + (b >> (8 * c) & 0xffu)];
                out(image) += v(b);
            }
        v = out / static_cast<double>(tables_.size());
    }

private:
    std::size_t sites_;
    std::vector<std::vector<std::uint32_t>> tables_;
};

}  // namespace

std::vector<double> sector_eigenvalues(const PauliOperator& h, const Vector& start, std::size_t count, double tol,
                                       std::size_t max_dim, const std::vector<std::vector<std::size_t>>& symmetries) {
    const SymmetryAverage average(symmetries, h.site_count());
    if (!h.is_real()) throw std::invalid_argument("sector_eigenvalues expects a real Hamiltonian");
    const auto n = static_cast<Eigen::Index>(h.dim());
    RealVector v0 = start.real();
    if (!average.empty()) average.apply(v0);
    if (v0.norm() == 0.0) throw std::invalid_argument("start vector must have a nonzero symmetric real part");
    const std::size_t cap = std::min<std::size_t>(max_dim, h.dim());
    RealMatrix q(n, static_cast<Eigen::Index>(cap));
    q.col(0) = v0 / v0.norm();
    std::vector<double> alpha, beta;
    RealVector w(n);
    std::vector<double> result;
    for (std::size_t j = 0; j < cap; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        h.apply(q.col(jj).data(), w.data());
        if (!average.empty()) average.apply(w);
        alpha.push_back(q.col(jj).dot(w));
        for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(jj + 1) * (q.leftCols(jj + 1).transpose() * w);
        const double bnorm = w.norm();
        const std::size_t m = j + 1;
        RealMatrix t = RealMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
            if (i + 1 < m) {
                t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
                t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
            }
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(t);
        const bool invariant = bnorm < 1e-12;
        // Residual of Ritz pair k is beta_m * |last component of y_k|.
        result.clear();
        std::size_t converged_prefix = 0;
        bool prefix = true;
        for (std::size_t k = 0; k < m; ++k) {
            const double res = bnorm * std::abs(es.eigenvectors()(static_cast<Eigen::Index>(m - 1), static_cast<Eigen::Index>(k)));
            if (res < tol) {
                result.push_back(es.eigenvalues()(static_cast<Eigen::Index>(k)));
                if (prefix) ++converged_prefix;
            } else {
                prefix = false;
            }
        }
        if (invariant || (converged_prefix >= count && m >= 2 * count)) break;
        if (j + 1 == cap) break;
        beta.push_back(bnorm);
        q.col(jj + 1) = w / bnorm;
    }
    // Drop copies of the same level (Lanczos ghosts and near-degenerate pairs).
    std::vector<double> unique;
    for (double e : result)
        if (unique.empty() || e - unique.back() > 1e-7) unique.push_back(e);
    if (unique.size() > count) unique.resize(count);
    return unique;
}

BandLevels continued_band_levels(const Lattice& lat, const IsingParams& p, std::size_t continuation_steps) {
    if (continuation_steps < 1) throw std::invalid_argument("need at least one continuation step");
    const auto mapping = build_mapping(lat);
    const auto start = StateVector::product(make_pattern(PatternKind::polarized(), lat), mapping);
    const auto symmetries = lattice_symmetries(lat, mapping);
    BandLevels levels;
    bool first = true;
    for (std::size_t k = 1; k <= continuation_steps; ++k) {
        const double g = p.g * static_cast<double>(k) / static_cast<double>(continuation_steps);
        const PauliOperator h(build_hamiltonian(lat, {p.J, g}, mapping), lat.size());
        const auto ev = sector_eigenvalues(h, start.amplitudes(), 12, 1e-9, 400, symmetries);
        if (ev.empty()) throw std::runtime_error("sector Lanczos found no converged levels");
        auto nearest = [&](double target) {
            return *std::min_element(ev.begin(), ev.end(),
                                     [&](double a, double b) { return std::abs(a - target) < std::abs(b - target); });
        };
        if (first) {
            levels.e0 = ev.front();
            levels.e1 = nearest(levels.e0 + 8.0 * p.J);
            levels.e2 = nearest(levels.e0 + 12.0 * p.J);
            first = false;
        } else {
            levels.e0 = nearest(levels.e0);
            levels.e1 = nearest(levels.e1);
            levels.e2 = nearest(levels.e2);
        }
    }
    return levels;
}

double expect_site(const StateVector& s, std::size_t site, Axis axis) {
    if (site >= s.site_count()) throw std::out_of_range("site out of range");
    const Vector& a = s.amplitudes();
    const std::uint64_t bit = std::uint64_t{1} << site;
    double acc = 0.0;
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(a.size()); ++b) {
        switch (axis) {
            case Axis::z: acc += std::norm(a(static_cast<Eigen::Index>(b))) * ((b & bit) ? -1.0 : 1.0); break;
            case Axis::x:
                acc += (std::conj(a(static_cast<Eigen::Index>(b ^ bit))) * a(static_cast<Eigen::Index>(b))).real();
                break;
            case Axis::y: {
                const cplx factor = (b & bit) ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
                acc += (std::conj(a(static_cast<Eigen::Index>(b ^ bit))) * factor * a(static_cast<Eigen::Index>(b))).real();
                break;
            }
        }
    }
    return acc / a.squaredNorm();
}

double expect_local(const StateVector& s, Coord site, Axis axis) { return expect_site(s, linear_site(s, site), axis); }

std::vector<double> magnetization(const StateVector& s) {
    const Vector& a = s.amplitudes();
    std::vector<double> lin(s.site_count(), 0.0);
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(a.size()); ++b) {
        const double p = std::norm(a(static_cast<Eigen::Index>(b)));
        for (std::size_t k = 0; k < lin.size(); ++k) lin[k] += ((b >> k) & 1) ? -p : p;
    }
    const double nrm = a.squaredNorm();
    std::vector<double> out(s.site_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lin[s.mapping().to_linear[i]] / nrm;
    return out;
}

double correlation(const StateVector& s, Coord i, Coord j) {
    const std::size_t a = linear_site(s, i), b = linear_site(s, j);
    if (a == b) throw std::invalid_argument("correlation needs two distinct sites");
    const Vector& amp = s.amplitudes();
    double zz = 0.0;
    for (std::uint64_t x = 0; x < static_cast<std::uint64_t>(amp.size()); ++x) {
        const double sa = ((x >> a) & 1) ? -1.0 : 1.0, sb = ((x >> b) & 1) ? -1.0 : 1.0;
        zz += std::norm(amp(static_cast<Eigen::Index>(x))) * sa * sb;
    }
    zz /= amp.squaredNorm();
    return zz - expect_site(s, a, Axis::z) * expect_site(s, b, Axis::z);
}

CorrelationCut correlation_cut(const StateVector& s, Coord anchor, CutDirection dir) {
    CorrelationCut cut;
    cut.sites = cut_sites(s.lattice(), anchor, dir);
    for (std::size_t k = 0; k < cut.sites.size(); ++k) {
        if (cut.sites[k] == anchor) {
            cut.anchor_index = k;
            const double z = expect_local(s, anchor, Axis::z);
            cut.values.push_back(1.0 - z * z);
        } else {
            cut.values.push_back(correlation(s, anchor, cut.sites[k]));
        }
    }
    return cut;
}

Matrix reduced_density_matrix(const StateVector& s, const std::vector<Coord>& sites) {
    if (sites.empty() || sites.size() > 2) throw std::invalid_argument("reduced density matrix supports 1 or 2 sites");
    std::vector<std::size_t> lin;
    for (const auto& c : sites) lin.push_back(linear_site(s, c));
    if (lin.size() == 2 && lin[0] == lin[1]) throw std::invalid_argument("sites must be distinct");
    const std::size_t k = lin.size();
    const std::size_t d = std::size_t{1} << k;
    std::uint64_t mask = 0;
    for (auto l : lin) mask |= std::uint64_t{1} << l;
    auto with_local = [&](std::uint64_t rest, std::size_t idx) {
        std::uint64_t b = rest;
        for (std::size_t i = 0; i < k; ++i)
            if ((idx >> (k - 1 - i)) & 1) b |= std::uint64_t{1} << lin[i];
        return b;
    };
    const Vector& a = s.amplitudes();
    Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(a.size()); ++b) {
        if (b & mask) continue;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    a(static_cast<Eigen::Index>(with_local(b, i))) *
                    std::conj(a(static_cast<Eigen::Index>(with_local(b, j))));
    }
    return rho / a.squaredNorm();
}

EntropyResult subsystem_entropy(const StateVector& s, const std::vector<Coord>& sites) {
    const Matrix rho = reduced_density_matrix(s, sites);
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    std::vector<double> p(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    return entropy_from_probabilities(std::move(p), static_cast<double>(sites.size()) * std::numbers::ln2);
}

EntropyResult bipartition_entropy(const StateVector& s, const std::vector<std::size_t>& sites) {
    const std::size_t n = s.site_count();
    std::vector<bool> in_a(n, false);
    for (auto x : sites) {
        if (x >= n) throw std::out_of_range("site out of range");
        in_a[x] = true;
    }
    std::vector<std::size_t> a_sites, b_sites;
    for (std::size_t k = 0; k < n; ++k) (in_a[k] ? a_sites : b_sites).push_back(k);
    const std::size_t da = std::size_t{1} << a_sites.size(), db = std::size_t{1} << b_sites.size();
    Matrix m(static_cast<Eigen::Index>(da), static_cast<Eigen::Index>(db));
    const Vector& amp = s.amplitudes();
    for (std::uint64_t x = 0; x < static_cast<std::uint64_t>(amp.size()); ++x) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t k = 0; k < a_sites.size(); ++k) ia |= ((x >> a_sites[k]) & 1) << k;
        for (std::size_t k = 0; k < b_sites.size(); ++k) ib |= ((x >> b_sites[k]) & 1) << k;
        m(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) = amp(static_cast<Eigen::Index>(x));
    }
    Eigen::BDCSVD<Matrix> svd{m};
    std::vector<double> p;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        p.push_back(svd.singularValues()(i) * svd.singularValues()(i));
    const std::size_t k = std::min(a_sites.size(), b_sites.size());
    return entropy_from_probabilities(std::move(p), static_cast<double>(k) * std::numbers::ln2);
}

double energy(const StateVector& s, const std::vector<PauliTerm>& terms) {
    return PauliOperator(terms, s.site_count()).expectation(s.amplitudes());
}

void evolve(StateVector& s, const PauliOperator& h, double dt, std::size_t steps, const KrylovOptions& opts) {
    if (h.site_count() != s.site_count()) throw std::invalid_argument("operator does not match state");
    const auto map = h.as_map();
    for (std::size_t k = 0; k < steps; ++k) s.amplitudes() = expm_apply(map, s.amplitudes(), cplx(0.0, -dt), opts);
}

Sample measure(const StateVector& s, const PauliOperator& h, const ObservableSelection& sel, double t) {
    Sample out;
    out.t = t;
    out.norm = s.norm();
    out.energy = h.expectation(s.amplitudes());
    out.max_bond = 0;
    out.mean_bond = 0.0;
    if (sel.magnetization) out.magnetization = magnetization(s);
    for (const auto& sites : sel.entropy_sites) out.entropies.push_back(subsystem_entropy(s, sites));
    if (!sel.entropy_links.empty()) {
        const TreeTopology topo(s.site_count());
        for (auto link : sel.entropy_links) {
            if (link == 0 || link >= topo.node_count()) throw std::out_of_range("not a tree edge");
            const auto [lo, hi] = topo.slot_range(link);
            std::vector<std::size_t> below;
            for (std::size_t k = lo; k < std::min(hi, s.site_count()); ++k) below.push_back(k);
            out.entropies.push_back(bipartition_entropy(s, below));
        }
    }
    for (const auto& c : sel.correlations) out.correlations.push_back(correlation_cut(s, c.anchor, c.direction));
    return out;
}

TimeSeries run_oracle(const SpinPattern& initial, const Lattice& lat, const QuenchConfig& cfg,
                      const RunHooks& hooks, StateVector* final_state) {
    cfg.validate();
    check_sites(lat.size());
    TimeSeries series;
    series.engine = "oracle";
    const auto mapping = build_mapping(lat);
    StateVector s = StateVector::product(initial, mapping);
    const PauliOperator h(build_hamiltonian(lat, cfg.params, mapping), lat.size());
    KrylovOptions opts;
    opts.tol = cfg.krylov_tol;
    opts.max_dim = std::max<std::size_t>(cfg.krylov_max_dim, 60);
    try {
        const std::size_t steps = cfg.steps();
        for (std::size_t k = 0;; ++k) {
            const double t = static_cast<double>(k) * cfg.dt;
            if (k % cfg.measure_every == 0) {
                Sample smp = measure(s, h, cfg.observables, t);
                if (hooks.on_sample) hooks.on_sample(smp);
                series.samples.push_back(std::move(smp));
            }
            if (k == steps) break;
            evolve(s, h, cfg.dt, 1, opts);
        }
    } catch (const std::exception& e) {
        series.error = e.what();
    }
    if (final_state) *final_state = s;
    return series;
}

namespace {
constexpr char kStateMagic[8] = {'T', 'T', 'N', 'Q', 'S', 'V', 'C', '1'};
}

void write_statevector(std::ostream& out, const StateVector& s, std::uint64_t config_hash) {
    using detail::put;
    out.write(kStateMagic, sizeof(kStateMagic));
    put<std::uint32_t>(out, detail::kEndianTag);
    put<std::uint64_t>(out, config_hash);
    detail::write_geometry(out, s.lattice(), s.mapping());
    const Vector& a = s.amplitudes();
    put<std::uint64_t>(out, static_cast<std::uint64_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        put<double>(out, a(i).real());
        put<double>(out, a(i).imag());
    }
    if (!out) throw std::runtime_error("failed to write state vector");
}

std::pair<StateVector, std::uint64_t> read_statevector(std::istream& in) {
    using detail::get;
    const bool swap = detail::read_preamble(in, kStateMagic);
    const auto hash = get<std::uint64_t>(in, swap);
    auto [lat, mapping] = detail::read_geometry(in, swap);
    const auto n = get<std::uint64_t>(in, swap);
    if (lat.size() > kOracleMaxSites || n != (std::uint64_t{1} << lat.size()))
        throw std::runtime_error("state vector size does not match lattice");
    Vector a(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        const double re = get<double>(in, swap);
        const double im = get<double>(in, swap);
        a(static_cast<Eigen::Index>(i)) = cplx(re, im);
    }
    return {StateVector(lat, std::move(mapping), std::move(a)), hash};
}

}  // namespace ttnq
