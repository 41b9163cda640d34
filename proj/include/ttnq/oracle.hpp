#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "ttnq/krylov.hpp"
#include "ttnq/lattice.hpp"
#include "ttnq/model.hpp"
#include "ttnq/tdvp.hpp"
#include "ttnq/ttn.hpp"

namespace ttnq {

inline constexpr std::size_t kOracleMaxSites = 20;

/// Dense state of up to kOracleMaxSites spins. Bit k of an amplitude index is
/// site k in mapping order; bit value 0 is spin up.
class StateVector {
public:
    StateVector(Lattice lattice, SiteMapping mapping, Vector amplitudes);

    static StateVector product(const SpinPattern& pattern, const SiteMapping& mapping);

    const Lattice& lattice() const { return lattice_; }
    const SiteMapping& mapping() const { return mapping_; }
    std::size_t site_count() const { return lattice_.size(); }
    const Vector& amplitudes() const { return amps_; }
    Vector& amplitudes() { return amps_; }
    double norm() const { return amps_.norm(); }

private:
    Lattice lattice_;
    SiteMapping mapping_;
    Vector amps_;
};

/// Matrix-free sum of Pauli terms on 2^n amplitudes.
class PauliOperator {
public:
    PauliOperator(const std::vector<PauliTerm>& terms, std::size_t site_count);

    std::size_t site_count() const { return sites_; }
    std::size_t dim() const { return std::size_t{1} << sites_; }
    /// True when no term contains a y factor, so the matrix is real.
    bool is_real() const { return real_; }

    void apply(const cplx* in, cplx* out) const;
    void apply(const double* in, double* out) const;  // requires is_real()
    LinearMap as_map() const;
    double expectation(const Vector& v) const;

private:
    struct Flip {
        std::uint64_t flip;
        std::uint64_t sign_mask;
        cplx coefficient;
    };
    std::size_t sites_;
    bool real_ = true;
    std::vector<double> diagonal_;
    std::vector<Flip> flips_;
};

struct SpectrumSlice {
    std::vector<double> eigenvalues;  // ascending
    std::vector<double> gaps;         // eigenvalues[i] - eigenvalues[0]
};

struct EigenOptions {
    std::size_t block_guard = 6;      // extra block vectors beyond the requested count
    std::size_t max_subspace = 360;   // basis size before a restart
    std::size_t max_restarts = 200;
    std::size_t dense_limit = 64;     // dimensions up to this use dense diagonalization
    std::uint64_t seed = 1;
};

/// The `count` lowest eigenvalues by restarted block Lanczos with full
/// reorthogonalization; every returned pair has residual norm below tol.
SpectrumSlice lowest_eigenvalues(const std::vector<PauliTerm>& terms, std::size_t site_count, std::size_t count,
                                 double tol = 1e-8, const EigenOptions& opts = {});

/// Site permutations in mapping order (perm[k] is the image of site k) that
/// leave the bond set invariant: translations along periodic directions,
/// reflections, and the transpose when the lattice is square.
std::vector<std::vector<std::size_t>> lattice_symmetries(const Lattice& lat, const SiteMapping& mapping);

/// Lowest Ritz values of the Krylov space generated from `start`, i.e. of
/// the symmetry sector containing it. Values with residual above tol are dropped.
/// Round-off lets a long Lanczos run drift into other sectors; when
/// `symmetries` is given (a group, e.g. from lattice_symmetries) every Krylov
/// vector is averaged over it, which pins the run to the invariant sector.
std::vector<double> sector_eigenvalues(const PauliOperator& h, const Vector& start, std::size_t count,
                                       double tol = 1e-9, std::size_t max_dim = 400,
                                       const std::vector<std::vector<std::size_t>>& symmetries = {});

/// Energies of the zero-momentum ground, single-flip and neighbour-pair
/// levels reached from the all-down state, followed from g near 0 (where they
/// sit at 0, +8J and +12J above the ground state) up to the target g.
struct BandLevels {
    double e0 = 0.0;
    double e1 = 0.0;
    double e2 = 0.0;
    double delta01() const { return e1 - e0; }
    double delta12() const { return e2 - e1; }
};
BandLevels continued_band_levels(const Lattice& lat, const IsingParams& p, std::size_t continuation_steps = 5);

double expect_site(const StateVector& s, std::size_t site, Axis axis);
double expect_local(const StateVector& s, Coord site, Axis axis);
std::vector<double> magnetization(const StateVector& s);  // lattice order
double correlation(const StateVector& s, Coord i, Coord j);
CorrelationCut correlation_cut(const StateVector& s, Coord anchor, CutDirection dir);
/// Index order: the first listed site is the most significant bit.
Matrix reduced_density_matrix(const StateVector& s, const std::vector<Coord>& sites);
EntropyResult subsystem_entropy(const StateVector& s, const std::vector<Coord>& sites);
/// Schmidt spectrum between the listed sites (mapping order) and the rest.
EntropyResult bipartition_entropy(const StateVector& s, const std::vector<std::size_t>& sites);
double energy(const StateVector& s, const std::vector<PauliTerm>& terms);

/// exp(-i H dt) applied `steps` times.
void evolve(StateVector& s, const PauliOperator& h, double dt, std::size_t steps, const KrylovOptions& opts);

Sample measure(const StateVector& s, const PauliOperator& h, const ObservableSelection& sel, double t);

/// Same protocol and sampling as the tree run, on the exact state; tagged
/// engine=oracle. The final state is stored in `final_state` when given.
TimeSeries run_oracle(const SpinPattern& initial, const Lattice& lat, const QuenchConfig& cfg,
                      const RunHooks& hooks = {}, StateVector* final_state = nullptr);

/// Binary dump of the amplitudes with lattice, mapping and config hash.
void write_statevector(std::ostream& out, const StateVector& s, std::uint64_t config_hash);
std::pair<StateVector, std::uint64_t> read_statevector(std::istream& in);

}  // namespace ttnq
