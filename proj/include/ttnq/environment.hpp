#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ttnq/krylov.hpp"
#include "ttnq/model.hpp"
#include "ttnq/tensor.hpp"

namespace ttnq {

/// 2x2 Pauli matrix in the basis (up, down).
const Matrix& pauli(Axis a);

/// Pauli term list regrouped into on-site 2x2 matrices and two-site couplings.
struct CompiledHamiltonian {
    struct Coupling {
        std::size_t s = 0;
        Axis a = Axis::z;
        std::size_t t = 0;
        Axis b = Axis::z;
        double c = 0.0;
    };

    std::size_t site_count = 0;
    std::vector<Matrix> onsite;
    std::vector<Coupling> couplings;
    std::vector<std::vector<std::size_t>> couplings_of_site;

    CompiledHamiltonian() = default;
    CompiledHamiltonian(const std::vector<PauliTerm>& terms, std::size_t site_count);
};

struct OpenOperator {
    std::size_t site = 0;
    Axis axis = Axis::z;
    Matrix m;
};

/// Everything on the far side of one tensor leg, projected onto that leg:
/// the Hamiltonian terms acting only there (h) and the single-site Paulis of
/// sites that still couple to something outside (open).
struct LegEnvironment {
    Matrix h;
    std::vector<OpenOperator> open;
    std::vector<bool> contains;  // per site
    std::size_t site_total = 0;

    const Matrix* find(std::size_t site, Axis axis) const;
    std::size_t dim() const { return static_cast<std::size_t>(h.rows()); }
};

/// A dimension-1 leg carrying no sites.
LegEnvironment trivial_environment(std::size_t site_count);
LegEnvironment physical_environment(const CompiledHamiltonian& h, std::size_t site);

/// Sum of all Hamiltonian terms supported on the legs' far sides, acting on a
/// tensor whose legs are described by `envs` in leg order. A null entry marks
/// a leg on which nothing acts.
class EffectiveOperator {
public:
    EffectiveOperator(const CompiledHamiltonian& ham, std::vector<const LegEnvironment*> envs,
                      std::vector<std::size_t> dims);

    std::size_t size() const { return size_; }
    const std::vector<std::size_t>& dims() const { return dims_; }
    void apply(const cplx* in, cplx* out) const;
    LinearMap as_map() const;
    /// <t|H|t> / <t|t>
    double expectation(const DenseTensor& t) const;

private:
    struct Cross {
        std::size_t leg_a = 0;
        const Matrix* a = nullptr;
        std::size_t leg_b = 0;
        Matrix w;
    };

    std::vector<std::size_t> dims_;
    std::size_t size_ = 0;
    std::vector<std::pair<std::size_t, const Matrix*>> local_;
    std::vector<Cross> cross_;
    mutable std::vector<cplx> scratch_;
};

/// Environment seen through leg `out_leg` of `t`, where `t` is an isometry
/// from its other legs onto `out_leg`. `envs` lists one environment per leg of
/// `t`; the entry for `out_leg` is ignored.
LegEnvironment environment_through(const CompiledHamiltonian& ham, const DenseTensor& t, std::size_t out_leg,
                                   std::span<const LegEnvironment* const> envs);

}  // namespace ttnq
