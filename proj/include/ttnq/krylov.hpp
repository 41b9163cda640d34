#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>

#include "ttnq/tensor.hpp"

namespace ttnq {

/// y = H x on vectorized tensors. H must be Hermitian.
using LinearMap = std::function<void(std::span<const cplx> x, std::span<cplx> y)>;

struct KrylovOptions {
    double tol = 1e-12;
    std::size_t max_dim = 30;
};

struct KrylovStats {
    std::size_t dim = 0;
    double error_estimate = 0.0;
};

class KrylovError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// exp(coefficient * H) v by Lanczos with full re-orthogonalization.
///
/// The subspace grows until the change between successive approximations,
/// relative to |v|, falls below `tol`. Throws KrylovError if `max_dim` is
/// reached first or if v is zero.
Vector expm_apply(const LinearMap& h, const Vector& v, cplx coefficient, const KrylovOptions& opts,
                  KrylovStats* stats = nullptr);

DenseTensor krylov_expm_apply(const LinearMap& h, const DenseTensor& v, cplx coefficient,
                              const KrylovOptions& opts = {}, KrylovStats* stats = nullptr);

}  // namespace ttnq
