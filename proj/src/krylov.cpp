#include "ttnq/krylov.hpp"

#include <cmath>
#include <vector>

namespace ttnq {

namespace {

// exp(c T) e_1 for the leading m x m block of the Lanczos tridiagonal.
Vector tridiagonal_exp_e1(const std::vector<double>& alpha, const std::vector<double>& beta,
                          std::size_t m, cplx c) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
        if (i + 1 < m) {
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
            t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::MatrixXd& q = es.eigenvectors();
    Vector y = Vector::Zero(static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) {
        const cplx w = std::exp(c * es.eigenvalues()(k)) * q(0, k);
        y += w * q.col(k).cast<cplx>();
    }
    return y;
}

}  // namespace

Vector expm_apply(const LinearMap& h, const Vector& v, cplx coefficient, const KrylovOptions& opts,
                  KrylovStats* stats) {
    const double beta0 = v.norm();
    if (beta0 == 0.0) throw KrylovError("krylov_expm_apply: zero input vector");
    if (opts.max_dim < 1) throw KrylovError("krylov_expm_apply: max_dim must be positive");
    if (coefficient == cplx{0.0, 0.0}) {
        if (stats) *stats = {0, 0.0};
        return v;
    }

    const Eigen::Index n = v.size();
    const std::size_t max_dim = std::min<std::size_t>(opts.max_dim, static_cast<std::size_t>(n));
    std::vector<Vector> basis;
    basis.reserve(max_dim + 1);
    basis.push_back(v / beta0);

    std::vector<double> alpha, beta;
    Vector w(n);
    Vector previous;

    for (std::size_t j = 0; j < max_dim; ++j) {
        h(std::span<const cplx>(basis[j].data(), static_cast<std::size_t>(n)),
          std::span<cplx>(w.data(), static_cast<std::size_t>(n)));
        const double a = basis[j].dot(w).real();
        alpha.push_back(a);
        w -= a * basis[j];
        if (j > 0) w -= beta[j - 1] * basis[j - 1];
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i <= j; ++i) w -= basis[i].dot(w) * basis[i];
        const double b = w.norm();

        const std::size_t m = j + 1;
        Vector y = tridiagonal_exp_e1(alpha, beta, m, coefficient);

        const double scale = std::abs(a) + (j > 0 ? beta[j - 1] : 0.0) + 1.0;
        const bool invariant = b <= 1e-14 * scale;
        double err = 0.0;
        if (!invariant) {
            if (m == 1) {
                err = 1.0;
            } else {
                Vector diff = y;
                diff.head(static_cast<Eigen::Index>(m - 1)) -= previous;
                err = diff.norm();
            }
        }
        if (invariant || err < opts.tol) {
            Vector out = Vector::Zero(n);
            for (std::size_t i = 0; i < m; ++i) out += y(static_cast<Eigen::Index>(i)) * basis[i];
            if (stats) *stats = {m, err};
            return beta0 * out;
        }
        previous = std::move(y);
        beta.push_back(b);
        if (j + 1 < max_dim) basis.push_back(w / b);
    }
    throw KrylovError("krylov_expm_apply: no convergence within max_dim = " +
                      std::to_string(opts.max_dim));
}

DenseTensor krylov_expm_apply(const LinearMap& h, const DenseTensor& v, cplx coefficient,
                              const KrylovOptions& opts, KrylovStats* stats) {
    const auto n = static_cast<Eigen::Index>(v.size());
    Vector x = Eigen::Map<const Vector>(v.raw(), n);
    Vector y = expm_apply(h, x, coefficient, opts, stats);
    DenseTensor out(v.legs());
    Eigen::Map<Vector>(out.raw(), n) = y;
    return out;
}

}  // namespace ttnq
