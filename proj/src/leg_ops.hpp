#pragma once

// Index-based helpers on row-major tensors, used by the tree code where the
// label machinery of DenseTensor would only add copies.

#include <cstddef>
#include <vector>

#include "ttnq/tensor.hpp"

namespace ttnq::detail {

struct LegSplit {
    std::size_t pre = 1;
    std::size_t dim = 1;
    std::size_t post = 1;
};

inline LegSplit split_at(const std::vector<std::size_t>& dims, std::size_t k) {
    LegSplit s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i < k) s.pre *= dims[i];
        else if (i > k) s.post *= dims[i];
    }
    s.dim = dims[k];
    return s;
}

inline std::size_t product(const std::vector<std::size_t>& dims) {
    std::size_t p = 1;
    for (auto d : dims) p *= d;
    return p;
}

using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

/// out (leg k replaced by m.rows()) = m applied to leg k of `in`. With
/// `accumulate` the result is added to `out`.
inline void leg_apply(const cplx* in, const std::vector<std::size_t>& dims, std::size_t k, const Matrix& m,
                      cplx* out, bool accumulate) {
    const LegSplit s = split_at(dims, k);
    const auto d_new = static_cast<Eigen::Index>(m.rows());
    const auto d = static_cast<Eigen::Index>(s.dim);
    if (s.post == 1) {
        ConstRowMap a(in, static_cast<Eigen::Index>(s.pre), d);
        RowMap b(out, static_cast<Eigen::Index>(s.pre), d_new);
        if (accumulate) b.noalias() += a * m.transpose();
        else b.noalias() = a * m.transpose();
        return;
    }
    const auto post = static_cast<Eigen::Index>(s.post);
    for (std::size_t p = 0; p < s.pre; ++p) {
        ConstRowMap a(in + p * s.dim * s.post, d, post);
        RowMap b(out + p * static_cast<std::size_t>(d_new) * s.post, d_new, post);
        if (accumulate) b.noalias() += m * a;
        else b.noalias() = m * a;
    }
}

inline DenseTensor leg_apply(const DenseTensor& t, std::size_t k, const Matrix& m) {
    auto legs = t.legs();
    legs[k].dim = static_cast<std::size_t>(m.rows());
    DenseTensor out(legs);
    leg_apply(t.raw(), t.dims(), k, m, out.raw(), false);
    return out;
}

/// G(i, j) = sum over all legs except k of conj(a[.., i, ..]) * b[.., j, ..].
inline Matrix leg_gram(const cplx* a, const cplx* b, const std::vector<std::size_t>& dims, std::size_t k) {
    const LegSplit s = split_at(dims, k);
    const auto d = static_cast<Eigen::Index>(s.dim);
    if (s.post == 1) {
        ConstRowMap am(a, static_cast<Eigen::Index>(s.pre), d);
        ConstRowMap bm(b, static_cast<Eigen::Index>(s.pre), d);
        return am.adjoint() * bm;
    }
    Matrix g = Matrix::Zero(d, d);
    const auto post = static_cast<Eigen::Index>(s.post);
    for (std::size_t p = 0; p < s.pre; ++p) {
        ConstRowMap am(a + p * s.dim * s.post, d, post);
        ConstRowMap bm(b + p * s.dim * s.post, d, post);
        g.noalias() += am.conjugate() * bm.transpose();
    }
    return g;
}

inline Matrix leg_gram(const DenseTensor& a, const DenseTensor& b, std::size_t k) {
    return leg_gram(a.raw(), b.raw(), a.dims(), k);
}

/// Rows enumerate all legs except k (in order), columns enumerate leg k.
inline RowMatrix unfold(const DenseTensor& t, std::size_t k) {
    const auto dims = t.dims();
    const LegSplit s = split_at(dims, k);
    RowMatrix m(static_cast<Eigen::Index>(s.pre * s.post), static_cast<Eigen::Index>(s.dim));
    const cplx* src = t.raw();
    for (std::size_t p = 0; p < s.pre; ++p)
        for (std::size_t i = 0; i < s.dim; ++i)
            for (std::size_t q = 0; q < s.post; ++q)
                m(static_cast<Eigen::Index>(p * s.post + q), static_cast<Eigen::Index>(i)) =
                    src[(p * s.dim + i) * s.post + q];
    return m;
}

/// Inverse of unfold: `m` has rows over the other legs and columns over leg k.
inline DenseTensor fold(const RowMatrix& m, std::vector<Leg> legs, std::size_t k) {
    legs[k].dim = static_cast<std::size_t>(m.cols());
    DenseTensor t(std::move(legs));
    const auto dims = t.dims();
    const LegSplit s = split_at(dims, k);
    cplx* dst = t.raw();
    for (std::size_t p = 0; p < s.pre; ++p)
        for (std::size_t i = 0; i < s.dim; ++i)
            for (std::size_t q = 0; q < s.post; ++q)
                dst[(p * s.dim + i) * s.post + q] =
                    m(static_cast<Eigen::Index>(p * s.post + q), static_cast<Eigen::Index>(i));
    return t;
}

struct LegQr {
    DenseTensor q;  // isometry from the other legs onto leg k
    Matrix r;       // new leg k index x old leg k index
};

/// QR with leg k as the column index. The diagonal of R is made real and
/// non-negative. Leg k keeps its dimension when the other legs allow it.
inline LegQr leg_qr(const DenseTensor& t, std::size_t k) {
    const RowMatrix a = unfold(t, k);
    const Eigen::Index rows = a.rows(), cols = a.cols();
    const Eigen::Index rank = std::min(rows, cols);
    Eigen::HouseholderQR<Matrix> qr{Matrix(a)};
    Matrix q = qr.householderQ() * Matrix::Identity(rows, rank);
    Matrix r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < rank; ++i) {
        const cplx dgl = r(i, i);
        const double mag = std::abs(dgl);
        if (mag > 0.0) {
            const cplx phase = dgl / mag;
            r.row(i) *= std::conj(phase);
            q.col(i) *= phase;
        }
    }
    return {fold(RowMatrix(q), t.legs(), k), r};
}

/// Appends orthonormal columns to the orthonormal columns of q until it has
/// `target` of them, taking unit vectors in order and skipping dependent ones.
inline RowMatrix complete_columns(const RowMatrix& q, std::size_t target) {
    const Eigen::Index rows = q.rows();
    const auto want = std::min<Eigen::Index>(static_cast<Eigen::Index>(target), rows);
    Matrix out(rows, want);
    out.leftCols(q.cols()) = q;
    Eigen::Index have = q.cols();
    for (Eigen::Index j = 0; j < rows && have < want; ++j) {
        Vector v = Vector::Zero(rows);
        v(j) = 1.0;
        for (int pass = 0; pass < 2; ++pass) v -= out.leftCols(have) * (out.leftCols(have).adjoint() * v);
        const double nv = v.norm();
        if (nv < 1e-8) continue;
        out.col(have++) = v / nv;
    }
    return RowMatrix(out.leftCols(have));
}

}  // namespace ttnq::detail
