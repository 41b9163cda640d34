#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ttnq {

using cplx = std::complex<double>;
using Matrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;

struct Leg {
    std::string label;
    std::size_t dim = 1;

    friend bool operator==(const Leg&, const Leg&) = default;
};

/// Dense complex tensor with labeled legs.
///
/// Storage is row-major in leg order: the last leg varies fastest. This layout
/// is part of the serialization format and must not change.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<Leg> legs);
    DenseTensor(std::vector<Leg> legs, std::vector<cplx> data);

    static DenseTensor scalar(cplx value);

    const std::vector<Leg>& legs() const { return legs_; }
    std::size_t rank() const { return legs_.size(); }
    std::size_t dim(std::size_t axis) const { return legs_.at(axis).dim; }
    std::vector<std::size_t> dims() const;
    std::size_t size() const { return data_.size(); }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }
    cplx* raw() { return data_.data(); }
    const cplx* raw() const { return data_.data(); }

    bool has_leg(std::string_view label) const;
    std::size_t axis_of(std::string_view label) const;
    void relabel(std::string_view from, std::string to);

    cplx& at(std::initializer_list<std::size_t> index);
    cplx at(std::initializer_list<std::size_t> index) const;

    DenseTensor permuted(const std::vector<std::size_t>& order) const;
    DenseTensor permuted(const std::vector<std::string>& labels) const;

    double norm() const;
    DenseTensor conj() const;

    DenseTensor& operator+=(const DenseTensor& other);
    DenseTensor& operator-=(const DenseTensor& other);
    DenseTensor& operator*=(cplx factor);

    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
    friend DenseTensor operator*(DenseTensor a, cplx f) { return a *= f; }
    friend DenseTensor operator*(cplx f, DenseTensor a) { return a *= f; }

    void write(std::ostream& out) const;
    static DenseTensor read(std::istream& in);

private:
    void check_same_shape(const DenseTensor& other) const;

    std::vector<Leg> legs_;
    std::vector<cplx> data_;
};

/// Sum over the listed (label_in_a, label_in_b) pairs. Free legs of `a` come
/// first in the result, followed by the free legs of `b`, each in original order.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<std::string, std::string>> pairs);

inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            std::initializer_list<std::pair<std::string, std::string>> pairs) {
    std::vector<std::pair<std::string, std::string>> p(pairs);
    return contract(a, b, p);
}

/// Row-major matrix view of `t`: rows enumerate `row_labels` (in the given
/// order), columns the remaining legs in tensor order.
RowMatrix to_matrix(const DenseTensor& t, const std::vector<std::string>& row_labels);
DenseTensor from_matrix(const RowMatrix& m, std::vector<Leg> row_legs, std::vector<Leg> col_legs);

struct TruncationReport {
    double discarded_weight = 0.0;
    std::size_t kept_rank = 0;
    std::vector<double> singular_values;  // full spectrum, descending

    /// Accumulates another split into an aggregate (sweeps report one of these).
    void merge(const TruncationReport& other);
};

struct SvdSplit {
    DenseTensor left;   // legs: left labels..., bond
    DenseTensor right;  // legs: bond, remaining labels...
    TruncationReport report;
};

struct SvdTriple {
    DenseTensor u;                 // isometry: left labels..., bond
    std::vector<double> singular;  // kept values
    DenseTensor vh;                // co-isometry: bond, remaining labels...
    TruncationReport report;
};

/// Truncated SVD. A singular value s_k is dropped if k >= max_rank or
/// s_k^2 < cutoff * sum(s^2) or s_k is at the rounding floor (numerically zero);
/// at least one value is always kept.
SvdTriple svd_decompose(const DenseTensor& t, const std::vector<std::string>& left_labels,
                        std::size_t max_rank, double cutoff, const std::string& bond_label = "bond");

/// Same truncation as svd_decompose with the singular values absorbed into the left factor.
SvdSplit svd_split(const DenseTensor& t, const std::vector<std::string>& left_labels,
                   std::size_t max_rank, double cutoff, const std::string& bond_label = "bond");

struct QrSplit {
    DenseTensor q;  // isometry: kept labels..., bond
    DenseTensor r;  // bond, remaining labels...
};

/// Thin QR. The phases are fixed so that the diagonal of R is real and non-negative.
QrSplit qr_isometrize(const DenseTensor& t, const std::vector<std::string>& kept_labels,
                      const std::string& bond_label = "bond");

/// Grows `leg` to `new_dim`. Existing entries are kept bit-for-bit; new
/// entries get a random phase and magnitude at most `amplitude`.
DenseTensor pad_with_noise(const DenseTensor& t, std::string_view leg, std::size_t new_dim,
                           double amplitude, std::uint64_t seed);

}  // namespace ttnq
