#include "ttnq/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "ttnq/rng.hpp"

namespace ttnq {

namespace {

std::size_t product(const std::vector<Leg>& legs) {
    std::size_t n = 1;
    for (const auto& l : legs) n *= l.dim;
    return n;
}

void check_legs(const std::vector<Leg>& legs) {
    std::unordered_set<std::string> seen;
    for (const auto& l : legs) {
        if (l.dim == 0) throw std::invalid_argument("tensor leg '" + l.label + "' has dimension 0");
        if (!seen.insert(l.label).second)
            throw std::invalid_argument("duplicate tensor leg label '" + l.label + "'");
    }
}

constexpr char kMagic[8] = {'T', 'T', 'N', 'Q', 'T', 'N', 'S', '1'};
constexpr std::uint32_t kEndianTag = 0x01020304u;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, bool swap) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated tensor stream");
    if (swap) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Leg> legs) : legs_(std::move(legs)) {
    check_legs(legs_);
    data_.assign(product(legs_), cplx{0.0, 0.0});
}

DenseTensor::DenseTensor(std::vector<Leg> legs, std::vector<cplx> data)
    : legs_(std::move(legs)), data_(std::move(data)) {
    check_legs(legs_);
    if (data_.size() != product(legs_))
        throw std::invalid_argument("tensor data length does not match leg dimensions");
}

DenseTensor DenseTensor::scalar(cplx value) { return DenseTensor({}, {value}); }

std::vector<std::size_t> DenseTensor::dims() const {
    std::vector<std::size_t> d;
    d.reserve(legs_.size());
    for (const auto& l : legs_) d.push_back(l.dim);
    return d;
}

bool DenseTensor::has_leg(std::string_view label) const {
    return std::any_of(legs_.begin(), legs_.end(), [&](const Leg& l) { return l.label == label; });
}

std::size_t DenseTensor::axis_of(std::string_view label) const {
    for (std::size_t i = 0; i < legs_.size(); ++i)
        if (legs_[i].label == label) return i;
    throw std::invalid_argument("unknown tensor leg '" + std::string(label) + "'");
}

void DenseTensor::relabel(std::string_view from, std::string to) {
    const auto axis = axis_of(from);
    if (from != to && has_leg(to))
        throw std::invalid_argument("relabel would duplicate leg '" + to + "'");
    legs_[axis].label = std::move(to);
}

cplx& DenseTensor::at(std::initializer_list<std::size_t> index) {
    if (index.size() != legs_.size()) throw std::invalid_argument("index rank mismatch");
    std::size_t offset = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= legs_[axis].dim) throw std::out_of_range("tensor index out of range");
        offset = offset * legs_[axis].dim + i;
        ++axis;
    }
    return data_[offset];
}

cplx DenseTensor::at(std::initializer_list<std::size_t> index) const {
    return const_cast<DenseTensor*>(this)->at(index);
}

DenseTensor DenseTensor::permuted(const std::vector<std::size_t>& order) const {
    const std::size_t r = rank();
    if (order.size() != r) throw std::invalid_argument("permutation rank mismatch");
    std::vector<bool> used(r, false);
    for (auto o : order) {
        if (o >= r || used[o]) throw std::invalid_argument("invalid permutation");
        used[o] = true;
    }
    bool identity = true;
    for (std::size_t i = 0; i < r; ++i) identity = identity && order[i] == i;
    if (identity) return *this;

    std::vector<Leg> legs(r);
    for (std::size_t i = 0; i < r; ++i) legs[i] = legs_[order[i]];

    std::vector<std::size_t> src_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) src_stride[i - 1] = src_stride[i] * legs_[i].dim;

    std::vector<std::size_t> dims(r), stride(r);
    for (std::size_t i = 0; i < r; ++i) {
        dims[i] = legs[i].dim;
        stride[i] = src_stride[order[i]];
    }

    std::vector<cplx> out(data_.size());
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    // Innermost destination axis is walked as a strided copy.
    const std::size_t inner = r ? dims[r - 1] : 1;
    const std::size_t inner_stride = r ? stride[r - 1] : 0;
    for (std::size_t dst = 0; dst < out.size(); dst += inner) {
        for (std::size_t k = 0; k < inner; ++k) out[dst + k] = data_[src + k * inner_stride];
        for (std::size_t ax = r - 1; ax-- > 0;) {
            ++idx[ax];
            src += stride[ax];
            if (idx[ax] < dims[ax]) break;
            src -= stride[ax] * dims[ax];
            idx[ax] = 0;
        }
    }
    return DenseTensor(std::move(legs), std::move(out));
}

DenseTensor DenseTensor::permuted(const std::vector<std::string>& labels) const {
    std::vector<std::size_t> order;
    order.reserve(labels.size());
    for (const auto& l : labels) order.push_back(axis_of(l));
    return permuted(order);
}

double DenseTensor::norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

DenseTensor DenseTensor::conj() const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v = std::conj(v);
    return out;
}

void DenseTensor::check_same_shape(const DenseTensor& other) const {
    if (legs_ != other.legs_) throw std::invalid_argument("tensor legs differ");
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator*=(cplx factor) {
    for (auto& v : data_) v *= factor;
    return *this;
}

void DenseTensor::write(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kEndianTag);
    put<std::uint64_t>(out, legs_.size());
    for (const auto& l : legs_) {
        put<std::uint64_t>(out, l.label.size());
        out.write(l.label.data(), static_cast<std::streamsize>(l.label.size()));
        put<std::uint64_t>(out, l.dim);
    }
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(cplx)));
}

DenseTensor DenseTensor::read(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a serialized tensor");
    std::uint32_t tag{};
    in.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    bool swap = false;
    if (tag != kEndianTag) {
        if (tag != 0x04030201u) throw std::runtime_error("bad endianness tag");
        swap = true;
    }
    const auto rank = get<std::uint64_t>(in, swap);
    std::vector<Leg> legs(rank);
    for (auto& l : legs) {
        const auto len = get<std::uint64_t>(in, swap);
        l.label.resize(len);
        in.read(l.label.data(), static_cast<std::streamsize>(len));
        l.dim = get<std::uint64_t>(in, swap);
    }
    std::vector<cplx> data(product(legs));
    for (auto& v : data) {
        const double re = get<double>(in, swap);
        const double im = get<double>(in, swap);
        v = {re, im};
    }
    return DenseTensor(std::move(legs), std::move(data));
}

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     std::span<const std::pair<std::string, std::string>> pairs) {
    std::vector<std::size_t> ca, cb;
    for (const auto& [la, lb] : pairs) {
        const auto ia = a.axis_of(la);
        const auto ib = b.axis_of(lb);
        if (a.dim(ia) != b.dim(ib))
            throw std::invalid_argument("contract: dimension mismatch on pair (" + la + ", " + lb + ")");
        if (std::find(ca.begin(), ca.end(), ia) != ca.end() ||
            std::find(cb.begin(), cb.end(), ib) != cb.end())
            throw std::invalid_argument("contract: leg listed twice");
        ca.push_back(ia);
        cb.push_back(ib);
    }
    std::vector<std::size_t> order_a, order_b;
    std::vector<Leg> out_legs;
    std::size_t rows = 1, inner = 1, cols = 1;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (std::find(ca.begin(), ca.end(), i) == ca.end()) {
            order_a.push_back(i);
            out_legs.push_back(a.legs()[i]);
            rows *= a.dim(i);
        }
    for (auto i : ca) {
        order_a.push_back(i);
        inner *= a.dim(i);
    }
    order_b = cb;
    for (std::size_t i = 0; i < b.rank(); ++i)
        if (std::find(cb.begin(), cb.end(), i) == cb.end()) {
            order_b.push_back(i);
            out_legs.push_back(b.legs()[i]);
            cols *= b.dim(i);
        }

    const DenseTensor pa = a.permuted(order_a);
    const DenseTensor pb = b.permuted(order_b);
    DenseTensor out(std::move(out_legs));  // validates label uniqueness
    Eigen::Map<const RowMatrix> ma(pa.raw(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(inner));
    Eigen::Map<const RowMatrix> mb(pb.raw(), static_cast<Eigen::Index>(inner),
                                   static_cast<Eigen::Index>(cols));
    Eigen::Map<RowMatrix> mo(out.raw(), static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(cols));
    mo.noalias() = ma * mb;
    return out;
}

RowMatrix to_matrix(const DenseTensor& t, const std::vector<std::string>& row_labels) {
    std::vector<std::size_t> order;
    std::size_t rows = 1;
    for (const auto& l : row_labels) {
        const auto ax = t.axis_of(l);
        if (std::find(order.begin(), order.end(), ax) != order.end())
            throw std::invalid_argument("to_matrix: repeated label");
        order.push_back(ax);
        rows *= t.dim(ax);
    }
    for (std::size_t i = 0; i < t.rank(); ++i)
        if (std::find(order.begin(), order.end(), i) == order.end()) order.push_back(i);
    const DenseTensor p = t.permuted(order);
    const std::size_t cols = p.size() / rows;
    return Eigen::Map<const RowMatrix>(p.raw(), static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(cols));
}

DenseTensor from_matrix(const RowMatrix& m, std::vector<Leg> row_legs, std::vector<Leg> col_legs) {
    std::vector<Leg> legs = std::move(row_legs);
    legs.insert(legs.end(), col_legs.begin(), col_legs.end());
    DenseTensor out(std::move(legs));
    if (out.size() != static_cast<std::size_t>(m.size()))
        throw std::invalid_argument("from_matrix: shape mismatch");
    Eigen::Map<RowMatrix>(out.raw(), m.rows(), m.cols()) = m;
    return out;
}

void TruncationReport::merge(const TruncationReport& other) {
    discarded_weight += other.discarded_weight;
    kept_rank = std::max(kept_rank, other.kept_rank);
}

namespace {

struct SplitLegs {
    std::vector<Leg> row;
    std::vector<Leg> col;
};

SplitLegs split_legs(const DenseTensor& t, const std::vector<std::string>& left_labels) {
    if (left_labels.empty() || left_labels.size() >= t.rank())
        throw std::invalid_argument("left label set must be a nonempty proper subset of the legs");
    SplitLegs s;
    for (const auto& l : left_labels) s.row.push_back(t.legs()[t.axis_of(l)]);
    for (const auto& l : t.legs())
        if (std::find(left_labels.begin(), left_labels.end(), l.label) == left_labels.end())
            s.col.push_back(l);
    return s;
}

}  // namespace

SvdTriple svd_decompose(const DenseTensor& t, const std::vector<std::string>& left_labels,
                        std::size_t max_rank, double cutoff, const std::string& bond_label) {
    if (max_rank < 1) throw std::invalid_argument("max_rank must be at least 1");
    if (cutoff < 0.0) throw std::invalid_argument("cutoff must be non-negative");
    const auto legs = split_legs(t, left_labels);
    const RowMatrix m = to_matrix(t, left_labels);

    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const auto full = static_cast<std::size_t>(s.size());

    double total = 0.0;
    for (std::size_t k = 0; k < full; ++k) total += s[k] * s[k];

    std::size_t keep = std::min(max_rank, full);
    // Values at the rounding floor are numerically zero and never kept.
    const double floor = s.size() > 0 ? s[0] * std::numeric_limits<double>::epsilon() *
                                            static_cast<double>(std::max(m.rows(), m.cols()))
                                      : 0.0;
    while (keep > 1 && (s[keep - 1] * s[keep - 1] < cutoff * total || s[keep - 1] <= floor)) --keep;

    SvdTriple out;
    out.report.singular_values.assign(s.data(), s.data() + full);
    out.report.kept_rank = keep;
    for (std::size_t k = keep; k < full; ++k) out.report.discarded_weight += s[k] * s[k];
    out.singular.assign(s.data(), s.data() + keep);

    const auto k = static_cast<Eigen::Index>(keep);
    RowMatrix u = svd.matrixU().leftCols(k);
    RowMatrix vh = svd.matrixV().leftCols(k).adjoint();
    out.u = from_matrix(u, legs.row, {Leg{bond_label, keep}});
    out.vh = from_matrix(vh, {Leg{bond_label, keep}}, legs.col);
    return out;
}

SvdSplit svd_split(const DenseTensor& t, const std::vector<std::string>& left_labels,
                   std::size_t max_rank, double cutoff, const std::string& bond_label) {
    auto tri = svd_decompose(t, left_labels, max_rank, cutoff, bond_label);
    const std::size_t keep = tri.singular.size();
    const std::size_t rows = tri.u.size() / keep;
    cplx* u = tri.u.raw();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < keep; ++k) u[r * keep + k] *= tri.singular[k];
    return {std::move(tri.u), std::move(tri.vh), std::move(tri.report)};
}

QrSplit qr_isometrize(const DenseTensor& t, const std::vector<std::string>& kept_labels,
                      const std::string& bond_label) {
    const auto legs = split_legs(t, kept_labels);
    const RowMatrix m = to_matrix(t, kept_labels);
    const Eigen::Index rows = m.rows(), cols = m.cols();
    const Eigen::Index k = std::min(rows, cols);

    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, k);
    Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < k; ++i) {
        const cplx d = r(i, i);
        const double a = std::abs(d);
        if (a > 0.0) {
            const cplx phase = d / a;
            r.row(i) *= std::conj(phase);
            q.col(i) *= phase;
        }
    }
    const auto kk = static_cast<std::size_t>(k);
    return {from_matrix(q, legs.row, {Leg{bond_label, kk}}),
            from_matrix(r, {Leg{bond_label, kk}}, legs.col)};
}

DenseTensor pad_with_noise(const DenseTensor& t, std::string_view leg, std::size_t new_dim,
                           double amplitude, std::uint64_t seed) {
    const auto axis = t.axis_of(leg);
    const std::size_t old_dim = t.dim(axis);
    if (new_dim < old_dim) throw std::invalid_argument("pad_with_noise: new_dim smaller than current");
    if (amplitude < 0.0) throw std::invalid_argument("pad_with_noise: negative amplitude");

    std::vector<Leg> legs = t.legs();
    legs[axis].dim = new_dim;
    DenseTensor out(legs);

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= t.dim(i);
    for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.dim(i);

    Rng rng(seed);
    const cplx* src = t.raw();
    cplx* dst = out.raw();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t d = 0; d < new_dim; ++d)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t di = (o * new_dim + d) * inner + i;
                if (d < old_dim) {
                    dst[di] = src[(o * old_dim + d) * inner + i];
                } else {
                    const double mag = amplitude * rng.uniform();
                    const double phi = 2.0 * M_PI * rng.uniform();
                    dst[di] = std::polar(mag, phi);
                }
            }
    return out;
}

}  // namespace ttnq
