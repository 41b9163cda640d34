#include "ttnq/environment.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "leg_ops.hpp"

namespace ttnq {

const Matrix& pauli(Axis a) {
    static const Matrix x = (Matrix(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
    static const Matrix y = (Matrix(2, 2) << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0).finished();
    static const Matrix z = (Matrix(2, 2) << 1.0, 0.0, 0.0, -1.0).finished();
    switch (a) {
        case Axis::x: return x;
        case Axis::y: return y;
        case Axis::z: return z;
    }
    return z;
}

CompiledHamiltonian::CompiledHamiltonian(const std::vector<PauliTerm>& terms, std::size_t sites)
    : site_count(sites), onsite(sites, Matrix::Zero(2, 2)), couplings_of_site(sites) {
    validate_terms(terms, sites);
    for (const auto& term : terms) {
        if (term.factors.size() == 1) {
            onsite[term.factors[0].site] += term.coefficient * pauli(term.factors[0].axis);
        } else {
            Coupling c{term.factors[0].site, term.factors[0].axis, term.factors[1].site, term.factors[1].axis,
                       term.coefficient};
            couplings_of_site[c.s].push_back(couplings.size());
            couplings_of_site[c.t].push_back(couplings.size());
            couplings.push_back(c);
        }
    }
}

const Matrix* LegEnvironment::find(std::size_t site, Axis axis) const {
    for (const auto& o : open)
        if (o.site == site && o.axis == axis) return &o.m;
    return nullptr;
}

LegEnvironment trivial_environment(std::size_t site_count) {
    LegEnvironment e;
    e.h = Matrix::Zero(1, 1);
    e.contains.assign(site_count, false);
    return e;
}

LegEnvironment physical_environment(const CompiledHamiltonian& h, std::size_t site) {
    if (site >= h.site_count) return trivial_environment(h.site_count);
    LegEnvironment e;
    e.h = h.onsite[site];
    e.contains.assign(h.site_count, false);
    e.contains[site] = true;
    e.site_total = 1;
    std::set<Axis> axes;
    for (auto ci : h.couplings_of_site[site]) {
        const auto& c = h.couplings[ci];
        axes.insert(c.s == site ? c.a : c.b);
    }
    for (Axis a : axes) e.open.push_back({site, a, pauli(a)});
    return e;
}

namespace {

// Groups the cross couplings between pairs of legs into sum_i (A_i on one leg)(W_i on the other),
// keyed on whichever side has fewer distinct open operators.
struct CrossTerm {
    std::size_t leg_a;
    const Matrix* a;
    std::size_t leg_b;
    Matrix w;
};

std::vector<CrossTerm> group_cross_terms(const CompiledHamiltonian& ham,
                                         const std::vector<const LegEnvironment*>& envs) {
    std::vector<int> leg_of(ham.site_count, -1);
    for (std::size_t l = 0; l < envs.size(); ++l) {
        if (!envs[l]) continue;
        for (std::size_t s = 0; s < ham.site_count; ++s)
            if (envs[l]->contains[s]) leg_of[s] = static_cast<int>(l);
    }

    struct Oriented {
        std::size_t s;
        Axis a;
        std::size_t t;
        Axis b;
        double c;
    };
    std::map<std::pair<std::size_t, std::size_t>, std::vector<Oriented>> by_pair;
    for (const auto& c : ham.couplings) {
        const int ls = leg_of[c.s], lt = leg_of[c.t];
        if (ls < 0 || lt < 0 || ls == lt) continue;
        if (ls < lt) by_pair[{ls, lt}].push_back({c.s, c.a, c.t, c.b, c.c});
        else by_pair[{lt, ls}].push_back({c.t, c.b, c.s, c.a, c.c});
    }

    std::vector<CrossTerm> out;
    for (auto& [legs, list] : by_pair) {
        std::set<std::pair<std::size_t, Axis>> first, second;
        for (const auto& o : list) {
            first.insert({o.s, o.a});
            second.insert({o.t, o.b});
        }
        const bool key_first = first.size() <= second.size();
        const std::size_t la = key_first ? legs.first : legs.second;
        const std::size_t lb = key_first ? legs.second : legs.first;
        std::map<std::pair<std::size_t, Axis>, std::size_t> slot;
        for (const auto& o : list) {
            const auto key = key_first ? std::make_pair(o.s, o.a) : std::make_pair(o.t, o.b);
            const auto other = key_first ? std::make_pair(o.t, o.b) : std::make_pair(o.s, o.a);
            const Matrix* a = envs[la]->find(key.first, key.second);
            const Matrix* b = envs[lb]->find(other.first, other.second);
            if (!a || !b) throw std::logic_error("environment is missing an open operator");
            auto it = slot.find(key);
            if (it == slot.end()) {
                it = slot.emplace(key, out.size()).first;
                out.push_back({la, a, lb, Matrix::Zero(b->rows(), b->cols())});
            }
            out[it->second].w += o.c * *b;
        }
    }
    return out;
}

}  // namespace

EffectiveOperator::EffectiveOperator(const CompiledHamiltonian& ham, std::vector<const LegEnvironment*> envs,
                                     std::vector<std::size_t> dims)
    : dims_(std::move(dims)), size_(detail::product(dims_)) {
    if (envs.size() != dims_.size()) throw std::invalid_argument("one environment per leg required");
    for (std::size_t l = 0; l < envs.size(); ++l) {
        if (!envs[l]) continue;
        if (envs[l]->dim() != dims_[l]) throw std::invalid_argument("environment does not match leg dimension");
        if (envs[l]->site_total > 0 && envs[l]->h.norm() > 0.0) local_.emplace_back(l, &envs[l]->h);
    }
    for (auto& c : group_cross_terms(ham, envs)) cross_.push_back({c.leg_a, c.a, c.leg_b, std::move(c.w)});
    scratch_.resize(size_);
}

void EffectiveOperator::apply(const cplx* in, cplx* out) const {
    std::fill(out, out + size_, cplx{});
    for (const auto& [leg, h] : local_) detail::leg_apply(in, dims_, leg, *h, out, true);
    for (const auto& c : cross_) {
        detail::leg_apply(in, dims_, c.leg_a, *c.a, scratch_.data(), false);
        detail::leg_apply(scratch_.data(), dims_, c.leg_b, c.w, out, true);
    }
}

LinearMap EffectiveOperator::as_map() const {
    return [this](std::span<const cplx> in, std::span<cplx> out) { apply(in.data(), out.data()); };
}

double EffectiveOperator::expectation(const DenseTensor& t) const {
    std::vector<cplx> ht(size_);
    apply(t.raw(), ht.data());
    const auto n = static_cast<Eigen::Index>(size_);
    Eigen::Map<const Vector> v(t.raw(), n), hv(ht.data(), n);
    return v.dot(hv).real() / v.squaredNorm();
}

LegEnvironment environment_through(const CompiledHamiltonian& ham, const DenseTensor& t, std::size_t out_leg,
                                   std::span<const LegEnvironment* const> envs) {
    const auto dims = t.dims();
    if (envs.size() != dims.size()) throw std::invalid_argument("one environment per leg required");
    std::vector<const LegEnvironment*> inner(envs.begin(), envs.end());
    inner[out_leg] = nullptr;

    LegEnvironment e;
    e.contains.assign(ham.site_count, false);
    for (const auto* env : inner) {
        if (!env) continue;
        for (std::size_t s = 0; s < ham.site_count; ++s)
            if (env->contains[s]) e.contains[s] = true;
    }
    e.site_total = static_cast<std::size_t>(std::count(e.contains.begin(), e.contains.end(), true));

    EffectiveOperator op(ham, inner, dims);
    std::vector<cplx> x(op.size());
    op.apply(t.raw(), x.data());
    e.h = detail::leg_gram(t.raw(), x.data(), dims, out_leg);

    for (std::size_t l = 0; l < inner.size(); ++l) {
        if (!inner[l]) continue;
        for (const auto& o : inner[l]->open) {
            bool outside = false;
            for (auto ci : ham.couplings_of_site[o.site]) {
                const auto& c = ham.couplings[ci];
                const bool mine = (c.s == o.site && c.a == o.axis) || (c.t == o.site && c.b == o.axis);
                const std::size_t partner = c.s == o.site ? c.t : c.s;
                if (mine && !e.contains[partner]) {
                    outside = true;
                    break;
                }
            }
            if (!outside) continue;
            detail::leg_apply(t.raw(), dims, l, o.m, x.data(), false);
            e.open.push_back({o.site, o.axis, detail::leg_gram(t.raw(), x.data(), dims, out_leg)});
        }
    }
    return e;
}

}  // namespace ttnq
