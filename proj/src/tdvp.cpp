#include "ttnq/tdvp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "leg_ops.hpp"

namespace ttnq {

std::string to_string(TdvpMode m) {
    switch (m) {
        case TdvpMode::tdvp1: return "tdvp1";
        case TdvpMode::tdvp2: return "tdvp2";
        case TdvpMode::hybrid: return "hybrid";
    }
    return "tdvp1";
}

TdvpMode tdvp_mode_from_string(const std::string& s) {
    if (s == "tdvp1") return TdvpMode::tdvp1;
    if (s == "tdvp2") return TdvpMode::tdvp2;
    if (s == "hybrid") return TdvpMode::hybrid;
    throw std::invalid_argument("unknown mode '" + s + "' (expected tdvp1|tdvp2|hybrid)");
}

void QuenchConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(t_max >= 0.0)) throw std::invalid_argument("t_max must be non-negative");
    if (chi < 1) throw std::invalid_argument("chi must be positive");
    if (hybrid_n < 1) throw std::invalid_argument("hybrid n must be at least 1");
    if (truncation_cutoff < 0.0) throw std::invalid_argument("truncation_cutoff must be non-negative");
    if (!(krylov_tol > 0.0)) throw std::invalid_argument("krylov_tol must be positive");
    if (krylov_max_dim < 2) throw std::invalid_argument("krylov_max_dim must be at least 2");
    if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
    if (measure_every < 1) throw std::invalid_argument("measure_every must be positive");
    const double ratio = t_max / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio))
        throw std::invalid_argument("t_max must be an integer multiple of dt");
}

std::size_t QuenchConfig::steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

std::vector<double> TimeSeries::times() const {
    std::vector<double> t;
    for (const auto& s : samples) t.push_back(s.t);
    return t;
}

std::vector<double> TimeSeries::site_series(std::size_t lattice_index) const {
    std::vector<double> v;
    for (const auto& s : samples) v.push_back(s.magnetization.at(lattice_index));
    return v;
}

TdvpEngine::TdvpEngine(TreeState& state, const std::vector<PauliTerm>& terms, KrylovOptions opts)
    : state_(state), ham_(terms, state.site_count()), opts_(opts) {
    move_center(state_, 0);
    const auto& topo = state_.topology();
    const std::size_t nodes = topo.node_count();
    const LegEnvironment none = trivial_environment(ham_.site_count);
    env_.assign(nodes, {none, none, none});
    for (std::size_t n = topo.bottom_offset(); n < nodes; ++n)
        for (std::size_t i = 0; i < 2; ++i) env_[n][i] = physical_environment(ham_, topo.slot(n, i));
    for (std::size_t n = nodes; n-- > 1;)
        if (topo.active(n)) refresh_environment(n, TreeTopology::parent(n));
    sweep1_ = build_sweep(false);
    sweep2_ = build_sweep(true);
}

std::vector<const LegEnvironment*> TdvpEngine::envs_of(std::size_t n) const {
    return {&env_[n][0], &env_[n][1], &env_[n][2]};
}

void TdvpEngine::refresh_environment(std::size_t from, std::size_t to) {
    const auto& topo = state_.topology();
    const auto envs = envs_of(from);
    env_[to][topo.leg_toward(to, from)] =
        environment_through(ham_, state_.tensor(from), topo.leg_toward(from, to), envs);
}

void TdvpEngine::add_tdvp1(std::size_t n, std::vector<SweepOp>& ops) const {
    const auto& topo = state_.topology();
    if (!topo.is_bottom(n))
        for (std::size_t i = 0; i < 2; ++i) {
            const std::size_t c = TreeTopology::child(n, i);
            if (!topo.active(c)) continue;
            ops.push_back({OpKind::gauge, n, c});
            add_tdvp1(c, ops);
        }
    ops.push_back({OpKind::node_forward, n, n});
    if (n != 0) ops.push_back({OpKind::link_backward, n, TreeTopology::parent(n)});
}

void TdvpEngine::add_tdvp2(std::size_t n, std::vector<SweepOp>& ops) const {
    const auto& topo = state_.topology();
    if (!topo.is_bottom(n))
        for (std::size_t i = 0; i < 2; ++i) {
            const std::size_t c = TreeTopology::child(n, i);
            if (!topo.active(c)) continue;
            ops.push_back({OpKind::gauge, n, c});
            add_tdvp2(c, ops);
        }
    if (n != 0) {
        const std::size_t p = TreeTopology::parent(n);
        ops.push_back({OpKind::pair_forward, n, p, p});
        ops.push_back({OpKind::node_backward, p, p});
    }
}

// The first half-sweep is a depth-first tour from the root with every
// evolution over dt/2; the second half is its mirror image with each
// operation replaced by its adjoint. The two middle operations act on the
// same tensor(s) and are merged into one evolution over dt.
std::vector<TdvpEngine::SweepOp> TdvpEngine::build_sweep(bool two_site) const {
    std::vector<SweepOp> first;
    if (two_site) {
        add_tdvp2(0, first);
        if (first.empty()) return {{OpKind::node_forward, 0, 0, 0, 1.0}};
        first.pop_back();  // no backward step after the final pair
    } else {
        add_tdvp1(0, first);
    }
    std::vector<SweepOp> second;
    for (auto it = first.rbegin(); it != first.rend(); ++it) {
        SweepOp op = *it;
        switch (op.kind) {
            case OpKind::gauge:
            case OpKind::link_backward: std::swap(op.a, op.b); break;
            case OpKind::pair_forward: op.to = op.a; break;
            default: break;
        }
        second.push_back(op);
    }
    std::vector<SweepOp> ops(first.begin(), first.end() - 1);
    SweepOp middle = second.front();
    middle.frac = 1.0;
    ops.push_back(middle);
    ops.insert(ops.end(), second.begin() + 1, second.end());
    return ops;
}

void TdvpEngine::evolve(DenseTensor& t, std::vector<const LegEnvironment*> envs, cplx coefficient) {
    EffectiveOperator op(ham_, std::move(envs), t.dims());
    KrylovStats stats;
    t = krylov_expm_apply(op.as_map(), t, coefficient, opts_, &stats);
    krylov_dim_ = std::max(krylov_dim_, stats.dim);
}

void TdvpEngine::move(std::size_t a, std::size_t b, std::optional<double> link_tau) {
    const auto& topo = state_.topology();
    const std::size_t ka = topo.leg_toward(a, b), kb = topo.leg_toward(b, a);
    auto qr = detail::leg_qr(state_.tensor(a), ka);
    state_.tensor(a) = std::move(qr.q);
    refresh_environment(a, b);
    Matrix r = std::move(qr.r);
    if (link_tau) {
        DenseTensor link({{"l", static_cast<std::size_t>(r.rows())}, {"r", static_cast<std::size_t>(r.cols())}});
        detail::RowMap(link.raw(), r.rows(), r.cols()) = r;
        evolve(link, {&env_[b][kb], &env_[a][ka]}, cplx(0.0, *link_tau));
        r = detail::ConstRowMap(link.raw(), r.rows(), r.cols());
    }
    state_.tensor(b) = detail::leg_apply(state_.tensor(b), kb, r);
    state_.set_center(b);
}

void TdvpEngine::evolve_node(std::size_t n, cplx coefficient) {
    evolve(state_.tensor(n), envs_of(n), coefficient);
}

void TdvpEngine::pair_forward(std::size_t n, std::size_t p, std::size_t to, double tau, std::size_t chi,
                              double cutoff, TruncationReport& report) {
    const std::size_t w = TreeTopology::which_child(n), sib = 1 - w;
    const DenseTensor& tn = state_.tensor(n);
    const DenseTensor& tp = state_.tensor(p);
    const std::size_t n0 = tn.dim(0), n1 = tn.dim(1), d = tn.dim(2);
    const std::size_t ds = tp.dim(sib), dpp = tp.dim(2);

    DenseTensor theta({{"n0", n0}, {"n1", n1}, {"s", ds}, {"pp", dpp}});
    {
        detail::ConstRowMap nm(tn.raw(), static_cast<Eigen::Index>(n0 * n1), static_cast<Eigen::Index>(d));
        const RowMatrix pu = detail::unfold(tp, w);  // (s, pp) x d
        detail::RowMap(theta.raw(), static_cast<Eigen::Index>(n0 * n1), static_cast<Eigen::Index>(ds * dpp)) =
            nm * pu.transpose();
    }
    evolve(theta, {&env_[n][0], &env_[n][1], &env_[p][sib], &env_[p][2]}, cplx(0.0, -tau));

    auto svd = svd_decompose(theta, {"n0", "n1"}, chi, cutoff, "b");
    report.merge(svd.report);
    const std::size_t kept = svd.singular.size();
    const std::size_t rows = n0 * n1, cols = ds * dpp;
    RowMatrix u = detail::ConstRowMap(svd.u.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kept));
    RowMatrix vh = detail::ConstRowMap(svd.vh.raw(), static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(cols));

    // Internal nodes carry no physical leg, so the pair tensor of a product
    // state has rank one on every link and a plain split could never grow the
    // bond. The isometric factor is completed with extra orthonormal
    // directions of zero weight (at most doubling the link per split); the
    // following evolution steps populate them. With a positive cutoff the
    // growth follows the retained rank, so weakly entangled links stay small.
    const std::size_t base = cutoff > 0.0 ? kept : tn.dim(2);
    const std::size_t cap = std::min({bond_caps_.at(n), to == p ? rows : cols, std::max(kept, 2 * base)});
    std::size_t r = kept;
    if (cap > kept) {
        if (to == p) {
            u = detail::complete_columns(u, cap);
            r = static_cast<std::size_t>(u.cols());
        } else {
            vh = detail::complete_columns(RowMatrix(vh.adjoint()), cap).adjoint();
            r = static_cast<std::size_t>(vh.rows());
        }
    }
    if (to == p) {
        RowMatrix sv = RowMatrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols));
        for (std::size_t k = 0; k < kept; ++k) sv.row(static_cast<Eigen::Index>(k)) = svd.singular[k] * vh.row(static_cast<Eigen::Index>(k));
        vh = std::move(sv);
    } else {
        RowMatrix us = RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(r));
        for (std::size_t k = 0; k < kept; ++k) us.col(static_cast<Eigen::Index>(k)) = svd.singular[k] * u.col(static_cast<Eigen::Index>(k));
        u = std::move(us);
    }
    const std::string own = w == 0 ? "c0" : "c1", other = w == 0 ? "c1" : "c0";
    DenseTensor new_n({{"c0", n0}, {"c1", n1}, {"p", r}});
    detail::RowMap(new_n.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(r)) = u;
    DenseTensor new_p({{own, r}, {other, ds}, {"p", dpp}});
    detail::RowMap(new_p.raw(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols)) = vh;
    state_.tensor(n) = std::move(new_n);
    state_.tensor(p) = new_p.permuted(std::vector<std::string>{"c0", "c1", "p"});

    if (to == p) {
        refresh_environment(n, p);
        state_.set_center(p);
    } else {
        refresh_environment(p, n);
        state_.set_center(n);
    }
}

StepInfo TdvpEngine::step_tdvp1(double dt) {
    krylov_dim_ = 0;
    for (const auto& op : sweep1_) {
        const double tau = op.frac * dt;
        switch (op.kind) {
            case OpKind::gauge: move(op.a, op.b, std::nullopt); break;
            case OpKind::link_backward: move(op.a, op.b, tau); break;
            case OpKind::node_forward: evolve_node(op.a, cplx(0.0, -tau)); break;
            case OpKind::node_backward: evolve_node(op.a, cplx(0.0, tau)); break;
            case OpKind::pair_forward: throw std::logic_error("pair step in a single-tensor sweep");
        }
    }
    StepInfo info;
    info.norm_before_renormalization = state_.norm();
    info.krylov_dim = krylov_dim_;
    return info;
}

StepInfo TdvpEngine::step_tdvp2(double dt, std::size_t chi, double cutoff) {
    if (chi < 1) throw std::invalid_argument("chi must be positive");
    if (caps_chi_ != chi) {
        bond_caps_ = bond_dimensions(state_.topology(), chi);
        caps_chi_ = chi;
    }
    krylov_dim_ = 0;
    StepInfo info;
    for (const auto& op : sweep2_) {
        const double tau = op.frac * dt;
        switch (op.kind) {
            case OpKind::gauge: move(op.a, op.b, std::nullopt); break;
            case OpKind::node_forward: evolve_node(op.a, cplx(0.0, -tau)); break;
            case OpKind::node_backward: evolve_node(op.a, cplx(0.0, tau)); break;
            case OpKind::pair_forward: pair_forward(op.a, op.b, op.to, tau, chi, cutoff, info.truncation); break;
            case OpKind::link_backward: throw std::logic_error("link step in a two-tensor sweep");
        }
    }
    info.norm_before_renormalization = state_.norm();
    state_.normalize();
    info.krylov_dim = krylov_dim_;
    return info;
}

double TdvpEngine::energy() const {
    if (state_.center() != 0) throw std::logic_error("energy requires the center at the root");
    EffectiveOperator op(ham_, envs_of(0), state_.tensor(0).dims());
    return op.expectation(state_.tensor(0));
}

StepInfo step_tdvp1(TreeState& state, const std::vector<PauliTerm>& terms, double dt, double krylov_tol) {
    KrylovOptions opts;
    opts.tol = krylov_tol;
    TdvpEngine engine(state, terms, opts);
    return engine.step_tdvp1(dt);
}

StepInfo step_tdvp2(TreeState& state, const std::vector<PauliTerm>& terms, double dt, std::size_t chi,
                    double cutoff, double krylov_tol) {
    KrylovOptions opts;
    opts.tol = krylov_tol;
    TdvpEngine engine(state, terms, opts);
    state.set_max_chi(chi);
    return engine.step_tdvp2(dt, chi, cutoff);
}

TreeState initial_state(const SpinPattern& pattern, const QuenchConfig& cfg) {
    const auto mapping = build_mapping(pattern.lattice);
    if (cfg.mode == TdvpMode::tdvp1) return from_product(pattern, mapping, cfg.chi, cfg.noise, cfg.seed);
    TreeState s = from_product(pattern, mapping, 1, 0.0, cfg.seed);
    s.set_max_chi(cfg.chi);
    return s;
}

Sample measure(const TreeState& state, const ObservableSelection& sel, double t, double energy) {
    Sample s;
    s.t = t;
    s.energy = energy;
    s.norm = state.norm();
    s.max_bond = state.max_bond();
    s.mean_bond = state.mean_bond();
    const Observer obs(state);
    if (sel.magnetization) s.magnetization = obs.magnetization();
    for (const auto& sites : sel.entropy_sites) s.entropies.push_back(obs.subsystem_entropy(sites));
    for (auto link : sel.entropy_links) s.entropies.push_back(link_entropy(obs.state(), link));
    for (const auto& c : sel.correlations) s.correlations.push_back(obs.correlation_cut(c.anchor, c.direction));
    return s;
}

TimeSeries run(const SpinPattern& initial, const Lattice& lat, const QuenchConfig& cfg, const RunHooks& hooks) {
    cfg.validate();
    if (initial.lattice.rows != lat.rows || initial.lattice.cols != lat.cols ||
        initial.lattice.boundary_rows != lat.boundary_rows || initial.lattice.boundary_cols != lat.boundary_cols)
        throw std::invalid_argument("pattern lattice does not match the run lattice");
    TimeSeries series;
    series.engine = "ttn";
    TreeState state = initial_state(initial, cfg);
    const auto mapping = state.mapping();
    const auto terms = build_hamiltonian(lat, cfg.params, mapping);
    KrylovOptions opts;
    opts.tol = cfg.krylov_tol;
    opts.max_dim = cfg.krylov_max_dim;

    using clock = std::chrono::steady_clock;
    auto last_checkpoint = clock::now();
    double discarded = 0.0;
    double rescale = 1.0;
    double t = 0.0;
    try {
        TdvpEngine engine(state, terms, opts);
        const std::size_t steps = cfg.steps();
        for (std::size_t k = 0;; ++k) {
            t = static_cast<double>(k) * cfg.dt;
            if (k % cfg.measure_every == 0) {
                Sample s = measure(state, cfg.observables, t, engine.energy());
                s.discarded_weight = discarded;
                s.renormalization = rescale;
                discarded = 0.0;
                rescale = 1.0;
                if (hooks.on_sample) hooks.on_sample(s);
                series.samples.push_back(std::move(s));
            }
            if (hooks.on_checkpoint && hooks.checkpoint_seconds > 0.0 &&
                std::chrono::duration<double>(clock::now() - last_checkpoint).count() >= hooks.checkpoint_seconds) {
                hooks.on_checkpoint(state, t);
                last_checkpoint = clock::now();
            }
            if (k == steps) break;
            const bool two_site = cfg.mode == TdvpMode::tdvp2 ||
                                  (cfg.mode == TdvpMode::hybrid && k % static_cast<std::size_t>(cfg.hybrid_n) == 0);
            const StepInfo info =
                two_site ? engine.step_tdvp2(cfg.dt, cfg.chi, cfg.truncation_cutoff) : engine.step_tdvp1(cfg.dt);
            if (!std::isfinite(info.norm_before_renormalization))
                throw std::runtime_error("state became non-finite during the step from t=" + std::to_string(t));
            discarded += info.truncation.discarded_weight;
            if (two_site) rescale = info.norm_before_renormalization;
        }
    } catch (const std::exception& e) {
        series.error = e.what();
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(state, t);
    return series;
}

}  // namespace ttnq
