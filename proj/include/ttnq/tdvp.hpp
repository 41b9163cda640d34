#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttnq/environment.hpp"
#include "ttnq/krylov.hpp"
#include "ttnq/model.hpp"
#include "ttnq/ttn.hpp"

namespace ttnq {

enum class TdvpMode { tdvp1, tdvp2, hybrid };
std::string to_string(TdvpMode m);
TdvpMode tdvp_mode_from_string(const std::string& s);

struct CorrelationRequest {
    Coord anchor;
    CutDirection direction = CutDirection::row;
};

struct ObservableSelection {
    bool magnetization = true;
    bool energy = true;
    bool norm = true;
    std::vector<std::vector<Coord>> entropy_sites;  // each entry: 1 or 2 sites
    std::vector<std::size_t> entropy_links;         // tree edges (child node ids)
    std::vector<CorrelationRequest> correlations;
};

struct QuenchConfig {
    IsingParams params;
    double dt = 0.005;
    double t_max = 0.0;
    std::size_t chi = 16;
    TdvpMode mode = TdvpMode::tdvp1;
    int hybrid_n = 10;
    double truncation_cutoff = 0.0;
    double krylov_tol = 1e-12;
    std::size_t krylov_max_dim = 30;
    double noise = 1e-16;
    std::uint64_t seed = 0;
    std::size_t measure_every = 1;
    ObservableSelection observables;

    void validate() const;
    /// Number of steps, t_max / dt rounded to the nearest integer.
    std::size_t steps() const;
};

struct Sample {
    double t = 0.0;
    std::vector<double> magnetization;  // lattice order
    double energy = 0.0;
    double norm = 1.0;
    std::vector<EntropyResult> entropies;  // entropy_sites first, then entropy_links
    std::vector<CorrelationCut> correlations;
    std::size_t max_bond = 1;
    double mean_bond = 1.0;
    double discarded_weight = 0.0;  // accumulated since the previous sample
    double renormalization = 1.0;   // norm before the latest TDVP2 renormalization, 1 if none since the previous sample
};

struct TimeSeries {
    std::string engine = "ttn";
    std::vector<Sample> samples;
    std::optional<std::string> error;

    std::vector<double> times() const;
    /// <sz(t)> of one site (lattice index) across all samples.
    std::vector<double> site_series(std::size_t lattice_index) const;
};

struct StepInfo {
    TruncationReport truncation;
    double norm_before_renormalization = 1.0;
    std::size_t krylov_dim = 0;  // largest Krylov space used in the step
};

/// Holds the environment caches of a state between steps. The state's center
/// is moved to the root on construction and is back at the root after every step.
class TdvpEngine {
public:
    TdvpEngine(TreeState& state, const std::vector<PauliTerm>& terms, KrylovOptions opts = {});

    /// Second-order single-tensor sweep; bond dimensions are left unchanged.
    StepInfo step_tdvp1(double dt);
    /// Second-order two-tensor sweep with truncation to chi and cutoff, followed
    /// by renormalization of the state.
    StepInfo step_tdvp2(double dt, std::size_t chi, double cutoff);

    double energy() const;
    const TreeState& state() const { return state_; }

private:
    enum class OpKind { gauge, link_backward, node_forward, node_backward, pair_forward };
    struct SweepOp {
        OpKind kind;
        std::size_t a = 0;
        std::size_t b = 0;
        std::size_t to = 0;
        double frac = 0.5;  // fraction of dt
    };

    std::vector<SweepOp> build_sweep(bool two_site) const;
    void add_tdvp1(std::size_t n, std::vector<SweepOp>& ops) const;
    void add_tdvp2(std::size_t n, std::vector<SweepOp>& ops) const;

    void move(std::size_t a, std::size_t b, std::optional<double> link_tau);
    void evolve_node(std::size_t n, cplx coefficient);
    void pair_forward(std::size_t n, std::size_t p, std::size_t to, double tau, std::size_t chi, double cutoff,
                      TruncationReport& report);
    void evolve(DenseTensor& t, std::vector<const LegEnvironment*> envs, cplx coefficient);
    std::vector<const LegEnvironment*> envs_of(std::size_t n) const;
    void refresh_environment(std::size_t from, std::size_t to);

    TreeState& state_;
    CompiledHamiltonian ham_;
    KrylovOptions opts_;
    std::vector<std::array<LegEnvironment, 3>> env_;
    std::vector<SweepOp> sweep1_, sweep2_;
    std::vector<std::size_t> bond_caps_;
    std::size_t caps_chi_ = 0;
    std::size_t krylov_dim_ = 0;
};

/// One TDVP1 step with freshly built environments.
StepInfo step_tdvp1(TreeState& state, const std::vector<PauliTerm>& terms, double dt, double krylov_tol);
StepInfo step_tdvp2(TreeState& state, const std::vector<PauliTerm>& terms, double dt, std::size_t chi,
                    double cutoff, double krylov_tol);

/// Initial state for a run: TDVP1 pads the product state to chi, the other
/// modes start at bond dimension 1.
TreeState initial_state(const SpinPattern& pattern, const QuenchConfig& cfg);

Sample measure(const TreeState& state, const ObservableSelection& sel, double t, double energy);

struct RunHooks {
    std::function<void(const Sample&)> on_sample;
    /// Called every `checkpoint_seconds` of wall time (and at the end) when set.
    std::function<void(const TreeState&, double t)> on_checkpoint;
    double checkpoint_seconds = 0.0;
};

/// Quench from `initial` on `lat`. Step errors end the run early; the samples
/// gathered so far are kept and `error` is set.
TimeSeries run(const SpinPattern& initial, const Lattice& lat, const QuenchConfig& cfg, const RunHooks& hooks = {});

}  // namespace ttnq
