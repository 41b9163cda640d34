#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ttnq/lattice.hpp"
#include "ttnq/tdvp.hpp"

namespace ttnq {

enum class Window { hamming, rect };

std::string to_string(Window w);
Window window_from_string(const std::string& s);

/// w[n] = 0.54 - 0.46 cos(2 pi n / (M - 1)); all ones for rect.
std::vector<double> window_weights(Window w, std::size_t m);

struct Spectrum {
    std::vector<double> frequencies;  // omega in units of J, spacing 2 pi / (t_end - t_start)
    std::vector<double> density;      // |F(sz)|
    Window window = Window::hamming;
    double t_start = 0.0;
    double t_end = 0.0;
    bool mean_removed = true;
};

/// Spectrum of uniformly spaced samples. A cosine of amplitude A on a
/// frequency-grid point gives a rect-window peak of height A.
Spectrum spectral_density(const std::vector<double>& values, double dt, double t_start, Window window,
                          bool remove_mean = true);

/// Uses the samples with t_start <= t < t_end of one site's magnetization.
Spectrum spectral_density(const TimeSeries& series, const Lattice& lat, Coord site, double t_start, double t_end,
                          Window window = Window::hamming, bool remove_mean = true);

/// O(M^2) transform with the same conventions, for cross-checks.
Spectrum naive_spectral_density(const std::vector<double>& values, double dt, double t_start, Window window,
                                bool remove_mean = true);

struct Peak {
    double frequency = 0.0;
    double height = 0.0;
    double prominence = 0.0;
};

/// Interior local maxima whose topographic prominence is at least
/// min_prominence * max(density), sorted by descending height.
std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence = 0.05);

void write_spectrum(std::ostream& out, const Spectrum& s);
Spectrum read_spectrum(std::istream& in);
void write_peaks(std::ostream& out, const std::vector<Peak>& peaks);

struct PerturbationResult {
    int N = 0;
    double J = 1.0;
    double g = 0.0;
    double E0 = 0.0;
    double E1 = 0.0;
    double E2 = 0.0;
    double delta01 = 0.0;
    double delta12 = 0.0;
    double delta02 = 0.0;
};

/// Second-order energies of the polarized, single-flip and neighbour-pair states on an N x N torus.
PerturbationResult perturbative_energies(int N, double J, double g);

enum class ExcitationClass { psi0, psi1, psi2_neighbor, psi2_disconnected, psi3_connected, psi3_disconnected };

std::string to_string(ExcitationClass c);
ExcitationClass excitation_class_from_string(const std::string& s);
const std::vector<ExcitationClass>& all_excitation_classes();

/// Number of configurations in the class on an N x N torus (N >= 4).
std::int64_t excitation_count(ExcitationClass c, int N);

/// Domain-wall length of a representative configuration.
int domain_walls(ExcitationClass c);

/// Classical energy above the polarized state, 2J per domain wall.
double classical_offset(ExcitationClass c, double J);

struct Contribution {
    ExcitationClass via;
    std::int64_t count = 0;
    double matrix_element_sq = 0.0;  // |<k|V|n>|^2 for one intermediate state
    double denominator = 0.0;        // E_k - E_n at g = 0 (intermediate minus state)
    double value = 0.0;              // count * |V|^2 / denominator; the shift is minus the sum
};

struct CorrectionBreakdown {
    ExcitationClass state;
    double first_order = 0.0;
    std::vector<Contribution> terms;
    double total() const;
};

struct SecondOrderCorrections {
    CorrectionBreakdown e0, e1, e2;
};

SecondOrderCorrections second_order_corrections(int N, double J, double g);

/// E(k) = 4J(1 + g cos k).
double edge_mode(double J, double g, double k);
/// (4J - 4g, 4J + 4g).
std::pair<double, double> edge_envelope(double J, double g);

struct FrontPassage {
    int distance = 0;
    double time = 0.0;
};

/// Earliest time at which |C(anchor, site)| reaches `threshold` for each
/// distance along the cut, up to half the ring length on periodic directions.
/// Distances never reached are omitted.
std::vector<FrontPassage> front_passages(const TimeSeries& series, const Lattice& lat, Coord anchor,
                                         CutDirection direction, double threshold);

/// Least-squares slope of first-passage distance against time. Throws when
/// fewer than two distances are crossed.
double front_velocity_fit(const TimeSeries& series, const Lattice& lat, Coord anchor, CutDirection direction,
                          double threshold);

/// Largest distance crossed at or before time t (0 when none).
int front_distance(const TimeSeries& series, const Lattice& lat, Coord anchor, CutDirection direction,
                   double threshold, double t);

}  // namespace ttnq
