#include "ttnq/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ttnq {

std::string to_string(Window w) { return w == Window::hamming ? "hamming" : "rect"; }

Window window_from_string(const std::string& s) {
    if (s == "hamming") return Window::hamming;
    if (s == "rect") return Window::rect;
    throw std::invalid_argument("unknown window '" + s + "' (expected hamming or rect)");
}

std::vector<double> window_weights(Window w, std::size_t m) {
    std::vector<double> out(m, 1.0);
    if (w == Window::hamming && m > 1)
        for (std::size_t n = 0; n < m; ++n)
            out[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(m - 1));
    return out;
}

namespace {

struct Prepared {
    std::vector<double> x;
    double weight_sum = 0.0;
};

Prepared prepare(const std::vector<double>& values, Window window, bool remove_mean) {
    if (values.size() < 8) throw std::invalid_argument("spectral density needs at least 8 samples");
    const auto w = window_weights(window, values.size());
    Prepared p;
    for (double v : w) p.weight_sum += v;
    double mean = 0.0;
    if (remove_mean) {
        for (std::size_t n = 0; n < values.size(); ++n) mean += w[n] * values[n];
        mean /= p.weight_sum;
    }
    p.x.resize(values.size());
    for (std::size_t n = 0; n < values.size(); ++n) p.x[n] = (values[n] - mean) * w[n];
    return p;
}

Spectrum skeleton(std::size_t m, double dt, double t_start, Window window, bool remove_mean) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample spacing must be positive");
    Spectrum s;
    s.window = window;
    s.t_start = t_start;
    s.t_end = t_start + static_cast<double>(m) * dt;
    s.mean_removed = remove_mean;
    const double step = 2.0 * std::numbers::pi / (static_cast<double>(m) * dt);
    for (std::size_t k = 0; k <= m / 2; ++k) s.frequencies.push_back(step * static_cast<double>(k));
    return s;
}

}  // namespace

Spectrum spectral_density(const std::vector<double>& values, double dt, double t_start, Window window,
                          bool remove_mean) {
    const Prepared p = prepare(values, window, remove_mean);
    const std::size_t m = values.size();
    Spectrum s = skeleton(m, dt, t_start, window, remove_mean);
    std::vector<double> in = p.x;
    std::vector<std::complex<double>> out(m / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    if (!plan) throw std::runtime_error("FFTW plan creation failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    const double scale = 2.0 / p.weight_sum;
    for (const auto& c : out) s.density.push_back(scale * std::abs(c));
    return s;
}

Spectrum naive_spectral_density(const std::vector<double>& values, double dt, double t_start, Window window,
                                bool remove_mean) {
    const Prepared p = prepare(values, window, remove_mean);
    const std::size_t m = values.size();
    Spectrum s = skeleton(m, dt, t_start, window, remove_mean);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t n = 0; n < m; ++n) {
            // Reduce k*n mod m first so the phase stays accurate for large m.
            const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * n) % m) / static_cast<double>(m);
            acc += p.x[n] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        s.density.push_back(2.0 / p.weight_sum * std::abs(acc));
    }
    return s;
}

Spectrum spectral_density(const TimeSeries& series, const Lattice& lat, Coord site, double t_start, double t_end,
                          Window window, bool remove_mean) {
    if (!lat.contains(site)) throw std::out_of_range("site outside lattice");
    if (series.samples.size() < 2) throw std::invalid_argument("time series too short");
    if (!(t_end > t_start)) throw std::invalid_argument("empty spectral interval");
    const auto times = series.times();
    const double dt = times[1] - times[0];
    for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * std::max(1.0, dt))
            throw std::invalid_argument("time series is not uniformly sampled");
    const double eps = 1e-9 * dt;
    if (t_start < times.front() - eps || t_end > times.back() + dt + eps)
        throw std::invalid_argument("spectral interval lies outside the time series");
    const auto z = series.site_series(lat.index(site));
    std::vector<double> values;
    double first = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] >= t_start - eps && times[k] < t_end - eps) {
            if (values.empty()) first = times[k];
            values.push_back(z[k]);
        }
    }
    return spectral_density(values, dt, first, window, remove_mean);
}

std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence) {
    const auto& d = s.density;
    std::vector<Peak> out;
    if (d.size() < 3) return out;
    const double top = *std::max_element(d.begin(), d.end());
    for (std::size_t i = 1; i + 1 < d.size(); ++i) {
        if (!(d[i] > d[i - 1] && d[i] >= d[i + 1])) continue;
        double left_min = d[i];
        for (std::size_t j = i; j-- > 0;) {
            if (d[j] > d[i]) break;
            left_min = std::min(left_min, d[j]);
        }
        double right_min = d[i];
        for (std::size_t j = i + 1; j < d.size(); ++j) {
            if (d[j] > d[i]) break;
            right_min = std::min(right_min, d[j]);
        }
        const double prominence = d[i] - std::max(left_min, right_min);
        if (prominence > 0.0 && prominence >= min_prominence * top)
            out.push_back({s.frequencies[i], d[i], prominence});
    }
    std::stable_sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.height > b.height; });
    return out;
}

void write_spectrum(std::ostream& out, const Spectrum& s) {
    out << "# window=" << to_string(s.window) << " t_start=" << std::setprecision(17) << s.t_start
        << " t_end=" << s.t_end << " mean_removed=" << (s.mean_removed ? 1 : 0) << '\n';
    out << "# omega density\n";
    for (std::size_t k = 0; k < s.frequencies.size(); ++k) out << s.frequencies[k] << ' ' << s.density[k] << '\n';
}

Spectrum read_spectrum(std::istream& in) {
    Spectrum s;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "window") s.window = window_from_string(val);
                else if (key == "t_start") s.t_start = std::stod(val);
                else if (key == "t_end") s.t_end = std::stod(val);
                else if (key == "mean_removed") s.mean_removed = val == "1";
            }
            continue;
        }
        std::istringstream ls(line);
        double f = 0.0, d = 0.0;
        if (!(ls >> f >> d)) throw std::runtime_error("malformed spectrum line: " + line);
        s.frequencies.push_back(f);
        s.density.push_back(d);
    }
    return s;
}

void write_peaks(std::ostream& out, const std::vector<Peak>& peaks) {
    out << "# omega height prominence\n" << std::setprecision(17);
    for (const auto& p : peaks) out << p.frequency << ' ' << p.height << ' ' << p.prominence << '\n';
}

namespace {

void check_size(int N) {
    if (N < 4) throw std::invalid_argument("perturbative counting needs N >= 4 (got " + std::to_string(N) + ")");
}

void check_coupling(double J) {
    if (!(J > 0.0)) throw std::invalid_argument("perturbation theory needs J > 0");
}

}  // namespace

PerturbationResult perturbative_energies(int N, double J, double g) {
    check_size(N);
    check_coupling(J);
    const double n2 = static_cast<double>(N) * N;
    const double c = g * g / (8.0 * J);
    PerturbationResult r;
    r.N = N;
    r.J = J;
    r.g = g;
    r.E0 = -c * n2;
    r.E1 = 8.0 * J - c * (n2 + 6.0);
    r.E2 = 12.0 * J - c * n2;
    r.delta01 = 8.0 * J - 6.0 * c;
    r.delta12 = 4.0 * J + 6.0 * c;
    r.delta02 = 12.0 * J;
    return r;
}

std::string to_string(ExcitationClass c) {
    switch (c) {
        case ExcitationClass::psi0: return "psi0";
        case ExcitationClass::psi1: return "psi1";
        case ExcitationClass::psi2_neighbor: return "psi2_neighbor";
        case ExcitationClass::psi2_disconnected: return "psi2_disconnected";
        case ExcitationClass::psi3_connected: return "psi3_connected";
        case ExcitationClass::psi3_disconnected: return "psi3_disconnected";
    }
    return "?";
}

const std::vector<ExcitationClass>& all_excitation_classes() {
    static const std::vector<ExcitationClass> all{
        ExcitationClass::psi0,           ExcitationClass::psi1,           ExcitationClass::psi2_neighbor,
        ExcitationClass::psi2_disconnected, ExcitationClass::psi3_connected, ExcitationClass::psi3_disconnected};
    return all;
}

ExcitationClass excitation_class_from_string(const std::string& s) {
    for (auto c : all_excitation_classes())
        if (to_string(c) == s) return c;
    throw std::invalid_argument("unknown excitation class '" + s + "'");
}

std::int64_t excitation_count(ExcitationClass c, int N) {
    check_size(N);
    const std::int64_t n2 = static_cast<std::int64_t>(N) * N;
    switch (c) {
        case ExcitationClass::psi0: return 1;
        case ExcitationClass::psi1: return n2;
        case ExcitationClass::psi2_neighbor: return 2 * n2;
        case ExcitationClass::psi2_disconnected: return n2 * (n2 - 5) / 2;
        case ExcitationClass::psi3_connected: return 6 * n2;
        case ExcitationClass::psi3_disconnected: return 2 * n2 * (n2 - 8);
    }
    return 0;
}

int domain_walls(ExcitationClass c) {
    switch (c) {
        case ExcitationClass::psi0: return 0;
        case ExcitationClass::psi1: return 4;
        case ExcitationClass::psi2_neighbor: return 6;
        case ExcitationClass::psi2_disconnected: return 8;
        case ExcitationClass::psi3_connected: return 8;
        case ExcitationClass::psi3_disconnected: return 10;
    }
    return 0;
}

double classical_offset(ExcitationClass c, double J) { return 2.0 * J * domain_walls(c); }

double CorrectionBreakdown::total() const {
    double sum = 0.0;
    for (const auto& t : terms) sum += t.value;
    return first_order - sum;
}

SecondOrderCorrections second_order_corrections(int N, double J, double g) {
    check_size(N);
    check_coupling(J);
    const double n2 = static_cast<double>(N) * N;
    auto term = [&](ExcitationClass from, ExcitationClass via, double v2) {
        Contribution c;
        c.via = via;
        c.count = excitation_count(via, N);
        c.matrix_element_sq = v2;
        c.denominator = classical_offset(via, J) - classical_offset(from, J);
        c.value = static_cast<double>(c.count) * v2 / c.denominator;
        return c;
    };
    using E = ExcitationClass;
    const double g2 = g * g;
    SecondOrderCorrections r;
    r.e0.state = E::psi0;
    r.e0.terms = {term(E::psi0, E::psi1, g2)};

    // psi1 is the zero-momentum flip superposition; psi0 couples with amplitude g N.
    r.e1.state = E::psi1;
    r.e1.terms = {term(E::psi1, E::psi0, g2 * n2), term(E::psi1, E::psi2_neighbor, 4.0 * g2 / n2),
                  term(E::psi1, E::psi2_disconnected, 4.0 * g2 / n2)};

    // psi2' is the zero-momentum superposition of the 2N^2 neighbour pairs.
    r.e2.state = E::psi2_neighbor;
    r.e2.terms = {term(E::psi2_neighbor, E::psi1, 16.0 * g2 / (2.0 * n2)),
                  term(E::psi2_neighbor, E::psi3_connected, 4.0 * g2 / (2.0 * n2)),
                  term(E::psi2_neighbor, E::psi3_disconnected, g2 / (2.0 * n2))};
    return r;
}

double edge_mode(double J, double g, double k) { return 4.0 * J * (1.0 + g * std::cos(k)); }

std::pair<double, double> edge_envelope(double J, double g) { return {4.0 * J - 4.0 * g, 4.0 * J + 4.0 * g}; }

namespace {

int cut_distance(const Lattice& lat, Coord anchor, Coord site, CutDirection dir) {
    int delta = 0, length = 0;
    bool periodic = false;
    switch (dir) {
        case CutDirection::row:
            delta = std::abs(site.col - anchor.col);
            length = lat.cols;
            periodic = lat.boundary_cols == Boundary::periodic;
            break;
        case CutDirection::col:
            delta = std::abs(site.row - anchor.row);
            length = lat.rows;
            periodic = lat.boundary_rows == Boundary::periodic;
            break;
        case CutDirection::diagonal:
            throw std::invalid_argument("front fits are defined along rows or columns only");
    }
    return periodic ? std::min(delta, length - delta) : delta;
}

const CorrelationCut* find_cut(const Sample& s, const std::vector<Coord>& sites, Coord anchor) {
    for (const auto& c : s.correlations)
        if (c.sites == sites && c.anchor_index < c.sites.size() && c.sites[c.anchor_index] == anchor) return &c;
    return nullptr;
}

}  // namespace

std::vector<FrontPassage> front_passages(const TimeSeries& series, const Lattice& lat, Coord anchor,
                                         CutDirection direction, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("front threshold must be positive");
    const auto sites = cut_sites(lat, anchor, direction);
    std::map<int, double> first;
    bool any_cut = false;
    for (const auto& sample : series.samples) {
        const CorrelationCut* cut = find_cut(sample, sites, anchor);
        if (!cut) continue;
        any_cut = true;
        for (std::size_t k = 0; k < cut->sites.size(); ++k) {
            if (k == cut->anchor_index) continue;
            const int d = cut_distance(lat, anchor, cut->sites[k], direction);
            if (std::abs(cut->values[k]) >= threshold && !first.count(d)) first[d] = sample.t;
        }
    }
    if (!any_cut) throw std::invalid_argument("no correlation cut recorded for this anchor and direction");
    std::vector<FrontPassage> out;
    for (const auto& [d, t] : first) out.push_back({d, t});
    return out;
}

double front_velocity_fit(const TimeSeries& series, const Lattice& lat, Coord anchor, CutDirection direction,
                          double threshold) {
    const auto passages = front_passages(series, lat, anchor, direction, threshold);
    if (passages.empty()) throw std::runtime_error("no threshold crossings found");
    if (passages.size() < 2) throw std::runtime_error("front crossed only one distance; cannot fit a slope");
    double mt = 0.0, md = 0.0;
    for (const auto& p : passages) {
        mt += p.time;
        md += p.distance;
    }
    mt /= static_cast<double>(passages.size());
    md /= static_cast<double>(passages.size());
    double stt = 0.0, std_ = 0.0;
    for (const auto& p : passages) {
        stt += (p.time - mt) * (p.time - mt);
        std_ += (p.time - mt) * (p.distance - md);
    }
    if (stt == 0.0) throw std::runtime_error("all crossings at the same time; slope undefined");
    return std_ / stt;
}

int front_distance(const TimeSeries& series, const Lattice& lat, Coord anchor, CutDirection direction,
                   double threshold, double t) {
    int best = 0;
    for (const auto& p : front_passages(series, lat, anchor, direction, threshold))
        if (p.time <= t + 1e-12) best = std::max(best, p.distance);
    return best;
}

}  // namespace ttnq
