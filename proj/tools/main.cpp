#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttnq/analysis.hpp"
#include "ttnq/experiment.hpp"
#include "ttnq/lattice.hpp"
#include "ttnq/timeseries_io.hpp"
#include "ttnq/ttn.hpp"

#ifndef TTNQ_VERSION
#define TTNQ_VERSION "unknown"
#endif

using namespace ttnq;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// "quench.chi=64": the value is parsed as JSON when possible, otherwise taken
// as a string.
void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + key + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

ParsedConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed document: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_config(doc.dump());
}

Coord parse_coord(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("site", "expected row,col");
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
}

SeriesFile load_series(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_series(in);
}

struct OutTarget {
    std::string path;
    std::ofstream file;
    std::ostream& stream() {
        if (path.empty() || path == "-") return std::cout;
        if (!file.is_open()) {
            file.open(path, std::ios::binary);
            if (!file) throw std::runtime_error("cannot write '" + path + "'");
        }
        return file;
    }
};

void print_mapping_grid(std::ostream& out, const Lattice& lat, const SiteMapping& m) {
    const int width = static_cast<int>(std::to_string(lat.size() - 1).size()) + 1;
    for (int r = 0; r < lat.rows; ++r) {
        for (int c = 0; c < lat.cols; ++c) out << std::setw(width) << m.to_linear[lat.index({r, c})];
        out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree tensor network quench simulations of the 2D transverse-field Ising model"};
    app.set_version_flag("--version", std::string(TTNQ_VERSION));
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    auto* run_cmd = app.add_subcommand("run", "Run one experiment (or a sweep) from a JSON config");
    run_cmd->add_option("config", config_path, "Config file")->required();
    run_cmd->add_option("--set", overrides, "Override a config value, e.g. --set quench.chi=64");
    run_cmd->add_option("-o,--out", out_dir, "Output directory (overrides output.dir)");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep and tabulate deviations");
    sweep_cmd->add_option("config", config_path, "Config file with a sweep section")->required();
    sweep_cmd->add_option("--set", overrides, "Override a config value");
    sweep_cmd->add_option("-o,--out", out_dir, "Output directory (overrides output.dir)");

    auto* check_cmd = app.add_subcommand("check-config", "Validate a config and print the resolved document");
    check_cmd->add_option("config", config_path, "Config file")->required();
    check_cmd->add_option("--set", overrides, "Override a config value");

    std::string series_path, site_text = "0,0", window_text = "hamming", output_path;
    double t_start = 10.0, t_end = 60.0, min_prominence = 0.05;
    bool keep_mean = false;
    auto* spectrum_cmd = app.add_subcommand("spectrum", "Spectral density of one site's magnetization");
    spectrum_cmd->add_option("series", series_path, "Time-series file")->required();
    spectrum_cmd->add_option("--site", site_text, "Site as row,col");
    spectrum_cmd->add_option("--t-start", t_start, "Window start");
    spectrum_cmd->add_option("--t-end", t_end, "Window end (exclusive)");
    spectrum_cmd->add_option("--window", window_text, "hamming or rect");
    spectrum_cmd->add_flag("--keep-mean", keep_mean, "Do not subtract the mean");
    spectrum_cmd->add_option("-o,--output", output_path, "Output file (default stdout)");

    std::string spectrum_path;
    auto* peaks_cmd = app.add_subcommand("peaks", "Peaks of a spectrum file");
    peaks_cmd->add_option("spectrum", spectrum_path, "Spectrum file")->required();
    peaks_cmd->add_option("--min-prominence", min_prominence, "Relative prominence threshold");
    peaks_cmd->add_option("-o,--output", output_path, "Output file (default stdout)");

    std::string anchor_text = "0,0", direction_text = "col";
    double threshold = 0.01;
    auto* front_cmd = app.add_subcommand("front-fit", "Correlation-front velocity from a time series");
    front_cmd->add_option("series", series_path, "Time-series file")->required();
    front_cmd->add_option("--anchor", anchor_text, "Anchor as row,col");
    front_cmd->add_option("--direction", direction_text, "row or col");
    front_cmd->add_option("--threshold", threshold, "First-passage threshold on |C|");

    int N = 4;
    double J = 1.0, g = 0.1;
    auto* counts_cmd = app.add_subcommand("counts", "Excitation-class counts on an N x N torus");
    counts_cmd->add_option("-N", N, "Linear size")->required();

    bool breakdown = false;
    auto* perturb_cmd = app.add_subcommand("perturb", "Second-order energies and gaps");
    perturb_cmd->add_option("-N", N, "Linear size")->required();
    perturb_cmd->add_option("-J", J, "Coupling");
    perturb_cmd->add_option("-g", g, "Transverse field");
    perturb_cmd->add_flag("--breakdown", breakdown, "List every second-order contribution");

    int rows = 4, cols = 4;
    std::string boundary_rows = "periodic", boundary_cols = "periodic";
    bool as_table = false;
    auto* map_cmd = app.add_subcommand("map-dump", "Print the lattice-to-tree site mapping");
    map_cmd->add_option("--rows", rows, "Rows");
    map_cmd->add_option("--cols", cols, "Columns");
    map_cmd->add_option("--boundary-rows", boundary_rows, "periodic or open");
    map_cmd->add_option("--boundary-cols", boundary_cols, "periodic or open");
    map_cmd->add_flag("--table", as_table, "Print row col linear triples");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd || *sweep_cmd || *check_cmd) {
            if (!out_dir.empty()) overrides.push_back("output.dir=\"" + out_dir + "\"");
            const ParsedConfig cfg = load_config(config_path, overrides);
            if (*check_cmd) {
                std::cout << std::visit([](const auto& s) { return echo_config(s); }, cfg) << '\n';
                return 0;
            }
            if (const auto* sweep = std::get_if<SweepSpec>(&cfg)) {
                const auto res = run_sweep(*sweep);
                std::size_t failed = 0;
                for (bool ok : res.member_ok) failed += ok ? 0 : 1;
                std::cerr << "sweep: " << res.member_ok.size() - failed << "/" << res.member_ok.size()
                          << " members ok, table " << res.table << '\n';
                return failed == 0 ? 0 : kExitFailure;
            }
            if (*sweep_cmd) throw ConfigError("sweep: config has no sweep section");
            const auto& spec = std::get<ExperimentSpec>(cfg);
            const auto res = run_experiment(spec);
            if (!res.ok) {
                std::cerr << "run failed: " << res.error << " (partial outputs in " << spec.output.dir << ")\n";
                return kExitFailure;
            }
            std::cerr << "run finished: " << spec.output.dir << '\n';
            return 0;
        }
        if (*spectrum_cmd) {
            const auto f = load_series(series_path);
            const Spectrum s = spectral_density(f.series, f.header.lattice, parse_coord(site_text), t_start, t_end,
                                                window_from_string(window_text), !keep_mean);
            OutTarget out{output_path, {}};
            write_spectrum(out.stream(), s);
            return 0;
        }
        if (*peaks_cmd) {
            std::ifstream in(spectrum_path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open '" + spectrum_path + "'");
            OutTarget out{output_path, {}};
            write_peaks(out.stream(), find_peaks(read_spectrum(in), min_prominence));
            return 0;
        }
        if (*front_cmd) {
            const auto f = load_series(series_path);
            const Coord anchor = parse_coord(anchor_text);
            const auto dir = cut_direction_from_string(direction_text);
            for (const auto& p : front_passages(f.series, f.header.lattice, anchor, dir, threshold))
                std::cout << "distance " << p.distance << " time " << p.time << '\n';
            std::cout << "slope " << front_velocity_fit(f.series, f.header.lattice, anchor, dir, threshold) << '\n';
            std::cout << "4g " << 4.0 * f.header.params.g << '\n';
            return 0;
        }
        if (*counts_cmd) {
            for (auto c : all_excitation_classes())
                std::cout << to_string(c) << ' ' << excitation_count(c, N) << " walls " << domain_walls(c) << '\n';
            return 0;
        }
        if (*perturb_cmd) {
            const auto r = perturbative_energies(N, J, g);
            std::cout << std::setprecision(12) << "E0 " << r.E0 << "\nE1 " << r.E1 << "\nE2 " << r.E2 << "\ndelta01 "
                      << r.delta01 << "\ndelta12 " << r.delta12 << "\ndelta02 " << r.delta02 << '\n';
            if (breakdown) {
                const auto sc = second_order_corrections(N, J, g);
                for (const auto* b : {&sc.e0, &sc.e1, &sc.e2}) {
                    std::cout << "# " << to_string(b->state) << " first_order " << b->first_order << " total "
                              << b->total() << '\n';
                    for (const auto& t : b->terms)
                        std::cout << "  via " << to_string(t.via) << " count " << t.count << " |V|^2 "
                                  << t.matrix_element_sq << " denominator " << t.denominator << " value " << t.value
                                  << '\n';
                }
            }
            return 0;
        }
        if (*map_cmd) {
            const Lattice lat(rows, cols, boundary_from_string(boundary_rows), boundary_from_string(boundary_cols));
            const auto m = build_mapping(lat);
            std::cout << "# mapping " << to_string(m.kind) << (m.fallback ? " (fallback)" : "") << '\n';
            if (as_table) write_mapping_table(std::cout, lat, m);
            else print_mapping_grid(std::cout, lat, m);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return 0;
}
