#include "ttnq/experiment.hpp"

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ttnq/oracle.hpp"
#include "ttnq/timeseries_io.hpp"

#ifndef TTNQ_VERSION
#define TTNQ_VERSION "unknown"
#endif

namespace ttnq {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Engine e) { return e == Engine::ttn ? "ttn" : "oracle"; }

Engine engine_from_string(const std::string& s) {
    if (s == "ttn") return Engine::ttn;
    if (s == "oracle") return Engine::oracle;
    throw ConfigError("engine: unknown value '" + s + "' (expected ttn|oracle)");
}

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::chi: return "chi";
        case SweepAxis::g: return "g";
        case SweepAxis::dt: return "dt";
    }
    return "chi";
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

long peak_rss_kb() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return u.ru_maxrss;
}

namespace {

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

template <typename T>
T read_as(const json& obj, const char* key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

Coord read_coord(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ConfigError(path + ": expected [row, col]");
    return {j[0].get<int>(), j[1].get<int>()};
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

json coord_json(Coord c) { return json::array({c.row, c.col}); }

Boundary read_boundary(const json& obj, const char* key, const std::string& path) {
    const auto s = read_as<std::string>(obj, key, path, "periodic");
    try {
        return boundary_from_string(s);
    } catch (const std::exception&) {
        throw ConfigError(path + "." + key + ": expected periodic|open, got '" + s + "'");
    }
}

std::string bitmask_string(const std::vector<bool>& bits) {
    std::string s;
    for (bool b : bits) s += b ? '1' : '0';
    return s;
}

ExperimentSpec parse_experiment(const json& doc) {
    ExperimentSpec spec;

    const json lat = doc.value("lattice", json::object());
    check_keys(lat, "lattice", {"rows", "cols", "boundary_rows", "boundary_cols"});
    const int rows = read_as<int>(lat, "rows", "lattice", 4);
    const int cols = read_as<int>(lat, "cols", "lattice", 4);
    require(rows >= 1 && cols >= 1, "lattice: rows and cols must be positive");
    spec.lattice = Lattice(rows, cols, read_boundary(lat, "boundary_rows", "lattice"),
                           read_boundary(lat, "boundary_cols", "lattice"));

    spec.engine = engine_from_string(doc.value("engine", std::string("ttn")));
    if (spec.engine == Engine::oracle && spec.lattice.size() > kOracleMaxSites)
        throw ConfigError("engine: oracle supports at most " + std::to_string(kOracleMaxSites) + " sites, lattice has " +
                          std::to_string(spec.lattice.size()));

    const json pat = doc.value("pattern", json::object());
    check_keys(pat, "pattern", {"kind", "interface_col", "size", "offset", "bitmask", "path"});
    const auto kind = read_as<std::string>(pat, "kind", "pattern", "polarized");
    if (kind == "polarized") {
        spec.pattern.kind = PatternKind::polarized();
    } else if (kind == "stripe") {
        require(pat.contains("interface_col"), "pattern.interface_col: required for a stripe");
        spec.pattern.kind = PatternKind::stripe(read_as<int>(pat, "interface_col", "pattern", 0));
    } else if (kind == "square") {
        require(pat.contains("size"), "pattern.size: required for a square");
        std::optional<Coord> offset;
        if (pat.contains("offset")) offset = read_coord(pat.at("offset"), "pattern.offset");
        spec.pattern.kind = PatternKind::square(read_as<int>(pat, "size", "pattern", 0), offset);
    } else if (kind == "custom") {
        const auto bits = read_as<std::string>(pat, "bitmask", "pattern", "");
        std::vector<bool> mask;
        for (char c : bits) {
            require(c == '0' || c == '1', "pattern.bitmask: only '0' and '1' allowed");
            mask.push_back(c == '1');
        }
        spec.pattern.kind = PatternKind::custom(mask);
    } else if (kind == "file") {
        spec.pattern.file = read_as<std::string>(pat, "path", "pattern", "");
        require(!spec.pattern.file.empty(), "pattern.path: required for kind=file");
        spec.pattern.kind = PatternKind::polarized();
    } else {
        throw ConfigError("pattern.kind: unknown value '" + kind + "'");
    }
    try {
        resolve_pattern(spec);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("pattern: ") + e.what());
    }

    const json q = doc.value("quench", json::object());
    check_keys(q, "quench",
               {"J", "g", "dt", "t_max", "chi", "mode", "hybrid_n", "truncation_cutoff", "krylov_tol", "krylov_max_dim",
                "noise", "seed", "measure_every"});
    auto& c = spec.quench;
    c.params.J = read_as<double>(q, "J", "quench", 1.0);
    c.params.g = read_as<double>(q, "g", "quench", 0.0);
    c.dt = read_as<double>(q, "dt", "quench", 0.005);
    c.t_max = read_as<double>(q, "t_max", "quench", 0.0);
    c.chi = read_as<std::size_t>(q, "chi", "quench", 16);
    try {
        c.mode = tdvp_mode_from_string(read_as<std::string>(q, "mode", "quench", "tdvp1"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("quench.mode: ") + e.what());
    }
    c.hybrid_n = read_as<int>(q, "hybrid_n", "quench", 10);
    c.truncation_cutoff = read_as<double>(q, "truncation_cutoff", "quench", 0.0);
    c.krylov_tol = read_as<double>(q, "krylov_tol", "quench", 1e-12);
    c.krylov_max_dim = read_as<std::size_t>(q, "krylov_max_dim", "quench", 30);
    c.noise = read_as<double>(q, "noise", "quench", 1e-16);
    c.seed = read_as<std::uint64_t>(q, "seed", "quench", 0);
    c.measure_every = read_as<std::size_t>(q, "measure_every", "quench", 1);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("quench: ") + e.what());
    }

    const json obs = doc.value("observables", json::object());
    check_keys(obs, "observables", {"magnetization", "energy", "norm", "entropy_sites", "entropy_links", "correlations"});
    auto& sel = c.observables;
    sel.magnetization = read_as<bool>(obs, "magnetization", "observables", true);
    sel.energy = read_as<bool>(obs, "energy", "observables", true);
    sel.norm = read_as<bool>(obs, "norm", "observables", true);
    if (obs.contains("entropy_sites")) {
        for (const auto& group : obs.at("entropy_sites")) {
            require(group.is_array() && (group.size() == 1 || group.size() == 2),
                    "observables.entropy_sites: each entry lists 1 or 2 sites");
            std::vector<Coord> sites;
            for (const auto& s : group) {
                sites.push_back(read_coord(s, "observables.entropy_sites"));
                require(spec.lattice.contains(sites.back()), "observables.entropy_sites: site outside the lattice");
            }
            require(sites.size() == 1 || !(sites[0] == sites[1]), "observables.entropy_sites: sites must differ");
            sel.entropy_sites.push_back(sites);
        }
    }
    if (obs.contains("entropy_links")) {
        const TreeTopology topo(spec.lattice.size());
        for (const auto& l : obs.at("entropy_links")) {
            require(l.is_number_integer(), "observables.entropy_links: expected node ids");
            const auto link = l.get<std::size_t>();
            require(link >= 1 && link < topo.node_count() && topo.active(link),
                    "observables.entropy_links: " + std::to_string(link) + " is not an active tree edge");
            sel.entropy_links.push_back(link);
        }
    }
    if (obs.contains("correlations")) {
        for (const auto& r : obs.at("correlations")) {
            check_keys(r, "observables.correlations[]", {"anchor", "direction"});
            CorrelationRequest req;
            require(r.contains("anchor"), "observables.correlations[].anchor: required");
            req.anchor = read_coord(r.at("anchor"), "observables.correlations[].anchor");
            require(spec.lattice.contains(req.anchor), "observables.correlations[].anchor: outside the lattice");
            try {
                req.direction = cut_direction_from_string(read_as<std::string>(r, "direction", "observables.correlations[]", "row"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("observables.correlations[].direction: ") + e.what());
            }
            sel.correlations.push_back(req);
        }
    }

    const json out = doc.value("output", json::object());
    check_keys(out, "output", {"dir", "series", "checkpoint", "checkpoint_seconds", "correlation_matrices"});
    spec.output.dir = read_as<std::string>(out, "dir", "output", "out");
    spec.output.series = read_as<std::string>(out, "series", "output", "series.ndjson");
    spec.output.checkpoint = read_as<std::string>(out, "checkpoint", "output", "checkpoint.bin");
    spec.output.checkpoint_seconds = read_as<double>(out, "checkpoint_seconds", "output", 0.0);
    spec.output.correlation_matrices = read_as<bool>(out, "correlation_matrices", "output", true);
    require(spec.output.checkpoint_seconds >= 0.0, "output.checkpoint_seconds: must be non-negative");

    const json an = doc.value("analysis", json::object());
    check_keys(an, "analysis", {"spectrum", "front_fit"});
    if (an.contains("spectrum")) {
        const json& s = an.at("spectrum");
        check_keys(s, "analysis.spectrum", {"site", "t_start", "t_end", "window", "remove_mean", "min_prominence"});
        SpectrumRequest r;
        r.site = s.contains("site") ? read_coord(s.at("site"), "analysis.spectrum.site") : Coord{0, 0};
        require(spec.lattice.contains(r.site), "analysis.spectrum.site: outside the lattice");
        r.t_start = read_as<double>(s, "t_start", "analysis.spectrum", 10.0);
        r.t_end = read_as<double>(s, "t_end", "analysis.spectrum", 60.0);
        try {
            r.window = window_from_string(read_as<std::string>(s, "window", "analysis.spectrum", "hamming"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("analysis.spectrum.window: ") + e.what());
        }
        r.remove_mean = read_as<bool>(s, "remove_mean", "analysis.spectrum", true);
        r.min_prominence = read_as<double>(s, "min_prominence", "analysis.spectrum", 0.05);
        require(r.t_start >= 0.0 && r.t_end > r.t_start, "analysis.spectrum: need 0 <= t_start < t_end");
        require(r.t_end <= c.t_max + c.dt * (1.0 + 1e-9), "analysis.spectrum.t_end: beyond the simulated time");
        require(sel.magnetization, "analysis.spectrum: needs observables.magnetization");
        spec.spectrum = r;
    }
    if (an.contains("front_fit")) {
        const json& f = an.at("front_fit");
        check_keys(f, "analysis.front_fit", {"anchor", "direction", "threshold"});
        FrontFitRequest r;
        require(f.contains("anchor"), "analysis.front_fit.anchor: required");
        r.anchor = read_coord(f.at("anchor"), "analysis.front_fit.anchor");
        require(spec.lattice.contains(r.anchor), "analysis.front_fit.anchor: outside the lattice");
        const auto dir = read_as<std::string>(f, "direction", "analysis.front_fit", "col");
        require(dir == "row" || dir == "col", "analysis.front_fit.direction: expected row|col");
        r.direction = cut_direction_from_string(dir);
        r.threshold = read_as<double>(f, "threshold", "analysis.front_fit", 0.01);
        require(r.threshold > 0.0, "analysis.front_fit.threshold: must be positive");
        const bool recorded = std::any_of(sel.correlations.begin(), sel.correlations.end(), [&](const auto& q2) {
            return q2.anchor == r.anchor && q2.direction == r.direction;
        });
        if (!recorded) sel.correlations.push_back({r.anchor, r.direction});
        spec.front_fit = r;
    }
    return spec;
}

json experiment_json(const ExperimentSpec& spec) {
    json pat;
    const auto& k = spec.pattern.kind;
    if (!spec.pattern.file.empty()) {
        pat = {{"kind", "file"}, {"path", spec.pattern.file}};
    } else {
        switch (k.type) {
            case PatternKind::Type::polarized: pat = {{"kind", "polarized"}}; break;
            case PatternKind::Type::stripe: pat = {{"kind", "stripe"}, {"interface_col", k.interface_col}}; break;
            case PatternKind::Type::square:
                pat = {{"kind", "square"}, {"size", k.size}};
                if (k.offset) pat["offset"] = coord_json(*k.offset);
                break;
            case PatternKind::Type::custom: pat = {{"kind", "custom"}, {"bitmask", bitmask_string(k.bitmask)}}; break;
        }
    }
    const auto& c = spec.quench;
    json entropy_sites = json::array();
    for (const auto& g : c.observables.entropy_sites) {
        json group = json::array();
        for (const auto& s : g) group.push_back(coord_json(s));
        entropy_sites.push_back(group);
    }
    json corr = json::array();
    for (const auto& r : c.observables.correlations)
        corr.push_back({{"anchor", coord_json(r.anchor)}, {"direction", to_string(r.direction)}});
    json doc = {
        {"lattice",
         {{"rows", spec.lattice.rows},
          {"cols", spec.lattice.cols},
          {"boundary_rows", to_string(spec.lattice.boundary_rows)},
          {"boundary_cols", to_string(spec.lattice.boundary_cols)}}},
        {"pattern", pat},
        {"engine", to_string(spec.engine)},
        {"quench",
         {{"J", c.params.J},
          {"g", c.params.g},
          {"dt", c.dt},
          {"t_max", c.t_max},
          {"chi", c.chi},
          {"mode", to_string(c.mode)},
          {"hybrid_n", c.hybrid_n},
          {"truncation_cutoff", c.truncation_cutoff},
          {"krylov_tol", c.krylov_tol},
          {"krylov_max_dim", c.krylov_max_dim},
          {"noise", c.noise},
          {"seed", c.seed},
          {"measure_every", c.measure_every}}},
        {"observables",
         {{"magnetization", c.observables.magnetization},
          {"energy", c.observables.energy},
          {"norm", c.observables.norm},
          {"entropy_sites", entropy_sites},
          {"entropy_links", c.observables.entropy_links},
          {"correlations", corr}}},
        {"output",
         {{"dir", spec.output.dir},
          {"series", spec.output.series},
          {"checkpoint", spec.output.checkpoint},
          {"checkpoint_seconds", spec.output.checkpoint_seconds},
          {"correlation_matrices", spec.output.correlation_matrices}}},
    };
    json analysis = json::object();
    if (spec.spectrum) {
        const auto& s = *spec.spectrum;
        analysis["spectrum"] = {{"site", coord_json(s.site)},        {"t_start", s.t_start},
                                {"t_end", s.t_end},                  {"window", to_string(s.window)},
                                {"remove_mean", s.remove_mean},      {"min_prominence", s.min_prominence}};
    }
    if (spec.front_fit) {
        const auto& f = *spec.front_fit;
        analysis["front_fit"] = {
            {"anchor", coord_json(f.anchor)}, {"direction", to_string(f.direction)}, {"threshold", f.threshold}};
    }
    doc["analysis"] = analysis;
    return doc;
}

}  // namespace

ParsedConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed document: ") + e.what());
    }
    check_keys(doc, "", {"lattice", "pattern", "engine", "quench", "observables", "output", "analysis", "sweep"});
    if (!doc.contains("sweep")) return parse_experiment(doc);

    json sweep = doc.at("sweep");
    doc.erase("sweep");
    check_keys(sweep, "sweep", {"axis", "values", "reference"});
    SweepSpec s;
    s.base = parse_experiment(doc);
    const auto axis = read_as<std::string>(sweep, "axis", "sweep", "chi");
    if (axis == "chi") s.axis = SweepAxis::chi;
    else if (axis == "g") s.axis = SweepAxis::g;
    else if (axis == "dt") s.axis = SweepAxis::dt;
    else throw ConfigError("sweep.axis: expected chi|g|dt, got '" + axis + "'");
    s.values = read_as<std::vector<double>>(sweep, "values", "sweep", {});
    require(!s.values.empty(), "sweep.values: must be nonempty");
    const bool up = s.values.size() < 2 || s.values[1] > s.values[0];
    for (std::size_t i = 1; i < s.values.size(); ++i)
        require(up ? s.values[i] > s.values[i - 1] : s.values[i] < s.values[i - 1], "sweep.values: must be strictly monotone");
    for (double v : s.values) {
        if (s.axis == SweepAxis::chi) require(v >= 1.0 && v == std::floor(v), "sweep.values: chi must be a positive integer");
        if (s.axis == SweepAxis::dt) {
            require(v > 0.0, "sweep.values: dt must be positive");
            const double ratio = s.base.quench.t_max / v;
            require(std::abs(ratio - std::round(ratio)) <= 1e-6 * std::max(1.0, ratio),
                    "sweep.values: t_max must be a multiple of every dt");
        }
    }
    const json ref = sweep.value("reference", json("auto"));
    if (ref.is_string() && ref.get<std::string>() == "oracle") {
        require(s.base.lattice.size() <= kOracleMaxSites, "sweep.reference: oracle supports at most 20 sites");
        s.oracle_reference = true;
    } else if (ref.is_string() && ref.get<std::string>() == "auto") {
        // Largest chi, smallest dt; a g sweep has no finest member, so the first value is used.
        std::size_t idx = 0;
        for (std::size_t i = 1; i < s.values.size(); ++i) {
            if (s.axis == SweepAxis::chi && s.values[i] > s.values[idx]) idx = i;
            if (s.axis == SweepAxis::dt && s.values[i] < s.values[idx]) idx = i;
        }
        s.reference = idx;
    } else if (ref.is_number()) {
        const double v = ref.get<double>();
        const auto it = std::find(s.values.begin(), s.values.end(), v);
        require(it != s.values.end(), "sweep.reference: value is not a sweep member");
        s.reference = static_cast<std::size_t>(it - s.values.begin());
    } else {
        throw ConfigError("sweep.reference: expected auto, oracle or a member value");
    }
    return s;
}

std::string echo_config(const ExperimentSpec& spec) { return experiment_json(spec).dump(2); }

std::string echo_config(const SweepSpec& spec) {
    json doc = experiment_json(spec.base);
    json ref;
    if (spec.oracle_reference) ref = "oracle";
    else ref = spec.values.at(*spec.reference);
    doc["sweep"] = {{"axis", to_string(spec.axis)}, {"values", spec.values}, {"reference", ref}};
    return doc.dump(2);
}

SpinPattern resolve_pattern(const ExperimentSpec& spec) {
    if (!spec.pattern.file.empty()) {
        std::ifstream in(spec.pattern.file);
        if (!in) throw ConfigError("pattern.path: cannot open '" + spec.pattern.file + "'");
        return read_pattern(in, spec.lattice);
    }
    return make_pattern(spec.pattern.kind, spec.lattice);
}

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

// Write to a sibling temporary and rename, so a reader never sees a torn file.
template <typename F>
void write_atomically(const fs::path& p, F&& body) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        body(out);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

// The output location is left out so that a run repeated elsewhere hashes the same.
std::uint64_t physics_hash(const std::string& config_text) {
    json doc = json::parse(config_text);
    doc["output"].erase("dir");
    return fnv1a64(doc.dump());
}

std::string describe_mapping(const Lattice& lat) {
    const auto m = build_mapping(lat);
    return to_string(m.kind) + (m.fallback ? " (fallback)" : "");
}

}  // namespace

RunResult run_experiment(const ExperimentSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir(spec.output.dir);
    fs::create_directories(dir);
    RunResult result;

    const std::string config_text = echo_config(spec);
    const std::uint64_t hash = physics_hash(config_text);
    write_text(dir / "config.json", config_text + "\n");
    result.outputs.push_back("config.json");

    const SpinPattern pattern = resolve_pattern(spec);
    const auto& cfg = spec.quench;
    TimeSeries series;
    {
        std::ofstream out(dir / spec.output.series, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + (dir / spec.output.series).string());
        SeriesWriter writer(out, make_header(to_string(spec.engine), spec.lattice, cfg));
        result.outputs.push_back(spec.output.series);
        RunHooks hooks;
        hooks.on_sample = [&](const Sample& s) { writer.write(s); };
        if (spec.engine == Engine::ttn) {
            hooks.checkpoint_seconds = spec.output.checkpoint_seconds;
            hooks.on_checkpoint = [&](const TreeState& state, double) {
                write_atomically(dir / spec.output.checkpoint, [&](std::ostream& o) { write_checkpoint(o, state, hash); });
            };
            series = run(pattern, spec.lattice, cfg, hooks);
        } else {
            StateVector final_state = StateVector::product(pattern, build_mapping(spec.lattice));
            series = run_oracle(pattern, spec.lattice, cfg, hooks, &final_state);
            write_atomically(dir / spec.output.checkpoint,
                             [&](std::ostream& o) { write_statevector(o, final_state, hash); });
        }
        result.outputs.push_back(spec.output.checkpoint);
        if (series.error) {
            writer.write_error(*series.error);
            result.ok = false;
            result.error = *series.error;
        }
    }

    if (spec.output.correlation_matrices && !series.samples.empty()) {
        for (std::size_t k = 0; k < cfg.observables.correlations.size(); ++k) {
            const std::string name = "correlations_" + std::to_string(k) + ".txt";
            std::ofstream out(dir / name, std::ios::binary);
            write_correlation_matrix(out, series, k);
            result.outputs.push_back(name);
        }
    }

    json analyses = json::object();
    if (result.ok && spec.spectrum) {
        try {
            const auto& r = *spec.spectrum;
            const Spectrum s = spectral_density(series, spec.lattice, r.site, r.t_start, r.t_end, r.window, r.remove_mean);
            const auto peaks = find_peaks(s, r.min_prominence);
            {
                std::ofstream out(dir / "spectrum.txt", std::ios::binary);
                write_spectrum(out, s);
            }
            {
                std::ofstream out(dir / "peaks.txt", std::ios::binary);
                write_peaks(out, peaks);
            }
            result.outputs.push_back("spectrum.txt");
            result.outputs.push_back("peaks.txt");
        } catch (const std::exception& e) {
            result.ok = false;
            result.error = std::string("spectrum: ") + e.what();
        }
    }
    if (result.ok && spec.front_fit) {
        const auto& f = *spec.front_fit;
        json out = {{"anchor", coord_json(f.anchor)}, {"direction", to_string(f.direction)}, {"threshold", f.threshold},
                    {"reference_4g", 4.0 * cfg.params.g}};
        try {
            json passages = json::array();
            for (const auto& p : front_passages(series, spec.lattice, f.anchor, f.direction, f.threshold))
                passages.push_back({{"distance", p.distance}, {"time", p.time}});
            out["passages"] = passages;
            out["slope"] = front_velocity_fit(series, spec.lattice, f.anchor, f.direction, f.threshold);
        } catch (const std::exception& e) {
            out["error"] = e.what();
        }
        write_text(dir / "front_fit.json", out.dump(2) + "\n");
        result.outputs.push_back("front_fit.json");
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest = {{"status", result.ok ? "ok" : "failed"},
                     {"config_hash", hex64(hash)},
                     {"seed", cfg.seed},
                     {"version", TTNQ_VERSION},
                     {"engine", to_string(spec.engine)},
                     {"wall_seconds", wall},
                     {"peak_rss_kb", peak_rss_kb()},
                     {"pattern", describe(spec.pattern.kind, spec.lattice)},
                     {"mapping", describe_mapping(spec.lattice)},
                     {"units", {{"time", "1/J"}, {"energy", "J"}, {"J", cfg.params.J}}},
                     {"outputs", result.outputs}};
    if (!spec.pattern.file.empty()) manifest["pattern"] = "file: " + spec.pattern.file;
    if (!result.ok) manifest["error"] = result.error;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

namespace {

ExperimentSpec member_spec(const SweepSpec& s, std::size_t k) {
    ExperimentSpec m = s.base;
    const double v = s.values[k];
    switch (s.axis) {
        case SweepAxis::chi: m.quench.chi = static_cast<std::size_t>(v); break;
        case SweepAxis::g: m.quench.params.g = v; break;
        case SweepAxis::dt: m.quench.dt = v; break;
    }
    std::ostringstream name;
    name << "member_" << std::setw(2) << std::setfill('0') << k;
    m.output.dir = (fs::path(s.base.output.dir) / name.str()).string();
    return m;
}

ExperimentSpec oracle_spec(const SweepSpec& s) {
    ExperimentSpec m = s.base;
    m.engine = Engine::oracle;
    if (s.axis == SweepAxis::dt) m.quench.dt = *std::min_element(s.values.begin(), s.values.end());
    m.output.dir = (fs::path(s.base.output.dir) / "reference_oracle").string();
    return m;
}

int worker_count() {
    const char* env = std::getenv("TTNQ_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
}

// Runs each spec in a forked child, at most `workers` at a time. Returns the
// per-spec success flags.
std::vector<bool> run_members(const std::vector<ExperimentSpec>& specs, int workers) {
    std::vector<bool> ok(specs.size(), false);
    if (workers <= 1) {
        for (std::size_t k = 0; k < specs.size(); ++k) {
            try {
                ok[k] = run_experiment(specs[k]).ok;
            } catch (const std::exception&) {
                ok[k] = false;
            }
        }
        return ok;
    }
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    auto reap = [&]() {
        int status = 0;
        const pid_t pid = waitpid(-1, &status, 0);
        if (pid <= 0) return;
        ok[running.at(pid)] = WIFEXITED(status) && WEXITSTATUS(status) == 0;
        running.erase(pid);
    };
    while (next < specs.size() || !running.empty()) {
        if (next < specs.size() && static_cast<int>(running.size()) < workers) {
            std::fflush(nullptr);
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("fork failed");
            if (pid == 0) {
                int code = 1;
                try {
                    code = run_experiment(specs[next]).ok ? 0 : 1;
                } catch (...) {
                    code = 1;
                }
                std::fflush(nullptr);
                _exit(code);
            }
            running[pid] = next++;
        } else {
            reap();
        }
    }
    return ok;
}

std::optional<TimeSeries> load_series(const ExperimentSpec& m) {
    std::ifstream in(fs::path(m.output.dir) / m.output.series);
    if (!in) return std::nullopt;
    try {
        return read_series(in).series;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string coord_tag(Coord c) { return "[" + std::to_string(c.row) + "," + std::to_string(c.col) + "]"; }

void deviation_rows(std::ostream& out, const std::string& value, const TimeSeries& a, const TimeSeries& ref,
                    const Lattice& lat, const SeriesHeader& header) {
    std::map<long long, const Sample*> by_time;
    const double quantum = 1e-9;
    for (const auto& s : ref.samples) by_time[std::llround(s.t / quantum)] = &s;
    for (const auto& s : a.samples) {
        const auto it = by_time.find(std::llround(s.t / quantum));
        if (it == by_time.end()) continue;
        const Sample& r = *it->second;
        auto row = [&](const std::string& name, double d) { out << value << ' ' << s.t << ' ' << name << ' ' << d << '\n'; };
        if (!s.magnetization.empty() && s.magnetization.size() == r.magnetization.size()) {
            double worst = 0.0;
            for (std::size_t i = 0; i < s.magnetization.size(); ++i) {
                const double d = std::abs(s.magnetization[i] - r.magnetization[i]);
                worst = std::max(worst, d);
                row("mz" + coord_tag(lat.coord(i)), d);
            }
            row("mz_max", worst);
        }
        row("energy", std::abs(s.energy - r.energy));
        row("norm", std::abs(s.norm - r.norm));
        for (std::size_t k = 0; k < std::min(s.entropies.size(), r.entropies.size()); ++k)
            row("S[" + header.entropy_labels.at(k) + "]", std::abs(s.entropies[k].entropy - r.entropies[k].entropy));
        for (std::size_t k = 0; k < std::min(s.correlations.size(), r.correlations.size()); ++k)
            for (std::size_t i = 0; i < s.correlations[k].values.size(); ++i)
                row("C" + std::to_string(k) + coord_tag(s.correlations[k].sites[i]),
                    std::abs(s.correlations[k].values[i] - r.correlations[k].values[i]));
    }
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir(spec.base.output.dir);
    fs::create_directories(dir);
    std::vector<ExperimentSpec> members;
    for (std::size_t k = 0; k < spec.values.size(); ++k) members.push_back(member_spec(spec, k));
    std::vector<ExperimentSpec> jobs = members;
    if (spec.oracle_reference) jobs.push_back(oracle_spec(spec));
    const auto ok = run_members(jobs, worker_count());

    SweepResult result;
    result.member_ok.assign(ok.begin(), ok.begin() + static_cast<std::ptrdiff_t>(members.size()));
    const ExperimentSpec& ref_spec = spec.oracle_reference ? jobs.back() : members.at(*spec.reference);
    const bool ref_ok = spec.oracle_reference ? ok.back() : ok.at(*spec.reference);

    const std::string table = "deviations.txt";
    std::ofstream out(dir / table, std::ios::binary);
    out << "# axis=" << to_string(spec.axis) << " reference="
        << (spec.oracle_reference ? std::string("oracle") : json(spec.values.at(*spec.reference)).dump()) << '\n';
    out << "# value t observable deviation\n" << std::setprecision(17);
    const auto ref_series = ref_ok ? load_series(ref_spec) : std::nullopt;
    if (!ref_series) out << "# reference failed; no deviations\n";
    const SeriesHeader header = make_header("ttn", spec.base.lattice, spec.base.quench);
    for (std::size_t k = 0; k < members.size(); ++k) {
        const std::string value = json(spec.values[k]).dump();
        if (!result.member_ok[k]) {
            out << "# member " << value << " failed\n";
            continue;
        }
        if (!ref_series) continue;
        const auto series = load_series(members[k]);
        if (!series) {
            out << "# member " << value << " has no readable series\n";
            continue;
        }
        deviation_rows(out, value, *series, *ref_series, spec.base.lattice, header);
    }
    out.close();
    result.table = (dir / table).string();

    json member_dirs = json::array();
    for (std::size_t k = 0; k < jobs.size(); ++k)
        member_dirs.push_back({{"dir", fs::path(jobs[k].output.dir).filename().string()},
                               {"status", ok[k] ? "ok" : "failed"}});
    const std::string config_text = echo_config(spec);
    write_text(dir / "sweep_config.json", config_text + "\n");
    rusage children{};
    getrusage(RUSAGE_CHILDREN, &children);
    const bool all_ok = std::all_of(ok.begin(), ok.end(), [](bool b) { return b; });
    json manifest = {{"status", all_ok ? "ok" : "failed"},
                     {"config_hash", hex64(physics_hash(config_text))},
                     {"seed", spec.base.quench.seed},
                     {"version", TTNQ_VERSION},
                     {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                     {"peak_rss_kb", std::max(peak_rss_kb(), static_cast<long>(children.ru_maxrss))},
                     {"members", member_dirs},
                     {"outputs", {"sweep_config.json", table}}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

}  // namespace ttnq
