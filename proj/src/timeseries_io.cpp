#include "ttnq/timeseries_io.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ttnq {

using nlohmann::json;

namespace {

std::string coord_label(Coord c) { return std::to_string(c.row) + "," + std::to_string(c.col); }

json lattice_json(const Lattice& lat) {
    return {{"rows", lat.rows},
            {"cols", lat.cols},
            {"boundary_rows", to_string(lat.boundary_rows)},
            {"boundary_cols", to_string(lat.boundary_cols)}};
}

}  // namespace

SeriesHeader make_header(const std::string& engine, const Lattice& lat, const QuenchConfig& cfg) {
    SeriesHeader h;
    h.engine = engine;
    h.lattice = lat;
    h.params = cfg.params;
    h.dt = cfg.dt;
    h.measure_every = cfg.measure_every;
    for (const auto& sites : cfg.observables.entropy_sites) {
        std::string label = "sites";
        for (const auto& c : sites) label += ":" + coord_label(c);
        h.entropy_labels.push_back(label);
    }
    for (auto link : cfg.observables.entropy_links) h.entropy_labels.push_back("link:" + std::to_string(link));
    h.correlations = cfg.observables.correlations;
    return h;
}

SeriesWriter::SeriesWriter(std::ostream& out, SeriesHeader header) : out_(out), header_(std::move(header)) {
    json corr = json::array();
    for (const auto& c : header_.correlations)
        corr.push_back({{"anchor", {c.anchor.row, c.anchor.col}}, {"direction", to_string(c.direction)}});
    json h = {{"schema", kSeriesSchema},
              {"engine", header_.engine},
              {"lattice", lattice_json(header_.lattice)},
              {"J", header_.params.J},
              {"g", header_.params.g},
              {"dt", header_.dt},
              {"measure_every", header_.measure_every},
              {"entropies", header_.entropy_labels},
              {"correlations", corr}};
    emit(h.dump());
}

void SeriesWriter::emit(const std::string& line) {
    const std::string full = line + "\n";
    out_.write(full.data(), static_cast<std::streamsize>(full.size()));
    out_.flush();
}

void SeriesWriter::write(const Sample& s) {
    json entropies = json::array();
    for (const auto& e : s.entropies) entropies.push_back({{"S", e.entropy}, {"S_max", e.max_entropy}});
    json corr = json::array();
    for (const auto& c : s.correlations) corr.push_back(c.values);
    json rec = {{"t", s.t},
                {"mz", s.magnetization},
                {"energy", s.energy},
                {"norm", s.norm},
                {"entropies", entropies},
                {"correlations", corr},
                {"max_bond", s.max_bond},
                {"mean_bond", s.mean_bond},
                {"discarded_weight", s.discarded_weight},
                {"renormalization", s.renormalization}};
    emit(rec.dump());
}

void SeriesWriter::write_error(const std::string& message) { emit(json{{"error", message}}.dump()); }

SeriesFile read_series(std::istream& in) {
    SeriesFile f;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty series file");
    const json h = json::parse(line);
    if (h.value("schema", "") != kSeriesSchema) throw std::runtime_error("not a ttnq time-series file");
    f.header.engine = h.at("engine").get<std::string>();
    const auto& lj = h.at("lattice");
    f.header.lattice = Lattice(lj.at("rows").get<int>(), lj.at("cols").get<int>(),
                               boundary_from_string(lj.at("boundary_rows").get<std::string>()),
                               boundary_from_string(lj.at("boundary_cols").get<std::string>()));
    f.header.params = {h.at("J").get<double>(), h.at("g").get<double>()};
    f.header.dt = h.at("dt").get<double>();
    f.header.measure_every = h.at("measure_every").get<std::size_t>();
    f.header.entropy_labels = h.at("entropies").get<std::vector<std::string>>();
    for (const auto& c : h.at("correlations")) {
        CorrelationRequest r;
        r.anchor = {c.at("anchor").at(0).get<int>(), c.at("anchor").at(1).get<int>()};
        r.direction = cut_direction_from_string(c.at("direction").get<std::string>());
        f.header.correlations.push_back(r);
    }
    f.series.engine = f.header.engine;

    std::vector<std::vector<Coord>> cut_site_lists;
    for (const auto& r : f.header.correlations) cut_site_lists.push_back(cut_sites(f.header.lattice, r.anchor, r.direction));

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error&) {
            if (in.eof()) break;  // torn final line of a killed run
            throw;
        }
        if (rec.contains("error")) {
            f.series.error = rec.at("error").get<std::string>();
            continue;
        }
        Sample s;
        s.t = rec.at("t").get<double>();
        s.magnetization = rec.at("mz").get<std::vector<double>>();
        s.energy = rec.at("energy").get<double>();
        s.norm = rec.at("norm").get<double>();
        for (const auto& e : rec.at("entropies")) {
            EntropyResult r;
            r.entropy = e.at("S").get<double>();
            r.max_entropy = e.at("S_max").get<double>();
            s.entropies.push_back(r);
        }
        const auto& corr = rec.at("correlations");
        if (corr.size() != cut_site_lists.size()) throw std::runtime_error("correlation count does not match header");
        for (std::size_t k = 0; k < corr.size(); ++k) {
            CorrelationCut cut;
            cut.sites = cut_site_lists[k];
            cut.values = corr[k].get<std::vector<double>>();
            for (std::size_t i = 0; i < cut.sites.size(); ++i)
                if (cut.sites[i] == f.header.correlations[k].anchor) cut.anchor_index = i;
            s.correlations.push_back(std::move(cut));
        }
        s.max_bond = rec.at("max_bond").get<std::size_t>();
        s.mean_bond = rec.at("mean_bond").get<double>();
        s.discarded_weight = rec.at("discarded_weight").get<double>();
        s.renormalization = rec.value("renormalization", 1.0);
        f.series.samples.push_back(std::move(s));
    }
    return f;
}

void write_correlation_matrix(std::ostream& out, const TimeSeries& series, std::size_t request_index) {
    if (series.samples.empty()) throw std::invalid_argument("empty time series");
    const auto& first = series.samples.front();
    if (request_index >= first.correlations.size()) throw std::out_of_range("no such correlation request");
    const auto& sites = first.correlations[request_index].sites;
    out << "# shape " << series.samples.size() << ' ' << sites.size() << '\n';
    out << "# t";
    for (const auto& c : sites) out << ' ' << coord_label(c);
    out << '\n' << std::setprecision(17);
    for (const auto& s : series.samples) {
        out << s.t;
        for (double v : s.correlations.at(request_index).values) out << ' ' << v;
        out << '\n';
    }
}

}  // namespace ttnq
