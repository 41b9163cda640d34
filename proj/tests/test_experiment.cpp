#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ttnq/experiment.hpp"
#include "ttnq/timeseries_io.hpp"

using namespace ttnq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ttnq_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

SeriesFile load(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return read_series(in);
}

ExperimentSpec experiment(const json& doc) { return std::get<ExperimentSpec>(parse_config(doc.dump())); }
SweepSpec sweep(const json& doc) { return std::get<SweepSpec>(parse_config(doc.dump())); }

std::string config_error(const json& doc) {
    try {
        parse_config(doc.dump());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

json small_doc(const fs::path& dir) {
    return {{"lattice", {{"rows", 2}, {"cols", 4}}},
            {"quench", {{"g", 0.5}, {"dt", 0.05}, {"t_max", 1.0}, {"chi", 16}}},
            {"observables", {{"entropy_sites", {{{0, 0}, {0, 1}}}}, {"correlations", {{{"anchor", {0, 1}}, {"direction", "row"}}}}}},
            {"output", {{"dir", dir.string()}}}};
}

// Every regular file below dir must be listed by exactly one manifest.
void check_manifest_coverage(const fs::path& dir) {
    std::map<fs::path, int> listed;
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        files.insert(e.path());
        if (e.path().filename() != "manifest.json") continue;
        const json m = read_json(e.path());
        ++listed[e.path()];
        for (const auto& o : m.at("outputs")) ++listed[e.path().parent_path() / o.get<std::string>()];
    }
    for (const auto& f : files) CHECK_MESSAGE(listed[f] == 1, f.string());
    for (const auto& [f, n] : listed) CHECK_MESSAGE(files.count(f) == 1, "listed but missing: " << f.string());
}

int cli(const std::string& args, const fs::path& capture) {
    const std::string cmd = std::string(TTNQ_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal document resolves defaults") {
    const auto spec = experiment(json::object());
    CHECK(spec.quench.dt == 0.005);
    CHECK(spec.quench.krylov_tol == 1e-12);
    CHECK(spec.quench.hybrid_n == 10);
    CHECK(spec.engine == Engine::ttn);
    const json echoed = json::parse(echo_config(spec));
    CHECK(echoed.at("quench").at("dt") == 0.005);
    CHECK(echoed.at("pattern").at("kind") == "polarized");

    const auto with_spectrum =
        experiment({{"quench", {{"t_max", 60.0}}}, {"analysis", {{"spectrum", json::object()}}}});
    CHECK(config_error({{"analysis", {{"spectrum", json::object()}}}}).find("t_end") != std::string::npos);
    CHECK(json::parse(echo_config(with_spectrum)).at("analysis").at("spectrum").at("window") == "hamming");
    // The echo parses back to the same document.
    CHECK(echo_config(experiment(json::parse(echo_config(with_spectrum)))) == echo_config(with_spectrum));
}

TEST_CASE("config validation") {
    CHECK(config_error({{"engine", "oracle"}, {"lattice", {{"rows", 16}, {"cols", 16}}}}).find("20") != std::string::npos);
    CHECK(config_error({{"engine", "oracle"}, {"lattice", {{"rows", 4}, {"cols", 5}}}}).empty());
    CHECK(config_error({{"quench", {{"chii", 32}}}}).find("chii") != std::string::npos);
    CHECK(config_error({{"outputs", json::object()}}).find("outputs") != std::string::npos);
    CHECK(config_error({{"quench", {{"dt", -1}}}}) != "");
    CHECK(config_error({{"quench", {{"chi", "big"}}}}).find("quench.chi") != std::string::npos);
    CHECK(config_error({{"pattern", {{"kind", "stripe"}}}}).find("interface_col") != std::string::npos);
    CHECK(config_error({{"pattern", {{"kind", "custom"}, {"bitmask", "0101"}}}}) != "");
    CHECK(config_error({{"lattice", {{"rows", 0}}}}) != "");
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK(config_error({{"sweep", {{"axis", "chi"}, {"values", {16, 16}}}}}).find("monotone") != std::string::npos);
    CHECK(config_error({{"sweep", {{"axis", "chi"}, {"values", json::array()}}}}) != "");
    CHECK(config_error({{"sweep", {{"axis", "chi"}, {"values", {8.5}}}}}) != "");
    CHECK(config_error({{"quench", {{"t_max", 1.0}}}, {"sweep", {{"axis", "dt"}, {"values", {0.3}}}}}) != "");
    CHECK(config_error({{"sweep", {{"axis", "chi"}, {"values", {8, 16}}, {"reference", 32}}}}) != "");

    const auto s = sweep({{"sweep", {{"axis", "chi"}, {"values", {64, 32, 16}}}}});
    CHECK(s.reference == 0u);
    const auto d = sweep({{"quench", {{"t_max", 1.0}}}, {"sweep", {{"axis", "dt"}, {"values", {0.1, 0.05}}}}});
    CHECK(d.reference == 1u);
    const auto o = sweep({{"sweep", {{"axis", "g"}, {"values", {0.1, 0.2}}, {"reference", "oracle"}}}});
    CHECK(o.oracle_reference);
}

TEST_CASE("oracle run starts polarized and is reproducible") {
    const fs::path a = scratch("oracle_a"), b = scratch("oracle_b");
    json doc = {{"engine", "oracle"},
                {"lattice", {{"rows", 4}, {"cols", 4}}},
                {"quench", {{"g", 0.5}, {"t_max", 4.0}, {"measure_every", 20}}},
                {"observables", {{"correlations", {{{"anchor", {1, 1}}, {"direction", "col"}}}}}},
                {"output", {{"dir", a.string()}}}};
    REQUIRE(run_experiment(experiment(doc)).ok);
    doc["output"]["dir"] = b.string();
    REQUIRE(run_experiment(experiment(doc)).ok);

    const auto f = load(a / "series.ndjson");
    REQUIRE(f.series.samples.size() == 41);
    for (double m : f.series.samples.front().magnetization) CHECK(m == -1.0);
    CHECK(f.series.samples.back().t == doctest::Approx(4.0));
    CHECK(f.series.samples.back().magnetization[0] > -1.0);

    for (const char* name : {"series.ndjson", "checkpoint.bin", "correlations_0.txt"})
        CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
    const json m = read_json(a / "manifest.json");
    CHECK(m.at("status") == "ok");
    CHECK(m.at("engine") == "oracle");
    CHECK(m.at("config_hash").get<std::string>().size() == 16);
    CHECK(m.at("config_hash") == read_json(b / "manifest.json").at("config_hash"));
    for (const char* key : {"seed", "version", "wall_seconds", "peak_rss_kb", "units", "mapping", "pattern"})
        CHECK_MESSAGE(m.contains(key), key);
    check_manifest_coverage(a);
}

TEST_CASE("ttn run is reproducible with noise and a seed") {
    const fs::path a = scratch("ttn_a"), b = scratch("ttn_b");
    json doc = small_doc(a);
    doc["quench"]["mode"] = "hybrid";
    doc["quench"]["hybrid_n"] = 3;
    doc["quench"]["chi"] = 8;
    doc["quench"]["noise"] = 1e-6;
    doc["quench"]["seed"] = 42;
    REQUIRE(run_experiment(experiment(doc)).ok);
    doc["output"]["dir"] = b.string();
    REQUIRE(run_experiment(experiment(doc)).ok);
    CHECK(slurp(a / "series.ndjson") == slurp(b / "series.ndjson"));
    CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
    const auto f = load(a / "series.ndjson");
    CHECK(f.series.samples.size() == 21);
    CHECK(f.header.entropy_labels.size() == 1);
    check_manifest_coverage(a);
}

TEST_CASE("stripe on a 16-column cylinder names the interface") {
    const fs::path dir = scratch("stripe");
    const json doc = {{"lattice", {{"rows", 8}, {"cols", 16}, {"boundary_cols", "open"}}},
                      {"pattern", {{"kind", "stripe"}, {"interface_col", 7}}},
                      {"quench", {{"g", 0.3}, {"t_max", 0.0}}},
                      {"output", {{"dir", dir.string()}}}};
    REQUIRE(run_experiment(experiment(doc)).ok);
    const json m = read_json(dir / "manifest.json");
    CHECK(m.at("pattern").get<std::string>().find("interface between columns 7 and 8") != std::string::npos);
    const auto f = load(dir / "series.ndjson");
    const Lattice lat(8, 16, Boundary::periodic, Boundary::open);
    const auto& mz = f.series.samples.front().magnetization;
    CHECK(mz[lat.index({3, 7})] == -1.0);
    CHECK(mz[lat.index({3, 8})] == 1.0);
}

TEST_CASE("analyses are written next to the series") {
    const fs::path dir = scratch("analyses");
    json doc = small_doc(dir);
    doc["quench"]["t_max"] = 3.0;
    doc["analysis"] = {{"spectrum", {{"site", {0, 1}}, {"t_start", 0.5}, {"t_end", 3.0}}},
                       {"front_fit", {{"anchor", {0, 0}}, {"direction", "row"}, {"threshold", 1e-3}}}};
    const auto spec = experiment(doc);
    CHECK(spec.quench.observables.correlations.size() == 2);  // front fit adds its own cut
    REQUIRE(run_experiment(spec).ok);
    std::ifstream sp(dir / "spectrum.txt");
    CHECK(read_spectrum(sp).frequencies.size() == 26);
    const json fit = read_json(dir / "front_fit.json");
    CHECK(fit.at("reference_4g") == 2.0);
    CHECK(fit.contains("passages"));
    check_manifest_coverage(dir);
}

TEST_CASE("failed run keeps its partial outputs") {
    const fs::path dir = scratch("failed");
    json doc = small_doc(dir);
    doc["quench"]["g"] = 1e300;
    const auto res = run_experiment(experiment(doc));
    CHECK_FALSE(res.ok);
    CHECK_FALSE(res.error.empty());
    const json m = read_json(dir / "manifest.json");
    CHECK(m.at("status") == "failed");
    CHECK(m.at("error").get<std::string>() == res.error);
    const auto f = load(dir / "series.ndjson");
    CHECK(f.series.samples.size() == 1);
    REQUIRE(f.series.error);
    CHECK(fs::exists(dir / "checkpoint.bin"));
    check_manifest_coverage(dir);
}

TEST_CASE("a torn final line leaves a readable prefix") {
    const fs::path dir = scratch("torn");
    REQUIRE(run_experiment(experiment(small_doc(dir))).ok);
    std::string text = slurp(dir / "series.ndjson");
    text.resize(text.size() - 40);
    std::istringstream in(text);
    const auto f = read_series(in);
    CHECK(f.series.samples.size() == 20);
    CHECK(f.series.samples.back().t == doctest::Approx(0.95));
}

TEST_CASE("chi sweep at full rank has no deviation") {
    const fs::path dir = scratch("chi_sweep");
    json doc = small_doc(dir);
    doc["sweep"] = {{"axis", "chi"}, {"values", {16, 24, 32}}};
    const auto res = run_sweep(sweep(doc));
    CHECK(res.member_ok == std::vector<bool>{true, true, true});
    std::ifstream in(res.table);
    std::string line;
    std::size_t rows = 0;
    std::set<std::string> observables;
    double worst = 0.0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string value, obs;
        double t = 0, d = 0;
        ls >> value >> t >> obs >> d;
        observables.insert(obs);
        worst = std::max(worst, d);
        ++rows;
    }
    CHECK(rows > 0);
    CHECK(worst <= 1e-8);
    for (const char* o : {"mz[0,0]", "mz_max", "energy", "norm", "S[sites:0,0:0,1]", "C0[0,2]"})
        CHECK_MESSAGE(observables.count(o) == 1, o);
    for (int k = 0; k < 3; ++k) CHECK(fs::exists(dir / ("member_0" + std::to_string(k)) / "manifest.json"));
    check_manifest_coverage(dir);
}

TEST_CASE("g sweep writes one manifest per member, in parallel too") {
    const fs::path dir = scratch("g_sweep");
    json doc = small_doc(dir);
    doc["quench"]["t_max"] = 0.2;
    doc["sweep"] = {{"axis", "g"}, {"values", {0.1, 0.2, 0.4}}};
    ::setenv("TTNQ_WORKERS", "2", 1);
    const auto res = run_sweep(sweep(doc));
    ::unsetenv("TTNQ_WORKERS");
    CHECK(res.member_ok == std::vector<bool>{true, true, true});
    const json m = read_json(dir / "manifest.json");
    REQUIRE(m.at("members").size() == 3);
    for (int k = 0; k < 3; ++k) {
        const json mm = read_json(dir / ("member_0" + std::to_string(k)) / "manifest.json");
        CHECK(mm.at("status") == "ok");
        const json cfg = read_json(dir / ("member_0" + std::to_string(k)) / "config.json");
        CHECK(cfg.at("quench").at("g") == doc["sweep"]["values"][k]);
    }
    check_manifest_coverage(dir);
}

TEST_CASE("dt sweep against the oracle at full rank") {
    const fs::path dir = scratch("dt_sweep");
    json doc = small_doc(dir);
    doc["quench"]["chi"] = 16;
    doc["sweep"] = {{"axis", "dt"}, {"values", {0.1, 0.05}}, {"reference", "oracle"}};
    const auto res = run_sweep(sweep(doc));
    CHECK(res.member_ok == std::vector<bool>{true, true});
    CHECK(fs::exists(dir / "reference_oracle" / "manifest.json"));
    std::ifstream in(res.table);
    std::string line;
    std::map<std::string, double> worst;
    std::set<double> times;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string value, obs;
        double t = 0, d = 0;
        ls >> value >> t >> obs >> d;
        worst[value] = std::max(worst[value], d);
        if (value == "0.1") times.insert(t);
    }
    CHECK(times.size() == 11);
    REQUIRE(worst.size() == 2);
    for (const auto& [v, d] : worst) CHECK_MESSAGE(d < 1e-8, v);
    check_manifest_coverage(dir);
}

TEST_CASE("failed members are recorded and the sweep continues") {
    const fs::path dir = scratch("bad_member");
    json doc = small_doc(dir);
    doc["sweep"] = {{"axis", "g"}, {"values", {0.1, 1e300}}};
    const auto res = run_sweep(sweep(doc));
    CHECK(res.member_ok == std::vector<bool>{true, false});
    CHECK(slurp(res.table).find("# member 1e+300 failed") != std::string::npos);
    CHECK(read_json(dir / "manifest.json").at("status") == "failed");
}

TEST_CASE("command line") {
    const fs::path dir = scratch("cli");
    const fs::path out = dir / "stdout.txt";
    {
        std::ofstream cfg(dir / "bad.json");
        cfg << R"({"quench": {"chii": 4}})";
    }
    CHECK(cli("check-config " + (dir / "bad.json").string(), out) == 2);
    CHECK(slurp(out).find("chii") != std::string::npos);
    CHECK(cli("check-config " + (dir / "missing.json").string(), out) != 0);

    {
        std::ofstream cfg(dir / "run.json");
        cfg << small_doc(dir / "ignored").dump();
    }
    CHECK(cli("check-config " + (dir / "run.json").string() + " --set quench.chi=64", out) == 0);
    CHECK(json::parse(slurp(out)).at("quench").at("chi") == 64);
    CHECK(cli("run " + (dir / "run.json").string() + " --set quench.t_max=2 -o " + (dir / "run").string(), out) == 0);
    CHECK(read_json(dir / "run" / "manifest.json").at("status") == "ok");
    CHECK_FALSE(fs::exists(dir / "ignored"));
    CHECK(cli("run " + (dir / "run.json").string() + " --set quench.g=1e300 -o " + (dir / "blowup").string(), out) == 1);
    CHECK(cli("sweep " + (dir / "run.json").string(), out) == 2);

    const std::string series = (dir / "run" / "series.ndjson").string();
    CHECK(cli("spectrum " + series + " --site 0,1 --t-start 0 --t-end 2 -o " + (dir / "s.txt").string(), out) == 0);
    CHECK(cli("peaks " + (dir / "s.txt").string(), out) == 0);
    CHECK(cli("front-fit " + series + " --anchor 0,1 --direction row --threshold 1e-4", out) == 0);
    CHECK(slurp(out).find("slope") != std::string::npos);

    CHECK(cli("counts -N 4", out) == 0);
    const std::string counts = slurp(out);
    CHECK(counts.find("psi2_neighbor 32") != std::string::npos);
    CHECK(counts.find("psi3_disconnected 256") != std::string::npos);
    CHECK(cli("perturb -N 16 -J 1 -g 0.5", out) == 0);
    CHECK(slurp(out).find("delta01 7.8125") != std::string::npos);
    CHECK(cli("counts -N 2", out) == 1);
    CHECK(cli("map-dump --rows 4 --cols 4 --table", out) == 0);
    CHECK(slurp(out).find("# mapping hilbert") == 0);
    CHECK(cli("--version", out) == 0);
    CHECK(cli("frobnicate", out) != 0);
}
