#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ttnq/analysis.hpp"
#include "ttnq/lattice.hpp"
#include "ttnq/model.hpp"
#include "ttnq/tdvp.hpp"

namespace ttnq {

enum class Engine { ttn, oracle };

std::string to_string(Engine e);
Engine engine_from_string(const std::string& s);

struct PatternSpec {
    PatternKind kind;
    std::string file;  // when set, the pattern is read from this text file
};

struct OutputSpec {
    std::string dir = "out";
    std::string series = "series.ndjson";
    std::string checkpoint = "checkpoint.bin";
    double checkpoint_seconds = 0.0;  // 0: only the final checkpoint
    bool correlation_matrices = true;
};

struct SpectrumRequest {
    Coord site;
    double t_start = 10.0;
    double t_end = 60.0;
    Window window = Window::hamming;
    bool remove_mean = true;
    double min_prominence = 0.05;
};

struct FrontFitRequest {
    Coord anchor;
    CutDirection direction = CutDirection::col;
    double threshold = 0.01;
};

struct ExperimentSpec {
    Lattice lattice;
    PatternSpec pattern;
    QuenchConfig quench;
    Engine engine = Engine::ttn;
    OutputSpec output;
    std::optional<SpectrumRequest> spectrum;
    std::optional<FrontFitRequest> front_fit;
};

enum class SweepAxis { chi, g, dt };

std::string to_string(SweepAxis a);

struct SweepSpec {
    ExperimentSpec base;
    SweepAxis axis = SweepAxis::chi;
    std::vector<double> values;
    /// Index into values, or empty when the reference is an oracle run.
    std::optional<std::size_t> reference;
    bool oracle_reference = false;
};

using ParsedConfig = std::variant<ExperimentSpec, SweepSpec>;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a JSON document. Unknown keys, bad values and geometry violations
/// throw ConfigError naming the offending key.
ParsedConfig parse_config(std::string_view text);

/// The fully resolved document, defaults included.
std::string echo_config(const ExperimentSpec& spec);
std::string echo_config(const SweepSpec& spec);

std::uint64_t fnv1a64(std::string_view bytes);

/// Peak resident set size of this process in kilobytes.
long peak_rss_kb();

SpinPattern resolve_pattern(const ExperimentSpec& spec);

struct RunResult {
    bool ok = true;
    std::string error;
    std::vector<std::string> outputs;  // paths relative to the output directory
};

/// Runs one experiment: streams the time series, writes the final checkpoint,
/// the requested analyses and manifest.json into spec.output.dir.
RunResult run_experiment(const ExperimentSpec& spec);

struct SweepResult {
    std::vector<bool> member_ok;
    std::string table;  // path of the deviation table
};

/// Runs every member in its own subdirectory (TTNQ_WORKERS processes at a
/// time) and writes deviations from the reference in long format.
SweepResult run_sweep(const SweepSpec& spec);

}  // namespace ttnq
