#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ttnq/lattice.hpp"
#include "ttnq/model.hpp"
#include "ttnq/tdvp.hpp"

namespace ttnq {

inline constexpr const char* kSeriesSchema = "ttnq.timeseries/1";

/// First line of a series file; lets readers rebuild correlation-cut sites
/// and label the entropy columns.
struct SeriesHeader {
    std::string engine = "ttn";
    Lattice lattice;
    IsingParams params;
    double dt = 0.0;
    std::size_t measure_every = 1;
    std::vector<std::string> entropy_labels;
    std::vector<CorrelationRequest> correlations;
};

SeriesHeader make_header(const std::string& engine, const Lattice& lat, const QuenchConfig& cfg);

/// Newline-delimited JSON writer: a schema header line, then one line per
/// sample. Each line is written with a single call and flushed, so a killed
/// run leaves a parseable prefix.
class SeriesWriter {
public:
    SeriesWriter(std::ostream& out, SeriesHeader header);
    void write(const Sample& s);
    void write_error(const std::string& message);
    const SeriesHeader& header() const { return header_; }

private:
    void emit(const std::string& line);
    std::ostream& out_;
    SeriesHeader header_;
};

struct SeriesFile {
    SeriesHeader header;
    TimeSeries series;
};

/// Reads a series file. A trailing partial line is ignored; an error record
/// sets series.error.
SeriesFile read_series(std::istream& in);

/// Correlation cuts over time as flat text: "# shape T L", a line naming the
/// cut sites, then T rows of "t C_1 ... C_L".
void write_correlation_matrix(std::ostream& out, const TimeSeries& series, std::size_t request_index);

}  // namespace ttnq
