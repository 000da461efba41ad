#pragma once

// Uniformly sampled signals and their CSV form:
//
//   # sample_rate=<Hz> t0=<s> kind=<kind>
//   t,value            (real)
//   t,re,im            (complex)

#include "bpsim/error.hpp"
#include "bpsim/params.hpp"

#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace bpsim {

enum class SeriesKind { field, voltage, phase, magnetic };

inline const char* to_string(SeriesKind k) {
    switch (k) {
        case SeriesKind::field: return "field";
        case SeriesKind::voltage: return "voltage";
        case SeriesKind::phase: return "phase";
        case SeriesKind::magnetic: return "magnetic";
    }
    return "?";
}

inline SeriesKind series_kind_from(const std::string& s) {
    if (s == "field") return SeriesKind::field;
    if (s == "voltage") return SeriesKind::voltage;
    if (s == "phase") return SeriesKind::phase;
    if (s == "magnetic") return SeriesKind::magnetic;
    throw ConfigError("unknown series kind '" + s + "'");
}

template <typename T>
struct TimeSeries {
    static_assert(std::is_same_v<T, double> || std::is_same_v<T, std::complex<double>>);
    static constexpr bool is_complex = std::is_same_v<T, std::complex<double>>;

    std::vector<T> samples;
    double sample_rate = 1.0;  // Hz
    double t0 = 0.0;           // s
    SeriesKind kind = SeriesKind::field;

    TimeSeries() = default;
    TimeSeries(std::vector<T> s, double rate, double start, SeriesKind k)
        : samples(std::move(s)), sample_rate(rate), t0(start), kind(k) {}

    std::size_t size() const { return samples.size(); }
    double dt() const { return 1.0 / sample_rate; }
    double time(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

    void validate() const {
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw ConfigError("sample_rate must be > 0");
        if (samples.size() < 2) throw ConfigError("time series needs at least 2 samples");
    }

    /// Contiguous sub-range [first, first + count).
    TimeSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > samples.size()) throw ConfigError("slice out of range");
        return TimeSeries(std::vector<T>(samples.begin() + first, samples.begin() + first + count), sample_rate,
                          time(first), kind);
    }
};

using RealSeries = TimeSeries<double>;
using ComplexSeries = TimeSeries<std::complex<double>>;

template <typename T>
void write_csv(std::ostream& out, const TimeSeries<T>& ts) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# sample_rate=%.17g t0=%.17g kind=%s\n", ts.sample_rate, ts.t0,
                  to_string(ts.kind));
    out << buf;
    out << (TimeSeries<T>::is_complex ? "t,re,im\n" : "t,value\n");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if constexpr (TimeSeries<T>::is_complex) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", ts.time(i), ts.samples[i].real(),
                          ts.samples[i].imag());
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", ts.time(i), ts.samples[i]);
        }
        out << buf;
    }
}

template <typename T>
TimeSeries<T> read_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ", 0) != 0) throw ConfigError("missing series header");
    TimeSeries<T> ts;
    std::istringstream hs(header.substr(2));
    std::string field;
    bool have_rate = false;
    while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ConfigError("bad header field '" + field + "'");
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "sample_rate") {
            ts.sample_rate = std::stod(value);
            have_rate = true;
        } else if (key == "t0") {
            ts.t0 = std::stod(value);
        } else if (key == "kind") {
            ts.kind = series_kind_from(value);
        }
    }
    if (!have_rate) throw ConfigError("header lacks sample_rate");
    std::string line;
    std::getline(in, line);  // column names
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
        if constexpr (TimeSeries<T>::is_complex) {
            if (cells.size() != 3) throw ConfigError("complex series row needs 3 columns");
            ts.samples.emplace_back(cells[1], cells[2]);
        } else {
            if (cells.size() != 2) throw ConfigError("real series row needs 2 columns");
            ts.samples.push_back(cells[1]);
        }
    }
    ts.validate();
    return ts;
}

template <typename T>
void save_csv(const std::string& path, const TimeSeries<T>& ts) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_csv(out, ts);
}

}  // namespace bpsim
