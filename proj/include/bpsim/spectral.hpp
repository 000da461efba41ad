#pragma once

// FFT wrapper and Welch spectral estimates.

#include "bpsim/error.hpp"
#include "bpsim/timeseries.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace bpsim {

namespace detail {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// One FFTW plan of fixed size and direction with its own aligned buffer.
class Fft {
public:
    enum Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

    Fft(std::size_t n, Direction dir) : n_(n) {
        if (n == 0) throw ConfigError("FFT size must be > 0");
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, dir, FFTW_ESTIMATE);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft() {
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(buf_);
    }

    std::size_t size() const { return n_; }

    /// Unnormalised transform of `in` (size n) into `out`.
    void execute(const std::complex<double>* in, std::complex<double>* out) {
        std::copy(in, in + n_, reinterpret_cast<std::complex<double>*>(buf_));
        fftw_execute(plan_);
        const auto* b = reinterpret_cast<const std::complex<double>*>(buf_);
        std::copy(b, b + n_, out);
    }

    std::vector<std::complex<double>> operator()(const std::vector<std::complex<double>>& in) {
        if (in.size() != n_) throw ConfigError("FFT input has wrong size");
        std::vector<std::complex<double>> out(n_);
        execute(in.data(), out.data());
        return out;
    }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

struct SpectrumEstimate {
    std::vector<double> freqs;   // Hz, ascending
    std::vector<double> values;  // density
    std::string units;
    double resolution_bw = 0.0;  // Hz, bin spacing
    double enbw = 0.0;           // Hz, equivalent noise bandwidth of the window
    bool two_sided = false;

    std::size_t size() const { return freqs.size(); }

    /// Integral of the density (variance, for a PSD).
    double total_power() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * resolution_bw;
    }

    /// Index of the bin nearest to `f`.
    std::size_t bin_of(double f) const {
        const auto it = std::lower_bound(freqs.begin(), freqs.end(), f);
        if (it == freqs.begin()) return 0;
        if (it == freqs.end()) return freqs.size() - 1;
        const std::size_t i = static_cast<std::size_t>(it - freqs.begin());
        return (f - freqs[i - 1] < freqs[i] - f) ? i - 1 : i;
    }
};

inline const char* psd_units(SeriesKind kind) {
    switch (kind) {
        case SeriesKind::field: return "1/Hz";
        case SeriesKind::voltage: return "V^2/Hz";
        case SeriesKind::phase: return "rad^2/Hz";
        case SeriesKind::magnetic: return "T^2/Hz";
    }
    return "?";
}

inline const char* asd_units(SeriesKind kind) {
    switch (kind) {
        case SeriesKind::field: return "1/sqrt(Hz)";
        case SeriesKind::voltage: return "V/sqrt(Hz)";
        case SeriesKind::phase: return "rad/sqrt(Hz)";
        case SeriesKind::magnetic: return "T/sqrt(Hz)";
    }
    return "?";
}

namespace detail {

/// Welch average of |FFT(window * (segment - mean))|^2, scaled to a density,
/// in FFT bin order.
template <typename T>
std::vector<double> welch_raw(const TimeSeries<T>& ts, std::size_t nseg, double overlap, bool detrend,
                              double& scale_out) {
    ts.validate();
    if (nseg < 2) throw ConfigError("segment_length must be >= 2");
    if (nseg > ts.size()) {
        throw SegmentTooLong("segment_length " + std::to_string(nseg) + " exceeds series length " +
                             std::to_string(ts.size()));
    }
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
    const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(nseg * (1.0 - overlap))));
    const auto w = hann_window(nseg);
    double w2 = 0.0;
    for (double v : w) w2 += v * v;

    Fft fft(nseg, Fft::forward);
    std::vector<std::complex<double>> seg(nseg), spec(nseg);
    std::vector<double> acc(nseg, 0.0);
    std::size_t count = 0;
    for (std::size_t start = 0; start + nseg <= ts.size(); start += hop) {
        std::complex<double> mean = 0.0;
        if (detrend) {
            for (std::size_t i = 0; i < nseg; ++i) mean += ts.samples[start + i];
            mean /= static_cast<double>(nseg);
        }
        for (std::size_t i = 0; i < nseg; ++i) seg[i] = (std::complex<double>(ts.samples[start + i]) - mean) * w[i];
        fft.execute(seg.data(), spec.data());
        for (std::size_t k = 0; k < nseg; ++k) acc[k] += std::norm(spec[k]);
        ++count;
    }
    scale_out = 1.0 / (ts.sample_rate * w2 * static_cast<double>(count));
    for (double& v : acc) v *= scale_out;
    return acc;
}

}  // namespace detail

/// One-sided Welch PSD of a real series (Hann window, mean removed per
/// segment). `overlap` is the fraction of a segment shared with the next.
inline SpectrumEstimate psd(const RealSeries& ts, std::size_t segment_length, double overlap = 0.5) {
    double scale = 0.0;
    const auto raw = detail::welch_raw(ts, segment_length, overlap, true, scale);
    const std::size_t n = segment_length;
    const std::size_t half = n / 2;
    SpectrumEstimate out;
    out.units = psd_units(ts.kind);
    out.resolution_bw = ts.sample_rate / static_cast<double>(n);
    out.enbw = 1.5 * out.resolution_bw;
    for (std::size_t k = 0; k <= half; ++k) {
        const bool unique = (k == 0) || (n % 2 == 0 && k == half);
        out.freqs.push_back(static_cast<double>(k) * out.resolution_bw);
        out.values.push_back(unique ? raw[k] : 2.0 * raw[k]);
    }
    return out;
}

/// Two-sided Welch PSD of a complex series, bins ordered from -fs/2 upward.
/// A complex field's carrier may sit at 0 Hz, so no mean is removed unless
/// asked.
inline SpectrumEstimate psd_two_sided(const ComplexSeries& ts, std::size_t segment_length, double overlap = 0.5,
                                      bool detrend = false) {
    double scale = 0.0;
    const auto raw = detail::welch_raw(ts, segment_length, overlap, detrend, scale);
    const std::size_t n = segment_length;
    SpectrumEstimate out;
    out.units = psd_units(ts.kind);
    out.resolution_bw = ts.sample_rate / static_cast<double>(n);
    out.enbw = 1.5 * out.resolution_bw;
    out.two_sided = true;
    const std::size_t neg = n / 2;  // bins n - neg .. n - 1 are negative
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = (j + n - neg) % n;
        const double f = (k < n - neg) ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
        out.freqs.push_back(f * out.resolution_bw);
        out.values.push_back(raw[k]);
    }
    return out;
}

/// Square root of a PSD, units renamed.
inline SpectrumEstimate to_asd(SpectrumEstimate s, SeriesKind kind) {
    for (double& v : s.values) v = std::sqrt(v);
    s.units = asd_units(kind);
    return s;
}

/// Frequency (Hz, signed) of the strongest line of a complex series from a
/// single Hann-windowed FFT with Gaussian peak interpolation.
inline double dominant_frequency(const ComplexSeries& ts) {
    const auto s = psd_two_sided(ts, ts.size(), 0.0);
    const auto it = std::max_element(s.values.begin(), s.values.end());
    const std::size_t k = static_cast<std::size_t>(it - s.values.begin());
    if (k == 0 || k + 1 >= s.size()) return s.freqs[k];
    const double a = std::log(std::max(s.values[k - 1], 1e-300));
    const double b = std::log(std::max(s.values[k], 1e-300));
    const double c = std::log(std::max(s.values[k + 1], 1e-300));
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
    return s.freqs[k] + std::clamp(shift, -0.5, 0.5) * s.resolution_bw;
}

inline void write_csv(std::ostream& out, const SpectrumEstimate& s) {
    out << "freq_hz,value,units\n";
    char buf[96];
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", s.freqs[i], s.values[i]);
        out << buf << s.units << '\n';
    }
}

}  // namespace bpsim
