#pragma once

// Magnetometry signal chain: heterodyne demodulation, phase-to-field
// conversion, effective gyromagnetic ratio, the analytic phase-noise model,
// sensitivity, SNR, and the Leeson bound.

#include "bpsim/error.hpp"
#include "bpsim/model.hpp"
#include "bpsim/params.hpp"
#include "bpsim/spectral.hpp"
#include "bpsim/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace bpsim {

inline constexpr double kGammaE = kElectronGyro;  // Hz/T

// ---------------------------------------------------------------------------
// Hilbert demodulation
// ---------------------------------------------------------------------------

struct Demodulated {
    RealSeries amplitude;  // relative deviation alpha(t) = |z|/V0 - 1
    RealSeries phase;      // rad, unwrapped, omega_i t removed
    double v0 = 0.0;
    double phase_rms = 0.0;             // over the central 90%, mean removed
    double modulation_bandwidth = 0.0;  // Hz, RMS width of the baseband spectrum
    bool validity_warning = false;      // slow-variation assumption violated
    std::string warning;
};

/// Analytic signal by zeroing negative frequencies and doubling positive ones.
inline std::vector<std::complex<double>> analytic_signal(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::complex<double>> x(v.begin(), v.end());
    Fft fwd(n, Fft::forward), inv(n, Fft::backward);
    auto spec = fwd(x);
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n) spec[k] *= 2.0;
        else if (2 * k > n) spec[k] = 0.0;
    }
    auto z = inv(spec);
    for (auto& c : z) c /= static_cast<double>(n);
    return z;
}

/// Phase unwrapping by the standard 2pi-jump rule.
inline std::vector<double> unwrap(const std::vector<double>& wrapped) {
    std::vector<double> out(wrapped.size());
    if (wrapped.empty()) return out;
    double offset = 0.0;
    out[0] = wrapped[0];
    for (std::size_t i = 1; i < wrapped.size(); ++i) {
        const double d = wrapped[i] - wrapped[i - 1];
        if (d > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
        else if (d < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
        out[i] = wrapped[i] + offset;
    }
    return out;
}

/// Central 90% of a series, the part free of FFT edge transients.
inline std::pair<std::size_t, std::size_t> interior_range(std::size_t n) {
    const std::size_t cut = n / 20;
    return {cut, n - cut};
}

/// Splits v(t) = V0 (1 + alpha(t)) cos(omega_i t + phi(t)) into alpha and phi.
/// The record is cut to a whole number of carrier periods so the FFT sees no
/// wrap-around jump; the outputs have that (possibly shorter) length. Never
/// throws for a violated slow-variation assumption; sets validity_warning
/// instead.
inline Demodulated hilbert_demodulate(const RealSeries& input, double omega_i) {
    input.validate();
    const double f_i = omega_i / (2.0 * std::numbers::pi);
    const double bin = input.sample_rate / static_cast<double>(input.size());
    if (!(f_i >= 10.0 * bin) || f_i >= 0.5 * input.sample_rate) {
        throw ConfigError("carrier not resolvable: needs at least 10 bins and to lie below Nyquist");
    }
    const double cycles = std::floor(static_cast<double>(input.size()) * f_i / input.sample_rate);
    const auto keep = std::min<std::size_t>(input.size(),
                                            static_cast<std::size_t>(std::llround(cycles * input.sample_rate / f_i)));
    const RealSeries ts = input.slice(0, keep);
    const auto z = analytic_signal(ts.samples);
    const auto [lo, hi] = interior_range(z.size());

    std::vector<double> mag(z.size()), arg(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        mag[i] = std::abs(z[i]);
        arg[i] = std::arg(z[i]);
    }
    auto phase = unwrap(arg);
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] -= omega_i * (ts.time(i));

    Demodulated out;
    out.v0 = std::accumulate(mag.begin() + lo, mag.begin() + hi, 0.0) / static_cast<double>(hi - lo);
    std::vector<double> alpha(mag.size());
    for (std::size_t i = 0; i < mag.size(); ++i) alpha[i] = mag[i] / out.v0 - 1.0;
    out.amplitude = RealSeries(std::move(alpha), ts.sample_rate, ts.t0, SeriesKind::voltage);
    out.phase = RealSeries(phase, ts.sample_rate, ts.t0, SeriesKind::phase);

    const double mean = std::accumulate(phase.begin() + lo, phase.begin() + hi, 0.0) / static_cast<double>(hi - lo);
    double ss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) ss += (phase[i] - mean) * (phase[i] - mean);
    out.phase_rms = std::sqrt(ss / static_cast<double>(hi - lo));

    // RMS bandwidth of the complex baseband, carrier (DC) included
    std::vector<std::complex<double>> base(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) base[i] = z[i] * std::polar(1.0, -omega_i * ts.time(i));
    const ComplexSeries bb(std::move(base), ts.sample_rate, ts.t0, SeriesKind::voltage);
    const auto spec = psd_two_sided(bb, bb.size(), 0.0, false);
    double p = 0.0, pf2 = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        p += spec.values[k];
        pf2 += spec.values[k] * spec.freqs[k] * spec.freqs[k];
    }
    out.modulation_bandwidth = p > 0.0 ? std::sqrt(pf2 / p) : 0.0;

    if (out.phase_rms > 0.3) {
        out.validity_warning = true;
        out.warning = "phase RMS above 0.3 rad";
    }
    if (out.modulation_bandwidth > 0.1 * f_i) {
        out.validity_warning = true;
        out.warning += std::string(out.warning.empty() ? "" : "; ") + "modulation bandwidth above f_i/10";
    }
    return out;
}

/// B(t) = (1/(2 pi gamma)) dphi/dt with gamma in Hz/T; central differences,
/// one-sided at the ends.
inline RealSeries phase_to_field(const RealSeries& phi, double gamma) {
    phi.validate();
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    const std::size_t n = phi.size();
    const double fs = phi.sample_rate;
    const double scale = 1.0 / (2.0 * std::numbers::pi * gamma);
    std::vector<double> b(n);
    b[0] = (phi.samples[1] - phi.samples[0]) * fs * scale;
    b[n - 1] = (phi.samples[n - 1] - phi.samples[n - 2]) * fs * scale;
    for (std::size_t i = 1; i + 1 < n; ++i) b[i] = 0.5 * (phi.samples[i + 1] - phi.samples[i - 1]) * fs * scale;
    return RealSeries(std::move(b), fs, phi.t0, SeriesKind::magnetic);
}

// ---------------------------------------------------------------------------
// Effective gyromagnetic ratio
// ---------------------------------------------------------------------------

struct GyromagneticEstimate {
    double gamma_eff = 0.0;  // Hz/T
    double S = 0.0;          // gamma_eff / gamma_e
    double tone_peak = 0.0;  // Hz, two-sided Hann peak-bin amplitude of dphi/dt / 2pi
    double tone_snr = 0.0;
};

/// gamma_eff = sqrt(3) / B_t * dphi/dt, with B_t the RMS test field and
/// dphi/dt the two-sided Hann peak-bin amplitude (sqrt of density times bin
/// width) of the instantaneous frequency at f_test. For an on-bin tone that
/// amplitude is RMS/sqrt(3); the main-lobe power is used so off-bin tones
/// read the same.
inline GyromagneticEstimate effective_gyromagnetic(const RealSeries& phi, double b_t, double f_test) {
    if (!(b_t > 0.0)) throw ConfigError("test field must be > 0");
    // instantaneous frequency in Hz
    RealSeries freq = phase_to_field(phi, 1.0);
    freq.kind = SeriesKind::phase;
    const auto [lo, hi] = interior_range(freq.size());
    const RealSeries core = freq.slice(lo, hi - lo);
    const auto s = psd(core, core.size(), 0.0);
    if (f_test <= 0.0 || f_test >= s.freqs.back()) throw ToneNotFound("test frequency outside the spectrum");
    const std::size_t k0 = s.bin_of(f_test);
    const std::size_t lobe = 2;
    if (k0 < lobe + 1 || k0 + lobe + 1 >= s.size()) throw ToneNotFound("test tone too close to the band edge");

    // noise floor: median of nearby bins outside the main lobe
    std::vector<double> side;
    const std::size_t reach = 40;
    for (std::size_t k = (k0 > reach ? k0 - reach : 1); k <= std::min(s.size() - 1, k0 + reach); ++k) {
        if (k + lobe < k0 || k > k0 + lobe) side.push_back(s.values[k]);
    }
    std::nth_element(side.begin(), side.begin() + side.size() / 2, side.end());
    const double floor = side.empty() ? 0.0 : side[side.size() / 2];

    double peak = 0.0, lobe_power = 0.0;
    for (std::size_t k = k0 - lobe; k <= k0 + lobe; ++k) {
        peak = std::max(peak, s.values[k]);
        lobe_power += std::max(s.values[k] - floor, 0.0) * s.resolution_bw;
    }
    GyromagneticEstimate out;
    out.tone_snr = floor > 0.0 ? peak / floor : std::numeric_limits<double>::infinity();
    if (out.tone_snr < 3.0) throw ToneNotFound("tone SNR " + std::to_string(out.tone_snr) + " below 3");
    // one-sided lobe power is the tone variance; the two-sided Hann peak bin
    // holds a third of it
    out.tone_peak = std::sqrt(lobe_power / 3.0);
    out.gamma_eff = std::sqrt(3.0) * out.tone_peak / b_t;
    out.S = out.gamma_eff / kGammaE;
    return out;
}

// ---------------------------------------------------------------------------
// Analytic phase-noise model
// ---------------------------------------------------------------------------

/// (g + dg)^2 / ((g + dg)(g + x) - g^2), x = gamma_s |alpha|^2; unit
/// prefactor, so at dg = 0 the value is g / x.
inline double analytic_phase_noise(double g, double delta_g, double x) {
    const double a = g + delta_g;
    const double denom = a * (g + x) - g * g;
    if (!(denom > 0.0)) throw DenominatorNonpositive("phase-noise denominator " + std::to_string(denom));
    return a * a / denom;
}

/// Same model with g, delta_g and the photon number on the on-resonance
/// (Delta = 0) branch taken from `p`. Requires delta_s == 0.
inline double analytic_phase_noise(const SystemParams& p) {
    if (p.delta_s != 0.0) throw ConfigError("analytic phase noise is defined at delta_s = 0");
    const double n = photon_number_at(p, 0.0);
    return analytic_phase_noise(p.g, p.delta_g(), p.gamma_s * n);
}

// ---------------------------------------------------------------------------
// Sensitivity, SNR, Leeson
// ---------------------------------------------------------------------------

struct BandStatistic {
    double mean = 0.0;
    double std = 0.0;
    std::size_t bins = 0;
};

/// Mean and standard deviation of ASD bins with f_lo <= f <= f_hi.
inline BandStatistic sensitivity(const SpectrumEstimate& asd, double f_lo, double f_hi) {
    if (asd.units != "T/sqrt(Hz)") throw ConfigError("sensitivity needs an ASD in T/sqrt(Hz), got " + asd.units);
    if (asd.size() == 0 || !(f_lo <= f_hi) || f_lo < asd.freqs.front() || f_hi > asd.freqs.back()) {
        throw BandOutOfRange("band outside the spectrum");
    }
    std::vector<double> v;
    for (std::size_t k = 0; k < asd.size(); ++k)
        if (asd.freqs[k] >= f_lo && asd.freqs[k] <= f_hi) v.push_back(asd.values[k]);
    if (v.empty()) throw BandOutOfRange("no bins inside the band");
    BandStatistic out;
    out.bins = v.size();
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return out;
}

/// Mean of the density over [f_centre - width/2, f_centre + width/2]
/// regardless of units.
inline double band_mean(const SpectrumEstimate& s, double f_centre, double width) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (std::abs(s.freqs[k] - f_centre) <= 0.5 * width) {
            sum += s.values[k];
            ++n;
        }
    }
    if (n == 0) throw BandOutOfRange("no bins inside the band");
    return sum / static_cast<double>(n);
}

inline double snr_enhancement(double S, double N) {
    if (!(S > 0.0) || !(N > 0.0)) throw NonPositiveInput("S and N must be > 0");
    return S / N;
}

/// sqrt(3/2) f_L sqrt(k_B T / P) / gamma, in T/sqrt(Hz).
inline double leeson_bound(double f_l, double temperature, double power, double gamma) {
    if (!(f_l > 0.0) || !(temperature > 0.0) || !(power > 0.0) || !(gamma > 0.0)) {
        throw NonPositiveInput("Leeson bound inputs must be > 0");
    }
    return std::sqrt(1.5) * f_l * std::sqrt(kBoltzmann * temperature / power) / gamma;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct MagnetometryReport {
    double gamma_eff = 0.0;          // Hz/T
    double S = 0.0;                  // gamma_eff / gamma_e
    double N = 0.0;                  // noise relative to the detuned reference
    double snr_gain = 0.0;           // S / N
    double sensitivity = 0.0;        // T/sqrt(Hz)
    double sensitivity_std = 0.0;    // T/sqrt(Hz)
    double band_lo = 0.0, band_hi = 0.0;  // Hz

    static MagnetometryReport make(double gamma_eff, double N, BandStatistic sens, double f_lo, double f_hi) {
        MagnetometryReport r;
        r.gamma_eff = gamma_eff;
        r.S = gamma_eff / kGammaE;
        r.N = N;
        r.snr_gain = snr_enhancement(r.S, N);
        r.sensitivity = sens.mean;
        r.sensitivity_std = sens.std;
        r.band_lo = f_lo;
        r.band_hi = f_hi;
        if (!(r.sensitivity > 0.0)) throw NonPositiveInput("sensitivity must be > 0");
        return r;
    }

    std::string to_text() const {
        std::ostringstream out;
        auto line = [&out](const char* key, double v, const char* unit) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%-16s = %.10g", key, v);
            out << buf << (unit[0] ? " " : "") << unit << '\n';
        };
        line("gamma_eff", gamma_eff, "Hz/T");
        line("S", S, "");
        line("N", N, "");
        line("snr_gain", snr_gain, "");
        line("sensitivity", sensitivity, "T/sqrt(Hz)");
        line("sensitivity_std", sensitivity_std, "T/sqrt(Hz)");
        line("band_lo", band_lo, "Hz");
        line("band_hi", band_hi, "Hz");
        return out.str();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["gamma_eff_hz_per_t"] = gamma_eff;
        j["S"] = S;
        j["N"] = N;
        j["snr_gain"] = snr_gain;
        j["sensitivity_t_per_rthz"] = {{"mean", sensitivity}, {"std", sensitivity_std}};
        j["band_hz"] = {band_lo, band_hi};
        return j;
    }
};

}  // namespace bpsim
