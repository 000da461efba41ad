#pragma once

// System parameters of the spin-ensemble / self-oscillator hybrid, the
// physical constants they depend on, named presets, and the flat key-value
// text format used by config files.
//
// Every rate and frequency stored here is an angular frequency in rad/s.
// Conversions from ordinary frequency happen at the boundary (config parsing,
// CLI flags, reports) and nowhere else.

#include "bpsim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bpsim {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kElectronGyro = 28.0e9;          // Hz/T, NV electron spin
inline constexpr double kNvCarrierHz = 2.87e9;           // microwave carrier

constexpr double hz_to_rad(double f_hz) { return kTwoPi * f_hz; }
constexpr double rad_to_hz(double w) { return w / kTwoPi; }

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts / 1e-3); }

struct HyperfineLine {
    double detuning = 0.0;  // rad/s, relative to the ensemble centre
    double weight = 1.0;
};

/// Physical rates of the hybrid system. One record, passed by value.
struct SystemParams {
    double omega_c = 0.0;         // cavity frequency (frame origin)
    double delta_s = 0.0;         // spin-cavity detuning omega_s - omega_c
    double kappa = 0.0;           // total cavity loss
    double kappa_c1 = 0.0;        // probe port
    double kappa_c2 = 0.0;        // loop port
    double gain = 0.0;            // one-photon loop gain G
    double gamma_s = 0.0;         // two-photon saturation, rad/s per photon
    double g = 0.0;               // collective coupling
    double gamma_spin = 0.0;      // spin linewidth Gamma
    double loop_phase = 0.0;      // residual loop phase, rad
    double delta_g_offset = 0.0;  // xi in delta_g = Gamma/2 - g - xi
    std::vector<HyperfineLine> hyperfine{{0.0, 1.0}};
    double temperature = 290.0;   // K
    double power = 1e-7;          // steady oscillating power, W
    double p_sat = 1e-7;          // spin saturation power, W

    double omega_s() const { return omega_c + delta_s; }
    double half_spin_width() const { return 0.5 * gamma_spin; }

    /// Distance from the bistable transition point; negative inside the
    /// bistable phase. Every reported delta_g goes through here.
    double delta_g() const { return 0.5 * gamma_spin - g - delta_g_offset; }

    /// Copy with the coupling moved so that delta_g() == dg.
    SystemParams with_delta_g(double dg) const {
        SystemParams p = *this;
        p.g = 0.5 * gamma_spin - delta_g_offset - dg;
        return p;
    }

    SystemParams with_delta_s(double ds) const {
        SystemParams p = *this;
        p.delta_s = ds;
        return p;
    }

    double cooperativity() const { return 4.0 * g * g / (kappa * gamma_spin); }

    /// Throws ConfigError when a type invariant is broken.
    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError(m); };
        auto finite = [](double v) { return std::isfinite(v); };
        for (double v : {omega_c, delta_s, kappa, kappa_c1, kappa_c2, gain, gamma_s, g, gamma_spin,
                         loop_phase, delta_g_offset, temperature, power, p_sat}) {
            if (!finite(v)) fail("non-finite parameter");
        }
        if (kappa_c1 < 0.0 || kappa_c2 < 0.0) fail("port coupling rates must be >= 0");
        if (!(kappa_c1 + kappa_c2 > 0.0)) fail("kappa_c1 + kappa_c2 must be > 0");
        if (kappa < kappa_c1 + kappa_c2) fail("kappa must be >= kappa_c1 + kappa_c2");
        if (!(gamma_spin > 0.0)) fail("gamma_spin must be > 0");
        if (!(gamma_s > 0.0)) fail("gamma_s must be > 0");
        if (g < 0.0) fail("g must be >= 0");
        if (temperature < 0.0) fail("temperature must be >= 0");
        if (power < 0.0) fail("power must be >= 0");
        if (!(p_sat > 0.0)) fail("p_sat must be > 0");
        if (hyperfine.empty()) fail("hyperfine list is empty");
        double sum = 0.0;
        for (const auto& line : hyperfine) {
            if (!finite(line.detuning) || !(line.weight >= 0.0)) fail("bad hyperfine line");
            sum += line.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9) fail("hyperfine weights must sum to 1");
    }
};

/// Mean thermal photon occupation at the carrier.
inline double thermal_occupation(double temperature, double carrier_hz = kNvCarrierHz) {
    if (temperature <= 0.0) return 0.0;
    const double x = kHbar * hz_to_rad(carrier_hz) / (kBoltzmann * temperature);
    return 1.0 / std::expm1(x);
}

/// Intracavity photon number that carries `power` out through the loop port.
inline double photon_number_for_power(const SystemParams& p, double power,
                                      double carrier_hz = kNvCarrierHz) {
    return power / (kHbar * hz_to_rad(carrier_hz) * p.kappa_c2);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace detail {

inline SystemParams base_rates() {
    SystemParams p;
    p.kappa = hz_to_rad(320e3);
    p.kappa_c1 = hz_to_rad(130e3);
    p.kappa_c2 = hz_to_rad(50e3);
    p.g = hz_to_rad(0.22e6);
    p.temperature = 290.0;
    return p;
}

/// gamma_s such that a state with net saturation rate `x` holds the photon
/// number that radiates `power`.
inline double gamma_s_for(const SystemParams& p, double x, double power) {
    return x / photon_number_for_power(p, power);
}

}  // namespace detail

/// Fits of the hysteresis and linear spectra (spin linewidth 0.315 MHz).
/// Loop phase zeroed so the BP sits at delta_g = 0.
inline SystemParams preset_fig23() {
    SystemParams p = detail::base_rates();
    p.gamma_spin = hz_to_rad(0.315e6);
    p.gain = 0.5 * p.kappa + hz_to_rad(400e3);
    p.power = dbm_to_watts(-40.0);
    // On the outer branches at delta_s = 0 the spin absorption equals Gamma/2.
    p.gamma_s = detail::gamma_s_for(p, p.gain - 0.5 * p.kappa - p.half_spin_width(), p.power);
    // Coupling halves in power at P_sat; this value puts the BP at -42.5 dBm.
    const double g_bp = p.half_spin_width();
    p.p_sat = dbm_to_watts(-42.5) / ((p.g / g_bp) * (p.g / g_bp) - 1.0);
    return p;
}

/// Magnetometry fit (spin linewidth 0.301 MHz). Gain margin set so the
/// noise enhancement at delta_g = 2pi*0.6 kHz matches the observed N = 8.
inline SystemParams preset_fig4() {
    SystemParams p = detail::base_rates();
    p.gamma_spin = hz_to_rad(0.301e6);
    p.gain = 0.5 * p.kappa + hz_to_rad(251.26e3);
    p.power = dbm_to_watts(-40.5);
    const double g_bp = p.half_spin_width();
    p.gamma_s = detail::gamma_s_for(p, p.gain - 0.5 * p.kappa - g_bp, p.power);
    p.p_sat = dbm_to_watts(-42.5) / ((p.g / g_bp) * (p.g / g_bp) - 1.0);
    return p;
}

/// fig23 with the cavity linewidth read off the self-oscillation comparison
/// (2pi*260 kHz instead of the default 320 kHz).
inline SystemParams preset_fig2c() {
    SystemParams p = preset_fig23();
    p.kappa = hz_to_rad(260e3);
    return p;
}

/// Three 14N hyperfine sub-ensembles split by 2pi*2.1 MHz, equal weight.
inline std::vector<HyperfineLine> nitrogen14_triplet() {
    const double a = hz_to_rad(2.1e6);
    return {{-a, 1.0 / 3.0}, {0.0, 1.0 / 3.0}, {a, 1.0 / 3.0}};
}

inline std::optional<SystemParams> preset_by_name(std::string_view name) {
    if (name == "fig23") return preset_fig23();
    if (name == "fig4") return preset_fig4();
    if (name == "fig2c") return preset_fig2c();
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Key-value text format
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_number(std::string_view s) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

enum class Quantity { rate, phase, temperature, power, plain };

/// Parses "<number>[ unit]". Rates accept Hz/kHz/MHz/GHz (converted by 2pi)
/// or rad/s; power accepts W/mW/uW or dBm.
inline double parse_quantity(const std::string& text, Quantity q) {
    std::string s = trim(text);
    std::size_t split = s.size();
    // number ends at the first alphabetic character that is not an exponent
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        const bool exp_char = (c == 'e' || c == 'E') && i > 0 &&
                              (std::isdigit(static_cast<unsigned char>(s[i - 1])) || s[i - 1] == '.') &&
                              i + 1 < s.size() &&
                              (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '-' ||
                               s[i + 1] == '+');
        if ((std::isalpha(static_cast<unsigned char>(c)) && !exp_char) || c == ' ') {
            split = i;
            break;
        }
    }
    const auto num = parse_number(trim(std::string_view(s).substr(0, split)));
    if (!num) throw ConfigError("cannot parse number in '" + text + "'");
    const std::string unit = trim(std::string_view(s).substr(split));
    const double v = *num;
    if (unit.empty()) return v;
    switch (q) {
        case Quantity::rate:
            if (unit == "rad/s") return v;
            if (unit == "Hz") return hz_to_rad(v);
            if (unit == "kHz") return hz_to_rad(v * 1e3);
            if (unit == "MHz") return hz_to_rad(v * 1e6);
            if (unit == "GHz") return hz_to_rad(v * 1e9);
            break;
        case Quantity::power:
            if (unit == "W") return v;
            if (unit == "mW") return v * 1e-3;
            if (unit == "uW") return v * 1e-6;
            if (unit == "dBm") return dbm_to_watts(v);
            break;
        case Quantity::temperature:
            if (unit == "K") return v;
            break;
        case Quantity::phase:
            if (unit == "rad") return v;
            if (unit == "deg") return v * std::numbers::pi / 180.0;
            break;
        case Quantity::plain:
            break;
    }
    throw ConfigError("unit '" + unit + "' not allowed in '" + text + "'");
}

struct Field {
    Quantity quantity;
    std::function<double&(SystemParams&)> ref;
};

inline const std::map<std::string, Field, std::less<>>& scalar_fields() {
    static const std::map<std::string, Field, std::less<>> fields = {
        {"omega_c", {Quantity::rate, [](SystemParams& p) -> double& { return p.omega_c; }}},
        {"delta_s", {Quantity::rate, [](SystemParams& p) -> double& { return p.delta_s; }}},
        {"kappa", {Quantity::rate, [](SystemParams& p) -> double& { return p.kappa; }}},
        {"kappa_c1", {Quantity::rate, [](SystemParams& p) -> double& { return p.kappa_c1; }}},
        {"kappa_c2", {Quantity::rate, [](SystemParams& p) -> double& { return p.kappa_c2; }}},
        {"gain", {Quantity::rate, [](SystemParams& p) -> double& { return p.gain; }}},
        {"gamma_s", {Quantity::rate, [](SystemParams& p) -> double& { return p.gamma_s; }}},
        {"g", {Quantity::rate, [](SystemParams& p) -> double& { return p.g; }}},
        {"gamma_spin", {Quantity::rate, [](SystemParams& p) -> double& { return p.gamma_spin; }}},
        {"loop_phase", {Quantity::phase, [](SystemParams& p) -> double& { return p.loop_phase; }}},
        {"delta_g_offset", {Quantity::rate, [](SystemParams& p) -> double& { return p.delta_g_offset; }}},
        {"temperature", {Quantity::temperature, [](SystemParams& p) -> double& { return p.temperature; }}},
        {"power", {Quantity::power, [](SystemParams& p) -> double& { return p.power; }}},
        {"p_sat", {Quantity::power, [](SystemParams& p) -> double& { return p.p_sat; }}},
    };
    return fields;
}

inline std::vector<HyperfineLine> parse_hyperfine(const std::string& value) {
    std::vector<HyperfineLine> lines;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("hyperfine entry needs 'detuning:weight'");
        HyperfineLine line;
        line.detuning = parse_quantity(item.substr(0, colon), Quantity::rate);
        line.weight = parse_quantity(item.substr(colon + 1), Quantity::plain);
        lines.push_back(line);
    }
    if (lines.empty()) throw ConfigError("empty hyperfine list");
    return lines;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Sets one field from its text form. Unknown keys throw ConfigError.
inline void set_param(SystemParams& p, std::string_view key, const std::string& value) {
    if (key == "hyperfine") {
        p.hyperfine = detail::parse_hyperfine(value);
        return;
    }
    if (key == "preset") {
        throw ConfigError("'preset' is only valid as the first entry of a params file");
    }
    const auto& fields = detail::scalar_fields();
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown parameter '" + std::string(key) + "'");
    it->second.ref(p) = detail::parse_quantity(value, it->second.quantity);
}

/// Parses `key = value` lines; `#` starts a comment. A leading
/// `preset = <name>` seeds the record from a named preset, otherwise it
/// starts from fig23. Errors carry the 1-based line number.
inline SystemParams parse_params(std::istream& in, const std::string& source = "<params>") {
    SystemParams p = preset_fig23();
    std::string raw;
    int line_no = 0;
    bool seen_entry = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + "empty key or value");
        try {
            if (key == "preset") {
                if (seen_entry) throw ConfigError("'preset' must come first");
                const auto preset = preset_by_name(value);
                if (!preset) throw ConfigError("unknown preset '" + value + "'");
                p = *preset;
            } else {
                set_param(p, key, value);
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
        seen_entry = true;
    }
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return p;
}

inline SystemParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open params file '" + path + "'");
    return parse_params(in, path);
}

/// Plain SI text, round-trips through parse_params bit-exactly.
inline std::string format_params(const SystemParams& p) {
    std::ostringstream out;
    out << "# bpsim system parameters (SI: rad/s, W, K, rad)\n";
    SystemParams copy = p;
    for (const auto& [key, field] : detail::scalar_fields()) {
        out << key << " = " << detail::format_double(field.ref(copy)) << '\n';
    }
    out << "hyperfine = ";
    for (std::size_t i = 0; i < p.hyperfine.size(); ++i) {
        if (i) out << ", ";
        out << detail::format_double(p.hyperfine[i].detuning) << ':'
            << detail::format_double(p.hyperfine[i].weight);
    }
    out << '\n';
    return out.str();
}

}  // namespace bpsim
