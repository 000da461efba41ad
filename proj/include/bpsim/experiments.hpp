#pragma once

// Named reproductions of the figures: each run_* takes an ExperimentSpec and
// returns tables plus summary lines; write_experiment puts them on disk as
// <out>/<name>/<table>.csv, summary.txt and manifest.json.

#include "bpsim/dynamics.hpp"
#include "bpsim/error.hpp"
#include "bpsim/fit.hpp"
#include "bpsim/metrology.hpp"
#include "bpsim/model.hpp"
#include "bpsim/parallel.hpp"
#include "bpsim/params.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#ifndef BPSIM_VERSION
#define BPSIM_VERSION "0.1.0"
#endif

namespace bpsim {

// ---------------------------------------------------------------------------
// Tables and specs
// ---------------------------------------------------------------------------

inline std::string format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    using Cell = std::variant<double, std::string>;

    void add(std::initializer_list<Cell> cells) {
        if (cells.size() != columns.size()) throw ConfigError("row width does not match table '" + name + "'");
        std::vector<std::string> row;
        for (const auto& c : cells) row.push_back(std::holds_alternative<double>(c) ? format_cell(std::get<double>(c))
                                                                                     : std::get<std::string>(c));
        rows.push_back(std::move(row));
    }

    void write_csv(std::ostream& out) const {
        for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
        out << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
            out << '\n';
        }
    }
};

struct ExperimentResult {
    std::string name;
    std::vector<Table> tables;
    std::vector<std::pair<std::string, std::string>> summary;

    void note(const std::string& key, double v) { summary.emplace_back(key, format_cell(v)); }
    void note(const std::string& key, const std::string& v) { summary.emplace_back(key, v); }

    const Table& table(const std::string& n) const {
        for (const auto& t : tables)
            if (t.name == n) return t;
        throw ConfigError("no table '" + n + "'");
    }

    std::string value(const std::string& key) const {
        for (const auto& [k, v] : summary)
            if (k == key) return v;
        throw ConfigError("no summary entry '" + key + "'");
    }

    double number(const std::string& key) const { return std::stod(value(key)); }
};

/// Sweep overrides are keyed by name; every run_* documents the keys it reads.
struct ExperimentSpec {
    std::string name;
    SystemParams params;
    std::map<std::string, std::vector<double>> sweeps;
    std::uint64_t seed = 1;
    unsigned threads = 0;

    std::vector<double> sweep(const std::string& key, std::vector<double> fallback) const {
        const auto it = sweeps.find(key);
        const auto& v = it == sweeps.end() ? fallback : it->second;
        if (v.size() < 2) throw ConfigError("sweep '" + key + "' needs at least 2 points");
        return v;
    }

    double scalar(const std::string& key, double fallback) const {
        const auto it = sweeps.find(key);
        if (it == sweeps.end()) return fallback;
        if (it->second.size() != 1) throw ConfigError("'" + key + "' takes a single value");
        return it->second.front();
    }
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string inputs_digest(const ExperimentSpec& spec) {
    std::ostringstream s;
    s << "name=" << spec.name << "\nseed=" << spec.seed << '\n' << format_params(spec.params);
    for (const auto& [k, v] : spec.sweeps) {
        s << "sweep " << k << '=';
        for (double x : v) s << format_cell(x) << ';';
        s << '\n';
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s.str())));
    return buf;
}

inline nlohmann::ordered_json manifest(const ExperimentSpec& spec, const ExperimentResult& r) {
    nlohmann::ordered_json j;
    j["experiment"] = r.name;
    j["inputs_fnv1a64"] = inputs_digest(spec);
    j["seed"] = spec.seed;
    j["version"] = BPSIM_VERSION;
    j["modules"] = {{"model-core", BPSIM_VERSION},
                    {"stochastic-dynamics", BPSIM_VERSION},
                    {"metrology", BPSIM_VERSION},
                    {"experiments", BPSIM_VERSION}};
    std::vector<std::string> files;
    for (const auto& t : r.tables) files.push_back(t.name + ".csv");
    j["tables"] = files;
    return j;
}

inline std::string summary_text(const ExperimentResult& r) {
    std::ostringstream s;
    s << "experiment " << r.name << '\n';
    for (const auto& [k, v] : r.summary) s << k << " = " << v << '\n';
    return s.str();
}

/// Writes everything under out_dir/<name>/ and returns that directory.
inline std::filesystem::path write_experiment(const ExperimentSpec& spec, const ExperimentResult& r,
                                              const std::filesystem::path& out_dir) {
    const auto dir = out_dir / r.name;
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& file) {
        std::ofstream f(dir / file, std::ios::binary);
        if (!f) throw Error("IoError", "cannot write " + (dir / file).string());
        return f;
    };
    for (const auto& t : r.tables) {
        auto f = open(t.name + ".csv");
        t.write_csv(f);
    }
    open("summary.txt") << summary_text(r);
    open("manifest.json") << manifest(spec, r).dump(2) << '\n';
    return dir;
}

namespace detail {

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

inline std::vector<double> scaled(std::vector<double> v, double k) {
    for (auto& x : v) x *= k;
    return v;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double khz(double w) { return rad_to_hz(w) / 1e3; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Fig. 1e: roots through the transition point
// ---------------------------------------------------------------------------

/// Sweeps: "delta_g_khz" (default: -2 decades below zero, then a few positive
/// points). Tables: roots, coalescence.
inline ExperimentResult run_fig1e(const ExperimentSpec& spec) {
    const SystemParams& p = spec.params;
    p.validate();
    const double g_bp_khz = detail::khz(p.half_spin_width());
    std::vector<double> defaults = detail::scaled(detail::logspace(1e-2, 1.0, 21), -0.1 * g_bp_khz);
    std::reverse(defaults.begin(), defaults.end());
    for (double x : {0.5, 2.0, 10.0}) defaults.push_back(x);
    const auto dgs = spec.sweep("delta_g_khz", defaults);

    ExperimentResult r{"fig1e", {}, {}};
    Table roots{"roots", {"delta_g_hz", "n_roots", "delta_hz", "photon_number", "stable", "label"}, {}};
    Table coal{"coalescence", {"abs_delta_g_hz", "separation_hz", "closed_form_hz"}, {}};
    std::vector<double> x, y;
    for (double dg_khz : dgs) {
        const SystemParams q = p.with_delta_s(0.0).with_delta_g(hz_to_rad(dg_khz * 1e3));
        const auto ss = steady_state_solutions(q);
        for (const auto& b : ss.branches) {
            roots.add({rad_to_hz(q.delta_g()), static_cast<double>(ss.branches.size()), rad_to_hz(b.delta),
                       b.photon_number, b.stable ? 1.0 : 0.0, std::string(to_string(b.label))});
        }
        if (ss.branches.size() == 3) {
            const double sep = ss.branches[2].delta - ss.branches[0].delta;
            const double h = q.half_spin_width();
            coal.add({rad_to_hz(-q.delta_g()), rad_to_hz(sep), rad_to_hz(2.0 * std::sqrt(q.g * q.g - h * h))});
            x.push_back(-q.delta_g());
            y.push_back(sep);
        }
    }
    r.tables = {roots, coal};
    if (x.size() >= 4) {
        const auto fit = fit_power_law(x, y);
        r.note("coalescence_exponent", fit.exponent);
        r.note("coalescence_exponent_stderr", fit.exponent_stderr);
        r.note("coalescence_r2", fit.r2);
    }
    const double g_star = locate_bp(p.with_delta_s(0.0), Tunable::coupling, 0.5 * p.half_spin_width(),
                                    1.5 * p.half_spin_width());
    r.note("bp_coupling_hz", rad_to_hz(g_star));
    SystemParams at = p;
    at.g = g_star;
    r.note("bp_delta_g_hz", rad_to_hz(at.delta_g()));
    return r;
}

// ---------------------------------------------------------------------------
// Fig. 2d,e: hysteresis and its width against power
// ---------------------------------------------------------------------------

/// Sweeps: "power_dbm" (loop powers), "operating_dbm" (single value, default
/// -48), "grid_khz" (single value: sweep step, default 2), "span_khz"
/// (single: half span of the delta_s sweep, default 60). Tables:
/// hysteresis (traces at the operating power), width_vs_power.
inline ExperimentResult run_fig2de(const ExperimentSpec& spec) {
    const SystemParams& p0 = spec.params;
    p0.validate();
    const auto powers = spec.sweep("power_dbm", {-56.0, -54.0, -52.0, -50.0, -48.0, -46.0, -45.0, -44.0, -42.0, -40.0});
    const double op_dbm = spec.scalar("operating_dbm", -48.0);
    const double step = hz_to_rad(1e3 * spec.scalar("grid_khz", 2.0));
    const double span = hz_to_rad(1e3 * spec.scalar("span_khz", 60.0));
    std::vector<double> grid;
    for (double s = -span; s <= span * (1.0 + 1e-12); s += step) grid.push_back(s);

    // time-domain sweeps are only run where the dwell stays reasonable
    constexpr double max_dwell = 2e-3;
    auto run_sweep = [&](const SystemParams& q, std::uint64_t seed) -> std::optional<HysteresisSweep> {
        const double dwell = std::max(100.0 / std::abs(q.delta_g()), 2e-4);
        if (dwell > max_dwell) return std::nullopt;
        return sweep_hysteresis(q, grid, dwell, default_sim_config(q, 1e-3, seed));
    };

    std::vector<std::optional<HysteresisSweep>> sweeps(powers.size());
    parallel_for(powers.size(), spec.threads, [&](std::size_t i) {
        sweeps[i] = run_sweep(saturated_coupling(p0, dbm_to_watts(powers[i])), spec.seed + i);
    });

    ExperimentResult r{"fig2de", {}, {}};
    Table widths{"width_vs_power",
                 {"power_dbm", "delta_g_hz", "width_hz", "sim_separation_hz", "sim_jump_up_hz", "sim_jump_down_hz"},
                 {}};
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const SystemParams q = saturated_coupling(p0, dbm_to_watts(powers[i]));
        const auto& sw = sweeps[i];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        widths.add({powers[i], rad_to_hz(q.delta_g()), rad_to_hz(hysteresis_width(q)),
                    sw ? rad_to_hz(sw->separation()) : nan,
                    sw && sw->jump_up ? rad_to_hz(*sw->jump_up) : nan,
                    sw && sw->jump_down ? rad_to_hz(*sw->jump_down) : nan});
    }

    const SystemParams op = saturated_coupling(p0, dbm_to_watts(op_dbm));
    const auto op_sweep = run_sweep(op, spec.seed + powers.size());
    Table traces{"hysteresis", {"delta_s_hz", "delta_up_hz", "delta_down_hz"}, {}};
    if (op_sweep) {
        const std::size_t n = op_sweep->delta_up.size();
        for (std::size_t i = 0; i < n; ++i) {
            traces.add({rad_to_hz(op_sweep->delta_s_up[i]), rad_to_hz(op_sweep->delta_up[i]),
                        rad_to_hz(op_sweep->delta_down[n - 1 - i])});
        }
    }
    r.tables = {traces, widths};
    r.note("operating_power_dbm", op_dbm);
    r.note("operating_delta_g_hz", rad_to_hz(op.delta_g()));
    r.note("operating_width_hz", rad_to_hz(hysteresis_width(op)));
    if (op_sweep) r.note("operating_sim_separation_hz", rad_to_hz(op_sweep->separation()));
    r.note("grid_step_hz", rad_to_hz(step));
    const double p_star =
        locate_bp(p0, Tunable::power, dbm_to_watts(-70.0), dbm_to_watts(-20.0));
    r.note("bp_power_dbm", watts_to_dbm(p_star));
    return r;
}

// ---------------------------------------------------------------------------
// Fig. 3: encirclement and the transition edge
// ---------------------------------------------------------------------------

struct EncircleCase {
    Direction direction;
    BranchLabel start;
    BranchLabel expected_final;
    std::size_t expected_jumps;
};

/// Outcomes of Fig. 3d,e for the loop A-B-C-D-E-A (clockwise) and its reverse.
inline std::vector<EncircleCase> chirality_truth_table() {
    return {{Direction::clockwise, BranchLabel::upper, BranchLabel::lower, 0},
            {Direction::counterclockwise, BranchLabel::upper, BranchLabel::upper, 1},
            {Direction::clockwise, BranchLabel::lower, BranchLabel::lower, 1},
            {Direction::counterclockwise, BranchLabel::lower, BranchLabel::upper, 0}};
}

/// Sweeps: "loop_khz" (two values: delta_g half-extent, delta_s half-extent;
/// default 30, 40), "segment_ms" (single, default 0.5), "seeds" (single:
/// count, default 10), "edge_delta_g_khz" (single, default -30),
/// "edge_fraction" (delta_p as fractions of the hysteresis width).
/// Tables: encircle, encircle_trace, transition_edge.
inline ExperimentResult run_fig3(const ExperimentSpec& spec) {
    const SystemParams& p = spec.params;
    p.validate();
    const auto loop_khz = spec.sweep("loop_khz", {30.0, 40.0});
    const double segment = 1e-3 * spec.scalar("segment_ms", 0.5);
    const auto seeds = static_cast<std::size_t>(spec.scalar("seeds", 10.0));
    const auto cw = encircle_loop(hz_to_rad(1e3 * loop_khz[0]), hz_to_rad(1e3 * loop_khz[1]), segment);
    const auto ccw = cw.reversed();
    const auto cases = chirality_truth_table();

    struct Run {
        EncircleResult result;
    };
    std::vector<Run> runs(cases.size() * seeds);
    parallel_for(runs.size(), spec.threads, [&](std::size_t i) {
        const auto& c = cases[i % cases.size()];
        const std::uint64_t seed = spec.seed + i / cases.size();
        const auto& traj = c.direction == Direction::clockwise ? cw : ccw;
        runs[i].result = encircle(p, traj, c.start, default_sim_config(p, 1e-3, seed));
    });

    ExperimentResult r{"fig3", {}, {}};
    Table enc{"encircle", {"direction", "start", "seed", "final", "jumps", "expected_final", "expected_jumps", "match"}, {}};
    Table trace{"encircle_trace", {"direction", "start", "t_s", "delta_g_hz", "delta_s_hz", "delta_hz"}, {}};
    std::size_t matches = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& c = cases[i % cases.size()];
        const auto& res = runs[i].result;
        const bool ok = res.final_branch == c.expected_final && res.jumps() == c.expected_jumps;
        matches += ok;
        enc.add({std::string(to_string(c.direction)), std::string(to_string(c.start)),
                 static_cast<double>(spec.seed + i / cases.size()), std::string(to_string(res.final_branch)),
                 static_cast<double>(res.jumps()), std::string(to_string(c.expected_final)),
                 static_cast<double>(c.expected_jumps), ok ? std::string("yes") : std::string("no")});
        if (i < cases.size()) {
            const auto& traj = c.direction == Direction::clockwise ? cw : ccw;
            for (std::size_t k = 0; k < res.step_time.size(); k += 5) {
                const auto [dg, ds] = traj.at(res.step_time[k]);
                trace.add({std::string(to_string(c.direction)), std::string(to_string(c.start)), res.step_time[k],
                           rad_to_hz(dg), rad_to_hz(ds), rad_to_hz(res.step_delta[k])});
            }
        }
    }
    r.note("encircle_runs", static_cast<double>(runs.size()));
    r.note("encircle_matches", static_cast<double>(matches));

    // transition edge
    const SystemParams edge_p = p.with_delta_g(hz_to_rad(1e3 * spec.scalar("edge_delta_g_khz", -30.0)));
    const double w = hysteresis_width(edge_p);
    const auto fractions = spec.sweep("edge_fraction", {0.32, 0.16, 0.08, 0.04, 0.02, 0.01, 0.005, 0.0025});
    std::vector<double> delay(fractions.size()), delay_half(fractions.size());
    parallel_for(2 * fractions.size(), spec.threads, [&](std::size_t i) {
        const std::size_t k = i / 2;
        SimConfig cfg = default_sim_config(edge_p, 10e-3, spec.seed);
        if (i % 2) {
            cfg.dt *= 0.5;
            cfg.decimation *= 2;
        }
        const double d = transition_edge(edge_p, fractions[k] * w, cfg).delay;
        (i % 2 ? delay_half : delay)[k] = d;
    });
    Table edge{"transition_edge", {"delta_p_hz", "delay_s", "delay_half_dt_s"}, {}};
    std::vector<double> dp;
    bool monotone = true;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        dp.push_back(fractions[k] * w);
        edge.add({rad_to_hz(dp.back()), delay[k], delay_half[k]});
    }
    // ordered by step size, the delay grows as the step shrinks
    std::vector<std::size_t> order(fractions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dp[a] > dp[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) monotone = monotone && delay[order[i]] > delay[order[i - 1]];
    const auto fit = fit_power_law(dp, delay);
    const auto fit_half = fit_power_law(dp, delay_half);
    const auto stretched = fit_stretched_exponential(dp, delay);
    r.note("edge_delta_g_hz", rad_to_hz(edge_p.delta_g()));
    r.note("edge_width_hz", rad_to_hz(w));
    r.note("edge_monotone", monotone ? "yes" : "no");
    r.note("edge_exponent", fit.exponent);
    r.note("edge_exponent_stderr", fit.exponent_stderr);
    r.note("edge_r2", fit.r2);
    r.note("edge_exponent_half_dt", fit_half.exponent);
    r.note("edge_r2_half_dt", fit_half.r2);
    r.note("edge_stretched_beta", stretched.beta);
    r.note("edge_stretched_r2", stretched.r2);
    r.note("edge_reference_exponent", -0.83);
    r.tables = {enc, trace, edge};
    return r;
}

// ---------------------------------------------------------------------------
// Fig. 4: magnetometry
// ---------------------------------------------------------------------------

/// Settings of the simulated magnetometry chain.
struct ChainSettings {
    double record = 64e-3;           // s, analysed record after settling
    double settle = 2e-3;            // s
    double sample_rate = 1.25e6;     // Hz, output rate; the step is fitted below it
    double carrier_hz = 200e3;       // IF of the synthesised voltage
    double tone_hz = 3e3;
    double tone_tesla = 0.14e-9;     // test-field amplitude
    double noise_offset_hz = 30e3;
    double noise_band_hz = 2e3;      // averaging band around the offset
    std::size_t segment = 8192;
};

struct ChainPoint {
    double delta_g = 0.0;       // rad/s
    double S = 0.0;             // measured gamma_eff / gamma_e
    double S_dc = 0.0;          // analytic responsivity
    double noise_psd = 0.0;     // (Hz^2/Hz) frequency noise at the offset
    bool validity_warning = false;
    SpectrumEstimate freq_psd;  // one-sided, Hz^2/Hz
    double gamma_eff = 0.0;     // Hz/T
};

/// Simulates the oscillator with the test tone on the spin detuning, forms
/// the heterodyne voltage Re(conj(alpha) e^{i w_i t}), demodulates it, and
/// reads gamma_eff at the tone and the frequency-noise density at the
/// offset. `tone` = false leaves the spins static.
inline ChainPoint measure_chain(const SystemParams& q, const ChainSettings& c, std::uint64_t seed, bool tone = true) {
    SimConfig cfg = default_sim_config(q, c.settle + c.record, seed);
    const double block_time = 1.0 / c.sample_rate;
    cfg.decimation = static_cast<std::size_t>(std::ceil(block_time / cfg.dt));
    cfg.dt = block_time / static_cast<double>(cfg.decimation);
    const double tone_w = kTwoPi * c.tone_hz;
    const double tone_amp = tone ? kTwoPi * kGammaE * c.tone_tesla : 0.0;
    auto params_at = [&](double t) {
        SystemParams x = q;
        if (t >= c.settle) x.delta_s = q.delta_s + tone_amp * std::sin(tone_w * (t - c.settle));
        return x;
    };
    const auto ss = steady_state_solutions(q);
    const auto stable = ss.stable_branches();
    if (stable.empty()) throw StartBranchMissing("no stable branch for the magnetometry point");
    const auto& b = stable.back();

    std::vector<double> v;
    std::vector<cplx> field;
    const double block = cfg.dt * static_cast<double>(cfg.decimation);
    const double wi = kTwoPi * c.carrier_hz;
    integrate_path(params_at, branch_state(b, q), b.delta, cfg, [&](const BlockRecord& rec) {
        const double t = rec.t_end - c.settle;
        if (t <= 0.0) return;
        field.push_back(rec.alpha);
    });
    const double a0 = std::sqrt(b.photon_number);
    v.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double t = static_cast<double>(i) * block;
        v.push_back(std::real(std::conj(field[i]) * std::polar(1.0 / a0, wi * t)));
    }
    const RealSeries volt(std::move(v), 1.0 / block, 0.0, SeriesKind::voltage);
    const auto d = hilbert_demodulate(volt, wi);

    ChainPoint out;
    out.delta_g = q.delta_g();
    out.S_dc = responsivity(q).magnitude();
    out.validity_warning = d.validity_warning;
    if (tone) {
        const auto est = effective_gyromagnetic(d.phase, c.tone_tesla / std::sqrt(2.0), c.tone_hz);
        out.S = est.S;
        out.gamma_eff = est.gamma_eff;
    }
    RealSeries freq = phase_to_field(d.phase, 1.0);
    freq.kind = SeriesKind::phase;
    const auto [lo, hi] = interior_range(freq.size());
    out.freq_psd = psd(freq.slice(lo, hi - lo), c.segment);
    out.noise_psd = band_mean(out.freq_psd, c.noise_offset_hz, c.noise_band_hz);
    return out;
}

/// Far-detuned reference for the noise ratio N^2.
inline SystemParams noise_reference(const SystemParams& p) {
    return p.with_delta_g(hz_to_rad(46.1e3)).with_delta_s(10.0 * p.g);
}

/// Frequency-noise PSD of a chain point converted to a field ASD (T/sqrt(Hz)).
inline SpectrumEstimate field_asd(const ChainPoint& pt) {
    if (!(pt.gamma_eff > 0.0)) throw NonPositiveInput("gamma_eff must be > 0");
    SpectrumEstimate s = pt.freq_psd;
    for (auto& v : s.values) v = std::sqrt(v) / pt.gamma_eff;
    s.units = asd_units(SeriesKind::magnetic);
    return s;
}

struct MagnetometryRun {
    ChainPoint point, reference;
    SpectrumEstimate asd;
    MagnetometryReport report;
};

/// One magnetometry point with its own reference run; sensitivity is the
/// band [f_lo, f_hi] of the field ASD.
inline MagnetometryRun magnetometry(const SystemParams& q, const SystemParams& reference, const ChainSettings& c,
                                    std::uint64_t seed, double f_lo = 9.5e3, double f_hi = 10.5e3) {
    MagnetometryRun m;
    m.point = measure_chain(q, c, seed);
    m.reference = measure_chain(reference, c, seed + 1000, false);
    m.asd = field_asd(m.point);
    const double N = std::sqrt(m.point.noise_psd / m.reference.noise_psd);
    m.report = MagnetometryReport::make(m.point.gamma_eff, N, sensitivity(m.asd, f_lo, f_hi), f_lo, f_hi);
    return m;
}

/// Sweeps: "delta_g_khz" (magnetometry points, default 10 from 0.6 to 46.1),
/// "map_delta_g_khz", "map_delta_s_khz" (responsivity map), "drive_periods"
/// (single, default 2), "drive_period_ms" (single, default 200),
/// "drive_amplitude_khz" (single, default 1), "record_ms" (single, default 64).
/// Tables: responsivity_map, quasistatic, drive_offsets, log_response,
/// snr_vs_delta_g, sensitivity, leeson.
inline ExperimentResult run_fig4(const ExperimentSpec& spec) {
    const SystemParams& p = spec.params;
    p.validate();
    ExperimentResult r{"fig4", {}, {}};

    // (a) responsivity map
    const auto map_dg = spec.sweep("map_delta_g_khz", detail::logspace(0.3, 50.0, 12));
    std::vector<double> map_ds_default;
    for (int i = -20; i <= 20; ++i) map_ds_default.push_back(0.5 * i);
    const auto map_ds = spec.sweep("map_delta_s_khz", map_ds_default);
    Table map{"responsivity_map", {"delta_g_hz", "delta_s_hz", "S"}, {}};
    for (double dg : map_dg)
        for (double ds : map_ds) {
            const SystemParams q = p.with_delta_g(hz_to_rad(1e3 * dg)).with_delta_s(hz_to_rad(1e3 * ds));
            map.add({1e3 * dg, 1e3 * ds, responsivity(q).value});
        }

    // (b) triangular drive at the closest approach
    const double dg_close = hz_to_rad(600.0);
    const SystemParams close = p.with_delta_g(dg_close);
    const auto periods = static_cast<std::size_t>(spec.scalar("drive_periods", 2.0));
    const double period = 1e-3 * spec.scalar("drive_period_ms", 200.0);
    const double amp = hz_to_rad(1e3 * spec.scalar("drive_amplitude_khz", 1.0));
    auto tri = [&](double t) {
        // starts at -amp, rises to +amp at half period
        const double ph = std::fmod(t / period, 1.0);
        return ph < 0.5 ? -amp + 4.0 * amp * ph : 3.0 * amp - 4.0 * amp * ph;
    };
    Table quasi{"quasistatic", {"period", "t_s", "delta_s_hz", "delta_hz", "model_delta_hz"}, {}};
    Table offsets{"drive_offsets", {"period", "offset_hz"}, {}};
    {
        SimConfig cfg = default_sim_config(close, static_cast<double>(periods) * period, spec.seed);
        cfg.decimation = 64;
        const SystemParams start = close.with_delta_s(tri(0.0));
        const auto b = steady_state_solutions(start).stable_branches().back();
        const double window = 0.5e-3;
        const double block = cfg.dt * static_cast<double>(cfg.decimation);
        const auto per_window = static_cast<std::size_t>(std::llround(window / block));
        std::vector<double> t_w, ds_w, d_w;
        double acc = 0.0, ds_acc = 0.0;
        std::size_t n = 0;
        integrate_path([&](double t) { return close.with_delta_s(tri(t)); }, branch_state(b, start), b.delta, cfg,
                       [&](const BlockRecord& rec) {
                           acc += rec.delta;
                           ds_acc += tri(rec.t_end - 0.5 * block);
                           if (++n == per_window) {
                               t_w.push_back(rec.t_end - 0.5 * window);
                               ds_w.push_back(ds_acc / static_cast<double>(n));
                               d_w.push_back(acc / static_cast<double>(n));
                               acc = ds_acc = 0.0;
                               n = 0;
                           }
                       });
        // per-period offset: the delta_s at which the tracked frequency
        // crosses zero, averaged over the rising and falling ramps
        std::vector<double> off(periods, 0.0);
        for (std::size_t k = 0; k < periods; ++k) {
            std::vector<double> crossings;
            for (std::size_t i = 1; i < t_w.size(); ++i) {
                if (static_cast<std::size_t>(t_w[i] / period) != k || static_cast<std::size_t>(t_w[i - 1] / period) != k)
                    continue;
                if ((d_w[i] > 0.0) != (d_w[i - 1] > 0.0)) {
                    const double f = d_w[i - 1] / (d_w[i - 1] - d_w[i]);
                    crossings.push_back(ds_w[i - 1] + f * (ds_w[i] - ds_w[i - 1]));
                }
            }
            double m = 0.0;
            for (double c : crossings) m += c;
            off[k] = crossings.empty() ? 0.0 : m / static_cast<double>(crossings.size());
            offsets.add({static_cast<double>(k), rad_to_hz(off[k])});
        }
        std::vector<double> lin_x, lin_y;
        for (std::size_t i = 0; i < t_w.size(); ++i) {
            const std::size_t k = std::min(periods - 1, static_cast<std::size_t>(t_w[i] / period));
            const double ds = ds_w[i] - off[k];
            const auto roots = oscillation_roots(close.with_delta_s(ds));
            quasi.add({static_cast<double>(k), t_w[i], rad_to_hz(ds), rad_to_hz(d_w[i]),
                       rad_to_hz(roots.size() == 1 ? roots.front().value : std::numeric_limits<double>::quiet_NaN())});
            if (std::abs(ds) < hz_to_rad(30.0)) {
                lin_x.push_back(ds);
                lin_y.push_back(d_w[i]);
            }
        }
        double max_off = 0.0;
        for (double o : off) max_off = std::max(max_off, std::abs(o));
        r.note("drive_max_offset_hz", rad_to_hz(max_off));
        if (lin_x.size() >= 2) r.note("quasistatic_S", std::abs(fit_line(lin_x, lin_y).slope));
        r.note("analytic_S_at_0p6khz", responsivity(close).magnitude());
    }

    // (c) log response at delta_g = 1.8 kHz
    Table logr{"log_response", {"delta_s_hz", "delta_hz", "S"}, {}};
    {
        const SystemParams q = p.with_delta_g(hz_to_rad(1.8e3));
        std::vector<double> lo_x, lo_y, hi_x, hi_y;
        for (double ds : detail::logspace(10.0, 1e5, 41)) {
            const SystemParams x = q.with_delta_s(hz_to_rad(ds));
            const double d = std::abs(oscillation_roots(x).front().value);
            logr.add({ds, rad_to_hz(d), responsivity(x).value});
            if (ds <= 30.0) {
                lo_x.push_back(ds);
                lo_y.push_back(d);
            }
            if (ds >= 2e3 && ds <= 1e4) {
                hi_x.push_back(ds);
                hi_y.push_back(d);
            }
        }
        r.note("log_response_slope_small", fit_power_law(lo_x, lo_y).exponent);
        r.note("log_response_slope_large", fit_power_law(hi_x, hi_y).exponent);
    }

    // (d) S, N and SNR against delta_g
    ChainSettings chain;
    chain.record = 1e-3 * spec.scalar("record_ms", 64.0);
    const auto dgs = spec.sweep("delta_g_khz", {0.6, 1.0, 1.8, 3.0, 5.0, 8.0, 13.0, 20.0, 30.0, 46.1});
    std::vector<ChainPoint> pts(dgs.size() + 1);
    const SystemParams ref_p = noise_reference(p);
    parallel_for(pts.size(), spec.threads, [&](std::size_t i) {
        if (i == dgs.size()) {
            pts[i] = measure_chain(ref_p, chain, spec.seed + 1000, false);
        } else {
            pts[i] = measure_chain(p.with_delta_g(hz_to_rad(1e3 * dgs[i])), chain, spec.seed + i);
        }
    });
    const ChainPoint& ref = pts.back();
    Table snr{"snr_vs_delta_g",
              {"delta_g_hz", "S", "S_analytic_dc", "N", "N2", "eq2", "snr_gain", "validity_warning"},
              {}};
    std::vector<double> n2, eq2;
    for (std::size_t i = 0; i < dgs.size(); ++i) {
        const auto& pt = pts[i];
        const double N2 = pt.noise_psd / ref.noise_psd;
        const double model = analytic_phase_noise(p.with_delta_g(hz_to_rad(1e3 * dgs[i])));
        n2.push_back(N2);
        eq2.push_back(model);
        snr.add({1e3 * dgs[i], pt.S, pt.S_dc, std::sqrt(N2), N2, model, pt.S / std::sqrt(N2),
                 pt.validity_warning ? 1.0 : 0.0});
    }
    const std::size_t closest = static_cast<std::size_t>(std::min_element(dgs.begin(), dgs.end()) - dgs.begin());
    const double N_close = std::sqrt(n2[closest]);
    r.note("noise_eq2_correlation", detail::pearson(n2, eq2));
    r.note("closest_delta_g_hz", 1e3 * dgs[closest]);
    r.note("closest_S", pts[closest].S);
    r.note("closest_N", N_close);
    r.note("closest_snr_gain", pts[closest].S / N_close);
    r.note("reported_snr_gain", snr_enhancement(135.0, 8.0));

    // (e) sensitivity band around 10 kHz, closest point and 46.1 kHz
    Table sens{"sensitivity", {"freq_hz", "asd_closest_T_rtHz", "asd_far_T_rtHz"}, {}};
    {
        const std::size_t far = static_cast<std::size_t>(std::max_element(dgs.begin(), dgs.end()) - dgs.begin());
        const auto a = field_asd(pts[closest]), b = field_asd(pts[far]);
        for (std::size_t k = 0; k < a.size(); ++k)
            if (a.freqs[k] >= 5e3 && a.freqs[k] <= 40e3) sens.add({a.freqs[k], a.values[k], b.values[k]});
        const auto band = sensitivity(a, 9.5e3, 10.5e3);
        const auto report = MagnetometryReport::make(pts[closest].gamma_eff, N_close, band, 9.5e3, 10.5e3);
        r.note("sensitivity_T_rtHz", report.sensitivity);
        r.note("sensitivity_std_T_rtHz", report.sensitivity_std);
        r.note("sensitivity_far_T_rtHz", sensitivity(b, 9.5e3, 10.5e3).mean);
    }

    // (f) Leeson comparison
    Table leeson{"leeson", {"delta_g_hz", "S", "bound_T_rtHz", "enhanced_bound_T_rtHz"}, {}};
    const double f_l = 155e3, bare = leeson_bound(f_l, p.temperature, p.power, kGammaE);
    for (double dg : detail::logspace(0.3, 50.0, 15)) {
        const double S = responsivity(p.with_delta_g(hz_to_rad(1e3 * dg))).magnitude();
        leeson.add({1e3 * dg, S, bare, leeson_bound(f_l, p.temperature, p.power, S * kGammaE)});
    }
    r.note("leeson_bound_T_rtHz", bare);

    r.tables = {map, quasi, offsets, logr, snr, sens, leeson};
    return r;
}

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"fig1e", "fig2de", "fig3", "fig4"};
    return names;
}

/// Default parameter preset of each experiment.
inline SystemParams experiment_preset(const std::string& name) {
    if (name == "fig4") return preset_fig4();
    return preset_fig23();
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.name == "fig1e") return run_fig1e(spec);
    if (spec.name == "fig2de") return run_fig2de(spec);
    if (spec.name == "fig3") return run_fig3(spec);
    if (spec.name == "fig4") return run_fig4(spec);
    throw ConfigError("unknown experiment '" + spec.name + "'");
}

}  // namespace bpsim
