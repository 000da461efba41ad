// bpsim: command-line front end to the library.
//
// Every command loads parameters (--params, then --set overrides), computes one
// table plus a few summary values, and writes them to --out (default
// $BPSIM_OUT) or standard output.
//
// exit codes: 0 ok, 1 runtime error (error name on stderr), 2 usage/config.

#include "bpsim/dynamics.hpp"
#include "bpsim/experiments.hpp"
#include "bpsim/metrology.hpp"
#include "bpsim/model.hpp"
#include "bpsim/params.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace bpsim;

namespace {

struct Common {
    std::string params_file;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::string format = "csv";
    unsigned threads = 0;
};

struct Output {
    Table table;
    std::vector<std::pair<std::string, std::string>> summary;

    void note(const std::string& k, double v) { summary.emplace_back(k, format_cell(v)); }
    void note(const std::string& k, const std::string& v) { summary.emplace_back(k, v); }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--params", c.params_file, "parameter file (key = value lines)");
    cmd->add_option("--set", c.overrides, "override one parameter, key=value; delta_g moves g (repeatable)")->take_all();
    cmd->add_option("--out", c.out_dir, "output directory (default: $BPSIM_OUT, else stdout)");
    cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
    cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker threads, 0 = auto")->capture_default_str();
}

SystemParams load(const Common& c, SystemParams fallback = preset_fig23()) {
    SystemParams p = c.params_file.empty() ? fallback : load_params(c.params_file);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        const std::string key = detail::trim(kv.substr(0, eq)), value = detail::trim(kv.substr(eq + 1));
        // delta_g is derived; setting it moves the coupling g
        if (key == "delta_g") {
            p = p.with_delta_g(detail::parse_quantity(value, detail::Quantity::rate));
        } else {
            set_param(p, key, value);
        }
    }
    p.validate();
    return p;
}

double quantity(const std::string& text, detail::Quantity q, const char* what) {
    try {
        return detail::parse_quantity(text, q);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

nlohmann::ordered_json cell_json(const std::string& s) {
    if (const auto v = detail::parse_number(s)) return *v;
    if (s == "nan") return nullptr;
    return s;
}

void write_json(std::ostream& out, const std::string& command, const Output& o) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["summary"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : o.summary) j["summary"][k] = cell_json(v);
    j["columns"] = o.table.columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : o.table.rows) {
        auto row = nlohmann::ordered_json::array();
        for (const auto& cell : r) row.push_back(cell_json(cell));
        j["rows"].push_back(row);
    }
    out << j.dump(2) << '\n';
}

void emit(const Common& c, const std::string& command, const Output& o) {
    if (c.out_dir.empty()) {
        if (c.format == "json") {
            write_json(std::cout, command, o);
        } else {
            for (const auto& [k, v] : o.summary) std::cout << "# " << k << " = " << v << '\n';
            o.table.write_csv(std::cout);
        }
        return;
    }
    fs::create_directories(c.out_dir);
    const fs::path base = fs::path(c.out_dir) / command;
    auto open = [](const fs::path& path) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("IoError", "cannot write " + path.string());
        return f;
    };
    if (c.format == "json") {
        auto f = open(base.string() + ".json");
        write_json(f, command, o);
    } else {
        auto f = open(base.string() + ".csv");
        o.table.write_csv(f);
        if (!o.summary.empty()) {
            auto s = open(base.string() + ".summary.txt");
            for (const auto& [k, v] : o.summary) s << k << " = " << v << '\n';
        }
    }
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n < 2) throw ConfigError("--points must be >= 2");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

BranchLabel parse_branch(const std::string& s) {
    if (s == "upper") return BranchLabel::upper;
    if (s == "lower") return BranchLabel::lower;
    return BranchLabel::single;
}

// ---------------------------------------------------------------------------

Output cmd_spectrum(const SystemParams& p, double f_min, double f_max, std::size_t points) {
    const auto offsets = linspace(f_min, f_max, points);
    std::vector<double> probe;
    for (double f : offsets) probe.push_back(p.omega_c + hz_to_rad(f));
    const auto r = reflection_spectrum(p, probe);
    Output o{{"spectrum", {"offset_hz", "reflection"}, {}}, {}};
    for (std::size_t i = 0; i < r.size(); ++i) o.table.add({offsets[i], r[i]});
    return o;
}

Output cmd_steady_state(const SystemParams& p) {
    const auto ss = steady_state_solutions(p);
    Output o{{"steady-state", {"branch", "delta_hz", "photon_number", "stable", "below_threshold"}, {}}, {}};
    for (const auto& b : ss.branches) {
        o.table.add({std::string(to_string(b.label)), rad_to_hz(b.delta), b.photon_number, b.stable ? 1.0 : 0.0,
                     b.below_threshold ? 1.0 : 0.0});
    }
    o.note("stable_branches", static_cast<double>(ss.stable_branches().size()));
    o.note("hysteresis_width_hz", rad_to_hz(hysteresis_width(p)));
    o.note("responsivity", responsivity(p).magnitude());
    return o;
}

Output cmd_bistable_map(const SystemParams& p, std::array<double, 4> range, std::size_t points, unsigned threads) {
    std::vector<double> dg, ds;
    for (double v : linspace(range[0], range[1], points)) dg.push_back(hz_to_rad(v));
    for (double v : linspace(range[2], range[3], points)) ds.push_back(hz_to_rad(v));
    const auto m = bistable_map(p, dg, ds, threads);
    Output o{{"bistable-map", {"delta_g_hz", "delta_s_hz", "stable_count", "mean_delta_hz", "single_delta_hz"}, {}}, {}};
    for (std::size_t i = 0; i < dg.size(); ++i) {
        for (std::size_t j = 0; j < ds.size(); ++j) {
            const std::size_t k = i * ds.size() + j;
            o.table.add({rad_to_hz(dg[i]), rad_to_hz(ds[j]), static_cast<double>(m.stable_count[k]),
                         rad_to_hz(m.mean_delta[k]), rad_to_hz(m.single_delta[k])});
        }
    }
    return o;
}

Output cmd_hysteresis(const SystemParams& p, double span, double step, double dwell, std::uint64_t seed) {
    if (!(step > 0.0) || !(span > step)) throw ConfigError("need 0 < --step < --span");
    const auto n = static_cast<std::size_t>(std::llround(2.0 * span / step)) + 1;
    std::vector<double> grid;
    for (double f : linspace(-span, span, n)) grid.push_back(hz_to_rad(f));
    const auto cfg = default_sim_config(p, dwell, seed);
    const auto h = sweep_hysteresis(p, grid, dwell, cfg);
    Output o{{"hysteresis", {"direction", "delta_s_hz", "delta_hz"}, {}}, {}};
    for (std::size_t i = 0; i < h.delta_s_up.size(); ++i)
        o.table.add({std::string("up"), rad_to_hz(h.delta_s_up[i]), rad_to_hz(h.delta_up[i])});
    for (std::size_t i = 0; i < h.delta_s_down.size(); ++i)
        o.table.add({std::string("down"), rad_to_hz(h.delta_s_down[i]), rad_to_hz(h.delta_down[i])});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    o.note("jump_up_hz", h.jump_up ? rad_to_hz(*h.jump_up) : nan);
    o.note("jump_down_hz", h.jump_down ? rad_to_hz(*h.jump_down) : nan);
    o.note("separation_hz", rad_to_hz(h.separation()));
    o.note("analytic_width_hz", rad_to_hz(hysteresis_width(p)));
    return o;
}

Output cmd_encircle(const SystemParams& p, double dg, double ds, double segment, const std::string& start,
                    const std::string& direction, std::uint64_t seed) {
    auto traj = encircle_loop(hz_to_rad(dg), hz_to_rad(ds), segment);
    if (direction == "ccw") traj = traj.reversed();
    const auto cfg = default_sim_config(p, traj.duration(), seed);
    const auto r = encircle(p, traj, parse_branch(start), cfg);
    Output o{{"encircle", {"t_s", "delta_g_hz", "delta_s_hz", "delta_hz"}, {}}, {}};
    for (std::size_t i = 0; i < r.step_time.size(); ++i) {
        const auto [g, s] = traj.at(r.step_time[i]);
        o.table.add({r.step_time[i], rad_to_hz(g), rad_to_hz(s), rad_to_hz(r.step_delta[i])});
    }
    o.note("direction", to_string(r.direction));
    o.note("start_branch", start);
    o.note("final_branch", to_string(r.final_branch));
    o.note("final_delta_hz", rad_to_hz(r.final_delta));
    o.note("jumps", static_cast<double>(r.jumps()));
    return o;
}

Output cmd_transition_edge(const SystemParams& p, const std::vector<double>& steps, double fraction,
                           double duration, std::uint64_t seed) {
    const auto edges = hysteresis_edges(p);
    if (!edges) throw NoTransition("no bistable interval at these parameters");
    Output o{{"transition-edge", {"step_hz", "delay_s"}, {}}, {}};
    TransitionEdge last;
    for (double s : steps) {
        const auto cfg = default_sim_config(p.with_delta_s(edges->second + std::abs(hz_to_rad(s))), duration, seed);
        last = transition_edge(p, hz_to_rad(s), cfg, fraction);
        o.table.add({s, last.delay});
    }
    o.note("fold_delta_s_hz", rad_to_hz(last.fold_delta_s));
    o.note("origin_hz", rad_to_hz(last.origin));
    o.note("destination_hz", rad_to_hz(last.destination));
    return o;
}

Output cmd_noise(const SystemParams& p, const ChainSettings& chain, std::uint64_t seed) {
    const auto pt = measure_chain(p, chain, seed, false);
    const auto ref = measure_chain(noise_reference(p), chain, seed + 1000, false);
    Output o{{"noise", {"freq_hz", "freq_psd_hz2_per_hz", "reference_psd_hz2_per_hz"}, {}}, {}};
    for (std::size_t k = 0; k < pt.freq_psd.size(); ++k)
        o.table.add({pt.freq_psd.freqs[k], pt.freq_psd.values[k], ref.freq_psd.values[k]});
    o.note("noise_offset_hz", chain.noise_offset_hz);
    o.note("N2", pt.noise_psd / ref.noise_psd);
    o.note("phase_noise_model", analytic_phase_noise(p));
    o.note("validity_warning", pt.validity_warning ? "yes" : "no");
    return o;
}

Output cmd_magnetometry(const SystemParams& p, const ChainSettings& chain, std::uint64_t seed, double f_lo,
                        double f_hi) {
    const auto m = magnetometry(p, noise_reference(p), chain, seed, f_lo, f_hi);
    Output o{{"magnetometry", {"freq_hz", "asd_T_rtHz"}, {}}, {}};
    for (std::size_t k = 0; k < m.asd.size(); ++k) o.table.add({m.asd.freqs[k], m.asd.values[k]});
    const auto& r = m.report;
    o.note("gamma_eff_hz_per_T", r.gamma_eff);
    o.note("S", r.S);
    o.note("S_analytic_dc", m.point.S_dc);
    o.note("N", r.N);
    o.note("snr_gain", r.snr_gain);
    o.note("sensitivity_T_rtHz", r.sensitivity);
    o.note("sensitivity_std_T_rtHz", r.sensitivity_std);
    o.note("band_lo_hz", r.band_lo);
    o.note("band_hi_hz", r.band_hi);
    return o;
}

// "key=v1,v2,..." into spec.sweeps
void add_sweep(ExperimentSpec& spec, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("--sweep expects key=v1,v2,..., got '" + text + "'");
    const std::string key = detail::trim(text.substr(0, eq));
    std::vector<double> values;
    std::stringstream ss(text.substr(eq + 1));
    for (std::string item; std::getline(ss, item, ',');) {
        const auto v = detail::parse_number(detail::trim(item));
        if (!v) throw ConfigError("bad number '" + item + "' in --sweep " + key);
        values.push_back(*v);
    }
    if (key.empty() || values.empty()) throw ConfigError("empty --sweep '" + text + "'");
    spec.sweeps[key] = values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bistable-point NV maser simulator", "bpsim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BPSIM_VERSION);

    Common c;
    double f_min = -2e6, f_max = 2e6;
    std::size_t points = 401;
    auto* spectrum = app.add_subcommand("spectrum", "reflection spectrum |r|^2 around the cavity");
    add_common(spectrum, c);
    spectrum->add_option("--f-min", f_min, "lowest probe offset from omega_c, Hz")->capture_default_str();
    spectrum->add_option("--f-max", f_max, "highest probe offset from omega_c, Hz")->capture_default_str();
    spectrum->add_option("--points", points, "number of probe frequencies")->capture_default_str();

    auto* steady = app.add_subcommand("steady-state", "oscillation branches, photon number and stability");
    add_common(steady, c);

    std::array<double, 4> range{-60e3, 60e3, -60e3, 60e3};
    std::size_t map_points = 41;
    auto* bmap = app.add_subcommand("bistable-map", "stable-branch count over a (delta_g, delta_s) grid");
    add_common(bmap, c);
    bmap->add_option("--dg-min", range[0], "Hz")->capture_default_str();
    bmap->add_option("--dg-max", range[1], "Hz")->capture_default_str();
    bmap->add_option("--ds-min", range[2], "Hz")->capture_default_str();
    bmap->add_option("--ds-max", range[3], "Hz")->capture_default_str();
    bmap->add_option("--points", map_points, "grid points per axis")->capture_default_str();

    double span = 60e3, step = 2e3, dwell = 1e-3;
    auto* hyst = app.add_subcommand("hysteresis", "simulated delta_s sweep up then down");
    add_common(hyst, c);
    hyst->add_option("--span", span, "sweep from -span to +span, Hz")->capture_default_str();
    hyst->add_option("--step", step, "grid step, Hz")->capture_default_str();
    hyst->add_option("--dwell", dwell, "time per grid point, s")->capture_default_str();

    double loop_dg = 30e3, loop_ds = 40e3, segment = 0.5e-3;
    std::string start = "upper", direction = "cw";
    auto* enc = app.add_subcommand("encircle", "drive a closed loop around the transition point");
    add_common(enc, c);
    enc->add_option("--loop-dg", loop_dg, "loop half-height in delta_g, Hz")->capture_default_str();
    enc->add_option("--loop-ds", loop_ds, "loop half-width in delta_s, Hz")->capture_default_str();
    enc->add_option("--segment", segment, "time per loop side, s")->capture_default_str();
    enc->add_option("--start", start, "starting branch")
        ->check(CLI::IsMember({"upper", "lower", "single"}))
        ->capture_default_str();
    enc->add_option("--direction", direction, "loop orientation")
        ->check(CLI::IsMember({"cw", "ccw"}))
        ->capture_default_str();

    std::vector<double> edge_steps{4000, 2000, 1000, 500, 250};
    double fraction = 0.1, edge_duration = 5e-3;
    auto* edge = app.add_subcommand("transition-edge", "delay after stepping delta_s past the fold");
    add_common(edge, c);
    edge->add_option("--step", edge_steps, "step sizes past the fold, Hz (repeatable)")->capture_default_str();
    edge->add_option("--fraction", fraction, "arrival threshold as a fraction of the jump")->capture_default_str();
    edge->add_option("--duration", edge_duration, "longest run, s")->capture_default_str();

    ChainSettings chain;
    double record = chain.record;
    auto* noise = app.add_subcommand("noise", "oscillator frequency noise against the detuned reference");
    add_common(noise, c);
    noise->add_option("--record", record, "analysed record length, s")->capture_default_str();
    noise->add_option("--offset", chain.noise_offset_hz, "offset frequency for N^2, Hz")->capture_default_str();
    noise->add_option("--band", chain.noise_band_hz, "averaging band, Hz")->capture_default_str();

    double band_lo = 9.5e3, band_hi = 10.5e3;
    auto* mag = app.add_subcommand("magnetometry", "test-tone responsivity, noise and sensitivity");
    add_common(mag, c);
    mag->add_option("--record", record, "analysed record length, s")->capture_default_str();
    mag->add_option("--tone-hz", chain.tone_hz, "test-field frequency, Hz")->capture_default_str();
    mag->add_option("--tone-tesla", chain.tone_tesla, "test-field amplitude, T")->capture_default_str();
    mag->add_option("--band-lo", band_lo, "sensitivity band start, Hz")->capture_default_str();
    mag->add_option("--band-hi", band_hi, "sensitivity band end, Hz")->capture_default_str();

    std::string f_l = "155e3", temp = "290", power = "-40dBm", gamma = "28e9";
    auto* lee = app.add_subcommand("leeson", "thermal phase-noise bound on the field sensitivity");
    add_common(lee, c);
    lee->add_option("--f_l", f_l, "oscillator linewidth, Hz")->capture_default_str();
    lee->add_option("--temp", temp, "temperature, K")->capture_default_str();
    lee->add_option("--power", power, "oscillation power, W or dBm")->capture_default_str();
    lee->add_option("--gamma", gamma, "gyromagnetic ratio, Hz/T")->capture_default_str();

    std::string experiment_name;
    std::vector<std::string> sweeps;
    auto* exp = app.add_subcommand("experiment", "run a named figure reproduction");
    add_common(exp, c);
    exp->add_option("name", experiment_name, "fig1e, fig2de, fig3 or fig4")
        ->required()
        ->check(CLI::IsMember(experiment_names()));
    exp->add_option("--sweep", sweeps, "sweep values, key=v1,v2,... (repeatable)")->take_all();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }

    if (c.out_dir.empty()) {
        if (const char* env = std::getenv("BPSIM_OUT")) c.out_dir = env;
    }
    chain.record = record;

    try {
        if (spectrum->parsed()) emit(c, "spectrum", cmd_spectrum(load(c), f_min, f_max, points));
        if (steady->parsed()) emit(c, "steady-state", cmd_steady_state(load(c)));
        if (bmap->parsed()) emit(c, "bistable-map", cmd_bistable_map(load(c), range, map_points, c.threads));
        if (hyst->parsed()) emit(c, "hysteresis", cmd_hysteresis(load(c), span, step, dwell, c.seed));
        if (enc->parsed())
            emit(c, "encircle", cmd_encircle(load(c), loop_dg, loop_ds, segment, start, direction, c.seed));
        if (edge->parsed())
            emit(c, "transition-edge", cmd_transition_edge(load(c), edge_steps, fraction, edge_duration, c.seed));
        if (noise->parsed()) emit(c, "noise", cmd_noise(load(c, preset_fig4()), chain, c.seed));
        if (mag->parsed()) emit(c, "magnetometry", cmd_magnetometry(load(c, preset_fig4()), chain, c.seed, band_lo, band_hi));
        if (lee->parsed()) {
            const double b = leeson_bound(quantity(f_l, detail::Quantity::plain, "--f_l"),
                                          quantity(temp, detail::Quantity::temperature, "--temp"),
                                          quantity(power, detail::Quantity::power, "--power"),
                                          quantity(gamma, detail::Quantity::plain, "--gamma"));
            Output o{{"leeson", {"bound_T_rtHz"}, {}}, {}};
            o.table.add({b});
            emit(c, "leeson", o);
        }
        if (exp->parsed()) {
            ExperimentSpec spec;
            spec.name = experiment_name;
            spec.params = load(c, experiment_preset(experiment_name));
            spec.seed = c.seed;
            spec.threads = c.threads;
            for (const auto& s : sweeps) add_sweep(spec, s);
            const auto r = run_experiment(spec);
            if (c.out_dir.empty()) {
                std::cout << summary_text(r);
            } else {
                const auto dir = write_experiment(spec, r, c.out_dir);
                std::cout << summary_text(r) << "written to " << dir.string() << '\n';
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << e.name() << '\n' << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "Error\n" << e.what() << '\n';
        return 1;
    }
    return 0;
}
