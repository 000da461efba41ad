#include <catch_amalgamated.hpp>

#include "bpsim/experiments.hpp"

#include <fstream>
#include <sstream>

using namespace bpsim;
using Catch::Approx;

namespace {

ExperimentSpec make(const std::string& name) {
    ExperimentSpec s;
    s.name = name;
    s.params = experiment_preset(name);
    s.threads = 1;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

double cell(const Table& t, std::size_t row, const std::string& col) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == col) return std::stod(t.rows[row][i]);
    throw std::runtime_error("no column " + col);
}

}  // namespace

TEST_CASE("fig1e coalescence table", "[experiments]") {
    const auto r = run_fig1e(make("fig1e"));
    REQUIRE(r.number("coalescence_exponent") == Approx(0.5).margin(0.02));
    REQUIRE(std::abs(r.number("bp_delta_g_hz")) < 1e-6 * r.number("bp_coupling_hz"));
    const auto& roots = r.table("roots");
    for (std::size_t i = 0; i < roots.rows.size(); ++i) {
        if (cell(roots, i, "delta_g_hz") > 0.0) {
            REQUIRE(cell(roots, i, "n_roots") == 1.0);
            REQUIRE(cell(roots, i, "stable") == 1.0);
        } else {
            REQUIRE(cell(roots, i, "n_roots") == 3.0);
        }
    }
    const auto& c = r.table("coalescence");
    for (std::size_t i = 0; i < c.rows.size(); ++i)
        REQUIRE(cell(c, i, "separation_hz") == Approx(cell(c, i, "closed_form_hz")).epsilon(1e-8));
}

TEST_CASE("fig2de hysteresis width against power", "[experiments]") {
    auto spec = make("fig2de");
    spec.sweeps["power_dbm"] = {-52.0, -48.0, -45.0, -40.0};
    const auto r = run_fig2de(spec);
    REQUIRE(r.number("bp_power_dbm") == Approx(-42.5).margin(0.5));
    REQUIRE(r.number("operating_width_hz") == Approx(40e3).epsilon(0.25));
    const double step = r.number("grid_step_hz");
    REQUIRE(std::abs(r.number("operating_sim_separation_hz") - r.number("operating_width_hz")) <= 2.0 * step);
    const auto& w = r.table("width_vs_power");
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.rows.size(); ++i) {
        const double width = cell(w, i, "width_hz");
        REQUIRE(width <= prev);
        prev = width;
        const double sim = cell(w, i, "sim_separation_hz");
        if (!std::isnan(sim)) REQUIRE(std::abs(sim - width) <= 2.0 * step);
        if (cell(w, i, "power_dbm") > -42.5) REQUIRE(width == 0.0);
    }
    // the traces jump in opposite places
    const auto& h = r.table("hysteresis");
    REQUIRE(h.rows.size() == 61);
    REQUIRE(cell(h, 30, "delta_up_hz") > 0.0);
    REQUIRE(cell(h, 30, "delta_down_hz") < 0.0);
}

TEST_CASE("fig3 chirality and transition edge", "[experiments]") {
    auto spec = make("fig3");
    spec.sweeps["seeds"] = {2.0};
    spec.sweeps["edge_fraction"] = {0.16, 0.04, 0.01, 0.0025};
    const auto r = run_fig3(spec);
    REQUIRE(r.number("encircle_runs") == 8.0);
    REQUIRE(r.number("encircle_matches") == 8.0);
    REQUIRE(r.value("edge_monotone") == "yes");
    REQUIRE(r.number("edge_exponent") < 0.0);
    REQUIRE(r.number("edge_r2") > 0.95);
    REQUIRE(std::abs(r.number("edge_exponent") - r.number("edge_exponent_half_dt")) < 0.05);
    REQUIRE(r.table("encircle_trace").rows.size() > 100);
}

TEST_CASE("fig4 magnetometry chain", "[experiments]") {
    auto spec = make("fig4");
    spec.sweeps["delta_g_khz"] = {0.6, 3.0, 13.0, 46.1};
    spec.sweeps["record_ms"] = {16.0};
    spec.sweeps["map_delta_g_khz"] = {0.6, 6.0};
    spec.sweeps["map_delta_s_khz"] = {-1.0, 0.0, 1.0};
    const auto r = run_fig4(spec);
    // drive re-centring finds nothing to correct in a drift-free simulation
    REQUIRE(r.number("drive_max_offset_hz") < 0.01 * 1e3);
    REQUIRE(r.number("quasistatic_S") == Approx(r.number("analytic_S_at_0p6khz")).epsilon(0.1));
    REQUIRE(r.number("log_response_slope_small") == Approx(1.0).margin(0.05));
    REQUIRE(r.number("log_response_slope_large") == Approx(1.0 / 3.0).margin(0.05));
    REQUIRE(r.number("reported_snr_gain") == 16.875);
    REQUIRE(r.table("responsivity_map").rows.size() == 6);
    const auto& t = r.table("snr_vs_delta_g");
    REQUIRE(t.rows.size() == 4);
    // response and noise both grow towards the transition point
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        REQUIRE(cell(t, i, "S") < cell(t, i - 1, "S"));
        REQUIRE(cell(t, i, "eq2") < cell(t, i - 1, "eq2"));
    }
    // far from the transition point the tone reads the static responsivity
    REQUIRE(cell(t, 3, "S") == Approx(cell(t, 3, "S_analytic_dc")).epsilon(0.15));
    REQUIRE(r.number("closest_snr_gain") == Approx(r.number("closest_S") / r.number("closest_N")));
    REQUIRE(r.number("sensitivity_T_rtHz") < r.number("sensitivity_far_T_rtHz"));
    REQUIRE(r.number("leeson_bound_T_rtHz") > 1.3e-12);
}

TEST_CASE("outputs are byte-identical and carry a manifest", "[experiments]") {
    auto spec = make("fig3");
    spec.sweeps["seeds"] = {1.0};
    spec.sweeps["edge_fraction"] = {0.16, 0.08, 0.04, 0.02};
    const auto base = std::filesystem::temp_directory_path() / "bpsim_test_experiments";
    std::filesystem::remove_all(base);
    const auto d1 = write_experiment(spec, run_fig3(spec), base / "a");
    const auto d2 = write_experiment(spec, run_fig3(spec), base / "b");
    for (const auto& entry : std::filesystem::directory_iterator(d1)) {
        const auto other = d2 / entry.path().filename();
        REQUIRE(std::filesystem::exists(other));
        REQUIRE(slurp(entry.path()) == slurp(other));
    }
    REQUIRE(std::filesystem::exists(d1 / "encircle.csv"));
    REQUIRE(std::filesystem::exists(d1 / "summary.txt"));
    const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
    REQUIRE(m["seed"] == 1);
    REQUIRE(m["inputs_fnv1a64"].get<std::string>().size() == 16);
    REQUIRE(m["version"] == BPSIM_VERSION);

    auto other = spec;
    other.seed = 2;
    REQUIRE(inputs_digest(other) != inputs_digest(spec));
    std::filesystem::remove_all(base);
}

TEST_CASE("experiment spec validation", "[experiments]") {
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ull);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    auto spec = make("fig1e");
    spec.sweeps["delta_g_khz"] = {-1.0};
    REQUIRE_THROWS_AS(run_fig1e(spec), ConfigError);
    spec.name = "fig9";
    REQUIRE_THROWS_AS(run_experiment(spec), ConfigError);
    auto s2 = make("fig2de");
    s2.sweeps["grid_khz"] = {1.0, 2.0};
    REQUIRE_THROWS_AS(run_fig2de(s2), ConfigError);
}
