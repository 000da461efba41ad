#include <catch_amalgamated.hpp>

#include "bpsim/params.hpp"

#include <sstream>

using namespace bpsim;
using Catch::Approx;

TEST_CASE("unit helpers", "[params]") {
    REQUIRE(hz_to_rad(1.0) == Approx(2.0 * std::numbers::pi));
    REQUIRE(rad_to_hz(hz_to_rad(123.4)) == Approx(123.4));
    REQUIRE(dbm_to_watts(0.0) == Approx(1e-3));
    REQUIRE(dbm_to_watts(-30.0) == Approx(1e-6));
    REQUIRE(watts_to_dbm(dbm_to_watts(-42.5)) == Approx(-42.5));
}

TEST_CASE("presets validate and carry the fitted linewidths", "[params]") {
    for (const auto& p : {preset_fig23(), preset_fig4(), preset_fig2c()}) {
        REQUIRE_NOTHROW(p.validate());
        REQUIRE(rad_to_hz(p.g) == Approx(220e3));
        REQUIRE(p.kappa >= p.kappa_c1 + p.kappa_c2);
    }
    REQUIRE(rad_to_hz(preset_fig23().gamma_spin) == Approx(315e3));
    REQUIRE(rad_to_hz(preset_fig4().gamma_spin) == Approx(301e3));
    REQUIRE(rad_to_hz(preset_fig2c().kappa) == Approx(260e3));
    REQUIRE(rad_to_hz(preset_fig23().kappa) == Approx(320e3));
}

TEST_CASE("delta_g is Gamma/2 - g - xi and with_delta_g inverts it", "[params]") {
    SystemParams p = preset_fig23();
    REQUIRE(p.delta_g() == Approx(0.5 * p.gamma_spin - p.g));
    p.delta_g_offset = hz_to_rad(2e3);
    for (double dg_khz : {-60.0, -1.0, 0.0, 0.6, 45.0}) {
        const double dg = hz_to_rad(dg_khz * 1e3);
        REQUIRE(p.with_delta_g(dg).delta_g() == Approx(dg).margin(1e-6));
    }
}

TEST_CASE("validate rejects broken invariants", "[params]") {
    SystemParams p = preset_fig23();
    SECTION("kappa below port sum") {
        p.kappa = p.kappa_c1;
        REQUIRE_THROWS_AS(p.validate(), ConfigError);
    }
    SECTION("non-positive spin linewidth") {
        p.gamma_spin = 0.0;
        REQUIRE_THROWS_AS(p.validate(), ConfigError);
    }
    SECTION("hyperfine weights") {
        p.hyperfine = {{0.0, 0.5}};
        REQUIRE_THROWS_AS(p.validate(), ConfigError);
    }
    SECTION("non-finite") {
        p.g = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(p.validate(), ConfigError);
    }
}

TEST_CASE("key-value format parses units and round-trips", "[params]") {
    std::istringstream in(
        "preset = fig4\n"
        "g = 200 kHz\n"
        "power = -40 dBm\n"
        "loop_phase = 3 deg\n"
        "hyperfine = -2.1 MHz:0.25, 0:0.5, 2.1MHz:0.25\n"
        "gamma_s = 1.5e-3\n");
    const SystemParams p = parse_params(in, "test.cfg");
    REQUIRE(rad_to_hz(p.gamma_spin) == Approx(301e3));
    REQUIRE(rad_to_hz(p.g) == Approx(200e3));
    REQUIRE(p.power == Approx(1e-7));
    REQUIRE(p.loop_phase == Approx(3.0 * std::numbers::pi / 180.0));
    REQUIRE(p.hyperfine.size() == 3);
    REQUIRE(rad_to_hz(p.hyperfine[2].detuning) == Approx(2.1e6));
    REQUIRE(p.gamma_s == Approx(1.5e-3));

    std::istringstream again(format_params(p));
    const SystemParams q = parse_params(again);
    REQUIRE(q.g == p.g);
    REQUIRE(q.gamma_s == p.gamma_s);
    REQUIRE(q.loop_phase == p.loop_phase);
    REQUIRE(q.p_sat == p.p_sat);
    REQUIRE(q.hyperfine.size() == 3);
    REQUIRE(q.hyperfine[0].detuning == p.hyperfine[0].detuning);
    REQUIRE(format_params(q) == format_params(p));
}

TEST_CASE("parse errors carry the line number", "[params]") {
    auto error_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_params(in, "bad.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    REQUIRE_THAT(error_of("g = 1 kHz\nbogus = 3\n"), Catch::Matchers::ContainsSubstring("bad.cfg:2:"));
    REQUIRE_THAT(error_of("\n\ng = 1 parsec\n"), Catch::Matchers::ContainsSubstring("bad.cfg:3:"));
    REQUIRE_THAT(error_of("g = 1 kHz\npreset = fig4\n"), Catch::Matchers::ContainsSubstring("first"));
    REQUIRE_THAT(error_of("no equals sign\n"), Catch::Matchers::ContainsSubstring("bad.cfg:1:"));
    REQUIRE_THAT(error_of("kappa = 1 Hz\n"), Catch::Matchers::ContainsSubstring("kappa"));
}

TEST_CASE("thermal occupation and photon number", "[params]") {
    // kT / hbar w at room temperature and 2.87 GHz is about 2100
    const double n = thermal_occupation(290.0);
    REQUIRE(n == Approx(kBoltzmann * 290.0 / (kHbar * hz_to_rad(kNvCarrierHz))).epsilon(1e-3));
    REQUIRE(thermal_occupation(0.0) == 0.0);
    const SystemParams p = preset_fig23();
    const double photons = photon_number_for_power(p, 1e-7);
    REQUIRE(photons * kHbar * hz_to_rad(kNvCarrierHz) * p.kappa_c2 == Approx(1e-7));
}
