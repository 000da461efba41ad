#include <catch_amalgamated.hpp>

#include "bpsim/model.hpp"

#include <random>

using namespace bpsim;
using Catch::Approx;

namespace {

constexpr double kHz = 2.0 * std::numbers::pi * 1e3;

// Oracle: the self-oscillation condition written directly from the complex
// steady state of the two coupled modes. Returns the required saturated gain
// X = G - gamma_s n rotated into the loop frame; a root is where Im == 0.
cplx required_gain(const SystemParams& p, double delta) {
    const double h = 0.5 * p.gamma_spin;
    const cplx spin = p.g * p.g / cplx(h, p.delta_s - delta);
    const cplx rhs = 0.5 * p.kappa - cplx(0.0, delta) + spin;
    return rhs * std::polar(1.0, -p.loop_phase);
}

// Oracle: number of sign changes of Im(required_gain) on a fine grid.
int brute_force_root_count(const SystemParams& p, double span, int n = 200001) {
    int count = 0;
    double prev = required_gain(p, -span).imag();
    for (int i = 1; i < n; ++i) {
        const double d = -span + 2.0 * span * i / (n - 1);
        const double v = required_gain(p, d).imag();
        if ((v > 0.0) != (prev > 0.0)) ++count;
        prev = v;
    }
    return count;
}

// Oracle: time derivative of the coupled modes, frame rotating at delta.
std::array<double, 4> flow(const SystemParams& p, double delta, const std::array<double, 4>& x) {
    const cplx a(x[0], x[1]), b(x[2], x[3]);
    const cplx rot = std::polar(1.0, p.loop_phase);
    const cplx da = (cplx(0.0, delta) + rot * (p.gain - p.gamma_s * std::norm(a)) - 0.5 * p.kappa) * a -
                    cplx(0.0, p.g) * b;
    const cplx db = cplx(-0.5 * p.gamma_spin, delta - p.delta_s) * b - cplx(0.0, p.g) * a;
    return {da.real(), da.imag(), db.real(), db.imag()};
}

}  // namespace

TEST_CASE("polariton eigenvalues solve the 2x2 characteristic equation", "[model]") {
    SystemParams p = preset_fig23();
    p.omega_c = hz_to_rad(2.87e9);
    for (double ds : {-500e3, -50e3, 0.0, 120e3}) {
        p.delta_s = hz_to_rad(ds);
        const auto e = polariton_eigenvalues(p).eigenvalues;
        REQUIRE(e[0].real() >= e[1].real());
        for (const cplx& lam : e) {
            const cplx det = (cplx(p.omega_c, -0.5 * p.kappa) - lam) * (cplx(p.omega_s(), -0.5 * p.gamma_spin) - lam) -
                             p.g * p.g;
            REQUIRE(std::abs(det) < 1e-6 * p.omega_c * p.g);
        }
    }
    SECTION("equal linewidths on resonance split by 2g") {
        SystemParams q = p;
        q.delta_s = 0.0;
        q.gamma_spin = q.kappa;
        const auto e = polariton_eigenvalues(q).eigenvalues;
        REQUIRE(e[0].real() - e[1].real() == Approx(2.0 * q.g));
        REQUIRE(e[0].imag() == Approx(-0.5 * q.kappa));
    }
}

TEST_CASE("outer branches on resonance sit at +-sqrt(g^2 - (Gamma/2)^2)", "[model]") {
    const SystemParams p = preset_fig23();
    const auto roots = oscillation_roots(p);
    REQUIRE(roots.size() == 3);
    const double h = 0.5 * p.gamma_spin;
    const double outer = std::sqrt(p.g * p.g - h * h);
    REQUIRE(roots[0].value == Approx(-outer).epsilon(1e-10));
    REQUIRE(roots[1].value == Approx(0.0).margin(1e-6 * p.g));
    REQUIRE(roots[2].value == Approx(outer).epsilon(1e-10));
    REQUIRE(rad_to_hz(outer) == Approx(153.6e3).epsilon(1e-3));
}

TEST_CASE("cubic roots match the direct complex steady-state condition", "[model]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ds(-150.0, 150.0), dg(-80.0, 60.0), ph(-0.3, 0.3);
    for (int trial = 0; trial < 60; ++trial) {
        SystemParams p = preset_fig23().with_delta_g(dg(rng) * kHz).with_delta_s(ds(rng) * kHz);
        p.loop_phase = (trial % 2) ? ph(rng) : 0.0;
        const auto roots = oscillation_roots(p);
        int counted = 0;
        for (const auto& r : roots) counted += r.multiplicity % 2;  // even roots do not change sign
        REQUIRE(counted == brute_force_root_count(p, 2000.0 * kHz));
        for (const auto& r : roots) {
            const cplx x = required_gain(p, r.value);
            REQUIRE(std::abs(x.imag()) < 1e-7 * std::abs(x));
            REQUIRE(frequency_residual(p, r.value) == Approx(0.0).margin(1e-9 * std::pow(p.g, 3)));
            // gain balance gives the photon number
            REQUIRE(photon_number_at(p, r.value) * p.gamma_s == Approx(p.gain - x.real()).epsilon(1e-9));
        }
    }
}

TEST_CASE("steady states are fixed points of the flow", "[model]") {
    const SystemParams p = preset_fig23().with_delta_s(12.0 * kHz);
    const auto ss = steady_state_solutions(p);
    REQUIRE_FALSE(ss.below_threshold);
    for (const auto& b : ss.branches) {
        REQUIRE(b.photon_number > 0.0);
        const auto [a, s] = branch_fields(b, p);
        const auto f = flow(p, b.delta, {a.real(), a.imag(), s.real(), s.imag()});
        for (double v : f) REQUIRE(std::abs(v) < 1e-9 * p.g * std::abs(a));
    }
}

TEST_CASE("stability matches eigenvalues of a finite-difference Jacobian", "[model]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ds(-100.0, 100.0), dg(-70.0, 40.0);
    for (int trial = 0; trial < 40; ++trial) {
        const SystemParams p = preset_fig23().with_delta_g(dg(rng) * kHz).with_delta_s(ds(rng) * kHz);
        for (const auto& b : steady_state_solutions(p).branches) {
            if (b.below_threshold) continue;
            const auto [a, s] = branch_fields(b, p);
            const std::array<double, 4> x0{a.real(), a.imag(), s.real(), s.imag()};
            Eigen::Matrix4d J;
            for (int j = 0; j < 4; ++j) {
                const double h = 1e-6 * std::abs(a);
                auto xp = x0, xm = x0;
                xp[j] += h;
                xm[j] -= h;
                const auto fp = flow(p, b.delta, xp), fm = flow(p, b.delta, xm);
                for (int i = 0; i < 4; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
            }
            const auto ev = Eigen::EigenSolver<Eigen::Matrix4d>(J, false).eigenvalues();
            // one neutral phase mode; stability is the sign of the largest of the rest
            std::array<double, 4> re{};
            for (int i = 0; i < 4; ++i) re[i] = ev[i].real();
            std::sort(re.begin(), re.end(), [](double l, double r) { return std::abs(l) < std::abs(r); });
            const double worst = std::max({re[1], re[2], re[3]});
            if (std::abs(worst) < 1e-3 * p.g) continue;  // too near a fold to compare
            REQUIRE(b.stable == (worst < 0.0));
        }
    }
}

TEST_CASE("branch structure on resonance", "[model]") {
    SECTION("bistable: outer stable, middle unstable") {
        const auto ss = steady_state_solutions(preset_fig23());
        REQUIRE(ss.branches.size() == 3);
        REQUIRE(ss.branches[0].stable);
        REQUIRE_FALSE(ss.branches[1].stable);
        REQUIRE(ss.branches[2].stable);
        REQUIRE(ss.branches[0].label == BranchLabel::lower);
        REQUIRE(ss.branches[2].label == BranchLabel::upper);
    }
    SECTION("monostable: single stable branch at the cavity") {
        const auto ss = steady_state_solutions(preset_fig23().with_delta_g(20.0 * kHz));
        REQUIRE(ss.branches.size() == 1);
        REQUIRE(ss.branches[0].stable);
        REQUIRE(ss.branches[0].delta == Approx(0.0).margin(1e-6 * kHz));
    }
    SECTION("below threshold") {
        SystemParams p = preset_fig23();
        p.gain = 0.5 * p.kappa;
        const auto ss = steady_state_solutions(p);
        REQUIRE(ss.below_threshold);
        REQUIRE(ss.stable_branches().empty());
    }
}

TEST_CASE("hysteresis edges agree with the closed-form fold points", "[model]") {
    for (double dg_khz : {-62.5, -30.0, -10.0, -1.0, -0.05}) {
        const SystemParams p = preset_fig23().with_delta_g(dg_khz * kHz);
        const auto edges = hysteresis_edges(p);
        const auto folds = fold_points(p);
        REQUIRE(edges.has_value());
        REQUIRE(folds.size() == 2);
        REQUIRE(edges->first == Approx(folds[0].first).epsilon(1e-6));
        REQUIRE(edges->second == Approx(folds[1].first).epsilon(1e-6));
        // at a fold the cubic has a double root
        const auto roots = oscillation_roots(p.with_delta_s(folds[1].first));
        REQUIRE(roots.size() <= 3);
        REQUIRE(frequency_residual(p.with_delta_s(folds[1].first), folds[1].second) ==
                Approx(0.0).margin(1e-8 * std::pow(p.g, 3)));
    }
    REQUIRE(rad_to_hz(hysteresis_width(preset_fig23().with_delta_g(-62.5 * kHz))) == Approx(88.6e3).epsilon(5e-3));
    REQUIRE(hysteresis_width(preset_fig23().with_delta_g(1.0 * kHz)) == 0.0);
    REQUIRE(hysteresis_width(preset_fig23().with_delta_g(0.0)) == 0.0);
}

TEST_CASE("width closes as |delta_g|^(3/2)", "[model]") {
    const double w1 = hysteresis_width(preset_fig23().with_delta_g(-0.1 * kHz));
    const double w2 = hysteresis_width(preset_fig23().with_delta_g(-0.4 * kHz));
    REQUIRE(std::log(w2 / w1) / std::log(4.0) == Approx(1.5).margin(0.01));
}

TEST_CASE("transition point location", "[model]") {
    const SystemParams p = preset_fig23();
    const double h = 0.5 * p.gamma_spin;
    SECTION("coupling") {
        REQUIRE(locate_bp(p, Tunable::coupling, 0.5 * h, 2.0 * h) == Approx(h).epsilon(1e-9));
    }
    SECTION("delta_g") {
        REQUIRE(locate_bp(p, Tunable::delta_g, -10.0 * kHz, 10.0 * kHz) == Approx(0.0).margin(1e-6 * kHz));
    }
    SECTION("power, through saturation") {
        const double pbp = locate_bp(p, Tunable::power, dbm_to_watts(-60.0), dbm_to_watts(-20.0));
        REQUIRE(watts_to_dbm(pbp) == Approx(-42.5).margin(1e-6));
        SystemParams q = p;
        q.p_sat = calibrate_saturation(p, dbm_to_watts(-45.0));
        const double pbp2 = locate_bp(q, Tunable::power, dbm_to_watts(-60.0), dbm_to_watts(-20.0));
        REQUIRE(watts_to_dbm(pbp2) == Approx(-45.0).margin(1e-6));
    }
    SECTION("not bracketed") {
        REQUIRE_THROWS_AS(locate_bp(p, Tunable::coupling, 1.1 * h, 2.0 * h), NotBracketed);
    }
}

TEST_CASE("loop phase shifts the transition point", "[model]") {
    SystemParams p = preset_fig23();
    p.delta_g_offset = 2.0 * kHz;
    const SystemParams q = calibrate_loop_phase(p);
    REQUIRE(q.loop_phase > 0.0);
    REQUIRE(locate_bp(q, Tunable::delta_g, -10.0 * kHz, 10.0 * kHz) == Approx(0.0).margin(1e-3 * kHz));
    // even in the phase
    SystemParams r = q;
    r.loop_phase = -q.loop_phase;
    REQUIRE(locate_bp(r, Tunable::delta_g, -10.0 * kHz, 10.0 * kHz) == Approx(0.0).margin(1e-3 * kHz));
}

TEST_CASE("reflection spectrum", "[model]") {
    SystemParams p = preset_fig23();
    p.omega_c = hz_to_rad(2.87e9);
    SECTION("bare cavity: Lorentzian dip with depth (1 - 2 kc1/k)^2") {
        p.g = 0.0;
        const auto r = reflection_spectrum(p, {p.omega_c, p.omega_c + 100.0 * p.kappa});
        const double depth = 1.0 - 2.0 * p.kappa_c1 / p.kappa;
        REQUIRE(r[0] == Approx(depth * depth));
        REQUIRE(r[1] == Approx(1.0).margin(1e-4));
    }
    SECTION("strong coupling splits the dip") {
        std::vector<double> probe;
        for (int i = -400; i <= 400; ++i) probe.push_back(p.omega_c + i * kHz);
        const auto r = reflection_spectrum(p, probe);
        const auto centre = r[400];
        const auto lo = std::min_element(r.begin(), r.begin() + 400);
        const auto hi = std::min_element(r.begin() + 401, r.end());
        REQUIRE(*lo < centre);
        REQUIRE(*hi < centre);
        const double split = (hi - lo) * kHz;
        REQUIRE(split == Approx(2.0 * p.g).epsilon(0.1));
    }
    SECTION("hyperfine triplet preserves total coupling far away") {
        SystemParams q = p;
        q.hyperfine = nitrogen14_triplet();
        const double far = p.omega_c + 2.0 * std::numbers::pi * 20e6;
        REQUIRE(reflection_spectrum(q, {far})[0] == Approx(reflection_spectrum(p, {far})[0]).epsilon(1e-3));
    }
}

TEST_CASE("responsivity matches a finite difference along the branch", "[model]") {
    for (double dg_khz : {0.6, 5.0, 30.0}) {
        for (double ds_khz : {0.0, 3.0, -20.0}) {
            const SystemParams p = preset_fig23().with_delta_g(dg_khz * kHz).with_delta_s(ds_khz * kHz);
            const double step = 1e-3 * kHz;
            const double dp = oscillation_roots(p.with_delta_s(p.delta_s + step)).front().value;
            const double dm = oscillation_roots(p.with_delta_s(p.delta_s - step)).front().value;
            const double fd = (dp - dm) / (2.0 * step);
            const auto r = responsivity(p);
            REQUIRE_FALSE(r.divergent);
            REQUIRE(r.value == Approx(fd).epsilon(1e-4));
        }
    }
    SECTION("closed form on resonance") {
        const SystemParams p = preset_fig23().with_delta_g(0.6 * kHz);
        const double h = 0.5 * p.gamma_spin;
        REQUIRE(responsivity(p).value == Approx(p.g * p.g / (p.g * p.g - h * h)));
    }
    SECTION("with loop phase") {
        SystemParams p = preset_fig23().with_delta_g(8.0 * kHz).with_delta_s(2.0 * kHz);
        p.loop_phase = 0.1;
        const double step = 1e-3 * kHz;
        const double fd = (oscillation_roots(p.with_delta_s(p.delta_s + step)).front().value -
                           oscillation_roots(p.with_delta_s(p.delta_s - step)).front().value) /
                          (2.0 * step);
        REQUIRE(responsivity(p).value == Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("bistable map counts two stable branches inside the folds", "[model]") {
    const SystemParams p = preset_fig23();
    const std::vector<double> dg{-30.0 * kHz, 10.0 * kHz};
    std::vector<double> ds;
    for (int i = -20; i <= 20; ++i) ds.push_back(i * 2.0 * kHz);
    const auto m = bistable_map(p, dg, ds, 2);
    const auto folds = fold_points(p.with_delta_g(-30.0 * kHz));
    for (std::size_t j = 0; j < ds.size(); ++j) {
        const bool inside = ds[j] > folds[0].first && ds[j] < folds[1].first;
        REQUIRE(m.count(0, j) == (inside ? 2 : 1));
        REQUIRE(m.count(1, j) == 1);
        if (inside) REQUIRE(std::isfinite(m.mean(0, j)));
    }
    const auto serial = bistable_map(p, dg, ds, 1);
    REQUIRE(serial.stable_count == m.stable_count);
}
