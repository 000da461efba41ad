#include <catch_amalgamated.hpp>

#include "bpsim/dynamics.hpp"
#include "bpsim/fit.hpp"

using namespace bpsim;
using Catch::Approx;

namespace {

SimConfig quiet(const SystemParams& p, double duration) {
    SimConfig c = default_sim_config(p, duration);
    c.noise_amplitude = 0.0;
    return c;
}

double mean_photons(const ComplexSeries& ts, std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < ts.size(); ++i) s += std::norm(ts.samples[i]);
    return s / static_cast<double>(ts.size() - from);
}

SystemParams fig2d_point() { return saturated_coupling(preset_fig23(), dbm_to_watts(-48.0)); }

}  // namespace

TEST_CASE("config validation", "[dynamics]") {
    const auto p = preset_fig23();
    SimConfig c = quiet(p, 1e-4);
    REQUIRE_NOTHROW(c.validate(p));
    c.dt *= 1.5;
    REQUIRE_THROWS_AS(c.validate(p), ConfigError);
    c = quiet(p, 1e-4);
    c.duration = 0.0;
    REQUIRE_THROWS_AS(c.validate(p), ConfigError);
    REQUIRE_THROWS_AS(integrate(p, {cplx(NAN, 0.0), 0.0}, quiet(p, 1e-4)), ConfigError);
}

TEST_CASE("stable fixed point is stationary", "[dynamics]") {
    const auto p = preset_fig23();
    const auto stable = steady_state_solutions(p).stable_branches();
    REQUIRE(stable.size() == 2);
    for (const auto& b : stable) {
        const auto ts = integrate(p, branch_state(b, p), quiet(p, 2e-4));
        const double a0 = std::sqrt(b.photon_number);
        for (const auto& v : ts.samples) REQUIRE(std::abs(std::abs(v) - a0) < 1e-6 * a0);
        REQUIRE(oscillation_detuning(ts) == Approx(b.delta).epsilon(0.01));
    }
}

TEST_CASE("perturbed middle branch falls onto an outer branch", "[dynamics]") {
    const auto p = preset_fig23().with_delta_s(hz_to_rad(3e3));
    const auto ss = steady_state_solutions(p);
    REQUIRE(ss.branches.size() == 3);
    const auto& mid = ss.branches[1];
    REQUIRE_FALSE(mid.stable);
    auto init = branch_state(mid, p);
    init.alpha *= 1.0 + 1e-6;
    const auto ts = integrate(p, init, quiet(p, 1e-3));
    const auto tail = ts.slice(ts.size() / 2, ts.size() / 2);
    const double d = oscillation_detuning(tail);
    const double to_lower = std::abs(d - ss.branches[0].delta), to_upper = std::abs(d - ss.branches[2].delta);
    REQUIRE(std::min(to_lower, to_upper) < 0.02 * p.g);
    REQUIRE(std::abs(d - mid.delta) > 0.5 * p.g);
}

TEST_CASE("uncoupled cavity settles on the Van der Pol amplitude", "[dynamics]") {
    SystemParams p = preset_fig23();
    p.g = 0.0;
    const auto ts = integrate(p, {cplx(1e3, 0.0), 0.0}, quiet(p, 5e-4));
    const double n = (p.gain - 0.5 * p.kappa) / p.gamma_s;
    REQUIRE(std::norm(ts.samples.back()) == Approx(n).epsilon(1e-6));
}

TEST_CASE("noisy runs are deterministic in the seed", "[dynamics]") {
    const auto p = preset_fig23();
    const auto b = steady_state_solutions(p).stable_branches().back();
    SimConfig c = default_sim_config(p, 1e-4, 11);
    c.noise_amplitude *= 1e3;
    const auto a1 = integrate(p, branch_state(b, p), c);
    const auto a2 = integrate(p, branch_state(b, p), c);
    REQUIRE(a1.samples == a2.samples);
    c.rng_seed = 12;
    const auto a3 = integrate(p, branch_state(b, p), c);
    REQUIRE(a1.samples != a3.samples);
}

TEST_CASE("Euler error halves with the step", "[dynamics]") {
    const auto p = preset_fig23().with_delta_s(hz_to_rad(-20e3));
    const auto b = steady_state_solutions(p).stable_branches().back();
    auto init = branch_state(b, p);
    init.alpha *= 0.7;
    init.beta *= 1.2;
    std::vector<std::vector<double>> runs;
    for (int k = 0; k < 3; ++k) {
        SimConfig c = quiet(p, 2e-5);
        c.dt /= std::pow(2.0, k);
        c.decimation = 16u << k;
        const auto ts = integrate(p, init, c, b.delta);
        std::vector<double> amp;
        for (const auto& v : ts.samples) amp.push_back(std::abs(v));
        runs.push_back(amp);
    }
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 0; i < runs[0].size(); ++i) {
        e1 = std::max(e1, std::abs(runs[0][i] - runs[1][i]));
        e2 = std::max(e2, std::abs(runs[1][i] - runs[2][i]));
    }
    REQUIRE(e1 > 0.0);
    REQUIRE(e1 / e2 == Approx(2.0).margin(0.3));
}

TEST_CASE("time-averaged photon number matches the steady state", "[dynamics]") {
    const auto p = preset_fig23().with_delta_s(hz_to_rad(5e3));
    for (const auto& b : steady_state_solutions(p).stable_branches()) {
        const auto ts = integrate(p, branch_state(b, p), default_sim_config(p, 5e-4, 3));
        REQUIRE(mean_photons(ts, 0) == Approx(b.photon_number).epsilon(1e-3));
    }
}

TEST_CASE("runaway amplitude raises Diverged", "[dynamics]") {
    const auto p = preset_fig23();
    const double n = reference_photon_number(p);
    REQUIRE_THROWS_AS(integrate(p, {cplx(50.0 * std::sqrt(n), 0.0), 0.0}, quiet(p, 1e-5)), Diverged);
}

TEST_CASE("parameter trajectory geometry", "[dynamics]") {
    const auto loop = encircle_loop(1.0, 2.0, 1.0);
    REQUIRE(loop.closed());
    REQUIRE(loop.duration() == Approx(4.0));
    REQUIRE(loop.direction() == Direction::clockwise);
    const auto rev = loop.reversed();
    REQUIRE(rev.direction() == Direction::counterclockwise);
    REQUIRE(rev.duration() == Approx(4.0));
    // A -> B takes half a segment
    REQUIRE(loop.at(0.25).first == Approx(-1.0));
    REQUIRE(loop.at(0.25).second == Approx(-1.0));
    REQUIRE(loop.at(1.0).first == Approx(0.0));
    REQUIRE(loop.at(10.0).second == Approx(0.0));
    // the reversed loop heads for E first
    REQUIRE(rev.at(0.25).second == Approx(1.0));
    ParameterTrajectory hold{{{0.0, 0.0, 1.0}, {1.0, 1.0, 1.0}}, Interpolation::hold};
    REQUIRE_FALSE(hold.closed());
    REQUIRE(hold.at(0.9).first == 0.0);
    REQUIRE(hold.at(1.1).first == 1.0);
    REQUIRE_THROWS_AS(ParameterTrajectory{}.validate(), ConfigError);
}

TEST_CASE("hysteresis sweep jumps at the folds", "[dynamics]") {
    const auto p = fig2d_point();
    const double step = hz_to_rad(2e3);
    std::vector<double> grid;
    for (int i = -30; i <= 30; ++i) grid.push_back(i * step);
    const double dwell = 100.0 / std::abs(p.delta_g());
    const auto sw = sweep_hysteresis(p, grid, dwell, default_sim_config(p));
    const auto edges = *hysteresis_edges(p);
    REQUIRE(sw.jump_up);
    REQUIRE(sw.jump_down);
    REQUIRE(*sw.jump_up > edges.second);
    REQUIRE(*sw.jump_up - edges.second <= step * 1.0001);
    REQUIRE(*sw.jump_down < edges.first);
    REQUIRE(edges.first - *sw.jump_down <= step * 1.0001);
    REQUIRE(std::abs(sw.separation() - hysteresis_width(p)) <= 2.0 * step);
    // the stored traces follow the analytic branches
    for (std::size_t i = 0; i < sw.delta_up.size(); ++i) {
        const auto stable = steady_state_solutions(p.with_delta_s(sw.delta_s_up[i])).stable_branches();
        double best = 1e300;
        for (const auto& b : stable) best = std::min(best, std::abs(b.delta - sw.delta_up[i]));
        REQUIRE(best < 0.01 * p.g);
    }

    SECTION("monostable side has no jump") {
        const auto q = preset_fig23().with_delta_g(hz_to_rad(20e3));
        const auto mono = sweep_hysteresis(q, grid, 100.0 / q.delta_g(), default_sim_config(q));
        REQUIRE_FALSE(mono.jump_up);
        REQUIRE_FALSE(mono.jump_down);
        REQUIRE(mono.separation() == 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i)
            REQUIRE(mono.delta_up[i] == Approx(mono.delta_down[grid.size() - 1 - i]).margin(1e-3 * q.g));
    }
}

TEST_CASE("encircling the transition point is chiral", "[dynamics]") {
    const auto p = preset_fig23();
    const auto cw = encircle_loop(hz_to_rad(30e3), hz_to_rad(40e3), 0.5e-3);
    const auto ccw = cw.reversed();
    struct Case {
        const ParameterTrajectory* traj;
        BranchLabel start, final_branch;
        std::size_t jumps;
    };
    const Case cases[] = {{&cw, BranchLabel::upper, BranchLabel::lower, 0},
                          {&ccw, BranchLabel::upper, BranchLabel::upper, 1},
                          {&cw, BranchLabel::lower, BranchLabel::lower, 1},
                          {&ccw, BranchLabel::lower, BranchLabel::upper, 0}};
    const double lo = hz_to_rad(40e3), hi = hz_to_rad(80e3), ds = hz_to_rad(10e3);
    ParameterTrajectory small;
    small.waypoints = {{lo, 0.0, 2e-4}, {lo, -ds, 2e-4}, {hi, -ds, 2e-4}, {hi, ds, 2e-4}, {lo, ds, 2e-4}, {lo, 0.0, 0.0}};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (const auto& c : cases) {
            const auto r = encircle(p, *c.traj, c.start, default_sim_config(p, 1e-3, seed));
            CAPTURE(seed, to_string(c.traj->direction()), to_string(c.start));
            REQUIRE(r.final_branch == c.final_branch);
            REQUIRE(r.jumps() == c.jumps);
        }
    }
    SECTION("a loop that stays monostable changes nothing") {
        const auto q = preset_fig23().with_delta_g(hz_to_rad(60e3));
        const auto r = encircle(q, small, BranchLabel::single, default_sim_config(q, 1e-3, 1));
        REQUIRE(r.final_branch == BranchLabel::single);
        REQUIRE(r.jumps() == 0);
        REQUIRE(r.final_delta == Approx(steady_state_solutions(q.with_delta_g(lo)).branches.front().delta).margin(0.01 * q.g));
    }
    SECTION("start branch must exist") {
        const auto q = preset_fig23().with_delta_g(hz_to_rad(60e3));
        REQUIRE_THROWS_AS(encircle(q, small, BranchLabel::upper, default_sim_config(q)), StartBranchMissing);
        REQUIRE_THROWS_AS(encircle(p, cw, BranchLabel::single, default_sim_config(p)), StartBranchMissing);
    }
}

TEST_CASE("critical slowing past the fold", "[dynamics]") {
    const auto p = fig2d_point();
    const double w = hysteresis_width(p);
    std::vector<double> x, y;
    for (double f : {0.16, 0.08, 0.04, 0.02, 0.01, 0.005}) {
        const auto r = transition_edge(p, f * w, default_sim_config(p, 5e-3, 1));
        REQUIRE(r.destination < 0.0);
        REQUIRE(r.origin > 0.0);
        if (!y.empty()) REQUIRE(r.delay > y.back());
        x.push_back(f * w);
        y.push_back(r.delay);
    }
    const auto fit = fit_power_law(x, y);
    REQUIRE(fit.exponent < 0.0);
    REQUIRE(fit.r2 > 0.95);

    SECTION("large step is fast") {
        // the step carries delta_s far enough to bound dt
        const auto far = p.with_delta_s(hysteresis_edges(p)->second + 10.0 * w);
        const auto r = transition_edge(p, 10.0 * w, default_sim_config(far, 5e-3, 1));
        REQUIRE(r.delay < 5.0 / std::abs(p.delta_g()));
    }
    SECTION("no transition") {
        REQUIRE_THROWS_AS(transition_edge(p, 0.0, default_sim_config(p)), NoTransition);
        REQUIRE_THROWS_AS(transition_edge(p, -0.1 * w, default_sim_config(p)), NoTransition);
        const auto q = preset_fig23().with_delta_g(hz_to_rad(10e3));
        REQUIRE_THROWS_AS(transition_edge(q, w, default_sim_config(q)), NoTransition);
    }
}
