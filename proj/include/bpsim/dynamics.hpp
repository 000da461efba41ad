#pragma once

// Time-domain integration of the noisy coupled-mode equations, and the
// experiments built on it: slow hysteresis sweeps, encircling the transition
// point, and the delayed switching past a fold.
//
// The integrator works in a frame that co-rotates with the oscillation. Every
// block of `decimation` steps the frame frequency is reset to the measured
// rotation rate, so a steady state is an exact fixed point of the Euler map
// and the step only has to resolve the slow envelope. The output is the
// cavity field in the frame of the bare cavity, alpha_lab = alpha_rot e^{-i theta}.
// With the e^{-i w t} convention a positive detuning Delta appears at
// negative spectral frequency.

#include "bpsim/error.hpp"
#include "bpsim/model.hpp"
#include "bpsim/params.hpp"
#include "bpsim/spectral.hpp"
#include "bpsim/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bpsim {

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

/// Fastest rate the step has to resolve. The spin precesses at delta_s
/// relative to a frame near the cavity.
inline double fastest_rate(const SystemParams& p) {
    return std::max({p.kappa, p.gamma_spin, p.g, std::abs(p.gain - 0.5 * p.kappa), std::abs(p.delta_s)});
}

inline double max_stable_dt(const SystemParams& p) { return 0.05 / fastest_rate(p); }

/// Standard deviation per sqrt(Hz) of the thermal field noise entering the
/// cavity through its total loss.
inline double thermal_noise_amplitude(const SystemParams& p) {
    return std::sqrt(p.kappa * thermal_occupation(p.temperature));
}

struct SimConfig {
    double dt = 2e-8;             // s
    double noise_amplitude = 0.0; // sqrt(photons rad/s); complex increments have E|dW|^2 = dt
    std::uint64_t rng_seed = 1;
    double duration = 1e-3;       // s
    std::size_t decimation = 16;  // steps per output sample

    void validate(const SystemParams& p) const {
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (dt > max_stable_dt(p) * (1.0 + 1e-12)) {
            throw ConfigError("dt " + std::to_string(dt) + " s exceeds 0.05/max rate = " +
                              std::to_string(max_stable_dt(p)) + " s");
        }
        if (!(noise_amplitude >= 0.0)) throw ConfigError("noise_amplitude must be >= 0");
        if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
        if (decimation == 0) throw ConfigError("decimation must be >= 1");
    }

    double output_rate() const { return 1.0 / (dt * static_cast<double>(decimation)); }
};

/// Default configuration for `p`: the largest allowed step and thermal noise.
inline SimConfig default_sim_config(const SystemParams& p, double duration = 1e-3, std::uint64_t seed = 1) {
    SimConfig c;
    c.dt = max_stable_dt(p);
    c.noise_amplitude = thermal_noise_amplitude(p);
    c.rng_seed = seed;
    c.duration = duration;
    return c;
}

struct FieldState {
    cplx alpha;
    cplx beta;
};

/// Lab-frame fields of a steady-state branch at t = 0.
inline FieldState branch_state(const SteadyStateBranch& b, const SystemParams& p) {
    const auto [a, s] = branch_fields(b, p);
    return {a, s};
}

/// Largest steady amplitude scale used by the divergence guard.
inline double reference_photon_number(const SystemParams& p) {
    double n = std::max(p.gain - 0.5 * p.kappa, 0.0) / p.gamma_s;
    for (const auto& b : steady_state_solutions(p).branches) n = std::max(n, b.photon_number);
    return std::max(n, 1.0);
}

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

struct BlockRecord {
    double t_end = 0.0;   // s
    cplx alpha;           // cavity frame, sampled at t_end
    double delta = 0.0;   // rad/s, mean oscillation detuning over the block
};

class Integrator {
public:
    Integrator(const SimConfig& cfg, FieldState init, double frame_delta, double reference_photons)
        : cfg_(cfg), rng_(cfg.rng_seed), alpha_(init.alpha), beta_(init.beta), frame_(frame_delta),
          limit_(1e3 * std::sqrt(reference_photons)) {
        if (!std::isfinite(init.alpha.real()) || !std::isfinite(init.alpha.imag()) ||
            !std::isfinite(init.beta.real()) || !std::isfinite(init.beta.imag())) {
            throw ConfigError("initial state is not finite");
        }
        if (!std::isfinite(frame_delta)) frame_ = 0.0;
    }

    double time() const { return t_; }
    double frame_delta() const { return frame_; }

    FieldState lab_state() const {
        const cplx ph = std::polar(1.0, -theta_);
        return {alpha_ * ph, beta_ * ph};
    }

    /// Advances `decimation` steps at fixed parameters.
    BlockRecord step_block(const SystemParams& p) {
        const std::size_t m = cfg_.decimation;
        const double dt = cfg_.dt;
        const cplx rot = std::polar(1.0, p.loop_phase);
        const double half_kappa = 0.5 * p.kappa, h = p.half_spin_width();
        const cplx ig(0.0, p.g);
        const double sigma = cfg_.noise_amplitude * std::sqrt(0.5 * dt);  // per quadrature
        const cplx spin_rate(-h, frame_ - p.delta_s);
        const cplx cav_rate_lin(-half_kappa, frame_);
        const cplx a_start = alpha_;
        for (std::size_t i = 0; i < m; ++i) {
            const cplx a = alpha_, b = beta_;
            const double n = std::norm(a);
            const cplx da = (cav_rate_lin + rot * (p.gain - p.gamma_s * n)) * a - ig * b;
            const cplx db = spin_rate * b - ig * a;
            alpha_ = a + da * dt;
            beta_ = b + db * dt;
            if (sigma > 0.0) alpha_ += cplx(normal_(rng_), normal_(rng_)) * sigma;
        }
        t_ += static_cast<double>(m) * dt;
        theta_ = std::remainder(theta_ + frame_ * static_cast<double>(m) * dt, 2.0 * std::numbers::pi);

        const double amp = std::abs(alpha_);
        if (!std::isfinite(amp) || amp > limit_) {
            throw Diverged("|alpha| = " + std::to_string(amp) + " at t = " + std::to_string(t_) + " s");
        }
        // rotation left over in the co-rotating frame; alpha_rot ~ e^{-i (Delta - frame) t}
        const double block_time = static_cast<double>(m) * dt;
        double residual = 0.0;
        if (std::abs(a_start) > 0.0 && amp > 0.0) residual = -std::arg(alpha_ * std::conj(a_start)) / block_time;
        BlockRecord rec{t_, alpha_ * std::polar(1.0, -theta_), frame_ + residual};
        frame_ += residual;
        return rec;
    }

private:
    SimConfig cfg_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    cplx alpha_, beta_;
    double frame_ = 0.0;  // rad/s relative to the cavity
    double theta_ = 0.0;  // accumulated frame phase, wrapped
    double t_ = 0.0;
    double limit_;
};

/// Runs blocks until `duration`; `params_at(t)` is evaluated once per block
/// at the block start, `on_block` sees every record.
inline FieldState integrate_path(const std::function<SystemParams(double)>& params_at, FieldState init,
                                 double frame_delta, const SimConfig& cfg,
                                 const std::function<void(const BlockRecord&)>& on_block) {
    const SystemParams p0 = params_at(0.0);
    cfg.validate(p0);
    Integrator integ(cfg, init, frame_delta, reference_photon_number(p0));
    const double block = cfg.dt * static_cast<double>(cfg.decimation);
    const auto blocks = static_cast<std::size_t>(std::llround(cfg.duration / block));
    for (std::size_t k = 0; k < blocks; ++k) on_block(integ.step_block(params_at(integ.time())));
    return integ.lab_state();
}

/// Starting frame frequency for an arbitrary initial state: the branch
/// closest to the detuning implied by the spin-cavity phase relation of a
/// steady state, or the cavity when there is no oscillating branch.
inline double initial_frame(const SystemParams& p, const FieldState& init) {
    double implied = 0.0;
    if (std::abs(init.beta) > 0.0 && p.g > 0.0) implied = p.delta_s - std::imag(cplx(0.0, -p.g) * init.alpha / init.beta);
    double best = std::numeric_limits<double>::infinity(), frame = 0.0;
    for (const auto& b : steady_state_solutions(p).branches) {
        if (b.below_threshold) continue;
        const double d = std::abs(b.delta - implied);
        if (d < best) {
            best = d;
            frame = b.delta;
        }
    }
    return frame;
}

/// Field alpha(t) in the cavity frame, sampled at cfg.output_rate().
inline ComplexSeries integrate(const SystemParams& p, FieldState init, const SimConfig& cfg,
                               std::optional<double> frame_delta = std::nullopt) {
    p.validate();
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(cfg.duration / (cfg.dt * cfg.decimation)) + 1);
    integrate_path([&p](double) { return p; }, init, frame_delta.value_or(initial_frame(p, init)), cfg,
                   [&out](const BlockRecord& r) { out.push_back(r.alpha); });
    ComplexSeries ts(std::move(out), cfg.output_rate(), cfg.dt * static_cast<double>(cfg.decimation), SeriesKind::field);
    return ts;
}

/// Oscillation detuning Delta (rad/s) of a cavity-frame field record.
inline double oscillation_detuning(const ComplexSeries& ts) { return -2.0 * std::numbers::pi * dominant_frequency(ts); }

// ---------------------------------------------------------------------------
// Hysteresis sweep
// ---------------------------------------------------------------------------

struct HysteresisSweep {
    std::vector<double> delta_s_up, delta_up;      // rad/s
    std::vector<double> delta_s_down, delta_down;  // rad/s
    std::optional<double> jump_up;    // delta_s of the first point on the new branch
    std::optional<double> jump_down;
    double grid_step = 0.0;

    /// Distance between the two jump points, 0 without hysteresis.
    double separation() const {
        if (!jump_up || !jump_down) return 0.0;
        return std::max(0.0, *jump_up - *jump_down);
    }
};

namespace detail {

/// Position of the largest frequency step if it exceeds `threshold`.
inline std::optional<std::size_t> largest_jump(const std::vector<double>& freq, double threshold) {
    std::optional<std::size_t> at;
    double best = threshold;
    for (std::size_t k = 1; k < freq.size(); ++k) {
        const double d = std::abs(freq[k] - freq[k - 1]);
        if (d > best) {
            best = d;
            at = k;
        }
    }
    return at;
}

}  // namespace detail

/// Steps delta_s through `grid` (ascending) and back, holding each value for
/// `dwell` seconds and reading the oscillation frequency from the dominant
/// spectral line in the second half of each hold. A jump is a step change
/// larger than a quarter of the spin linewidth.
inline HysteresisSweep sweep_hysteresis(const SystemParams& p, const std::vector<double>& grid, double dwell,
                                        const SimConfig& cfg) {
    if (grid.size() < 2) throw ConfigError("sweep grid needs at least 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("sweep grid must be ascending");
    const double block = cfg.dt * static_cast<double>(cfg.decimation);
    const auto blocks_per_hold = static_cast<std::size_t>(std::llround(dwell / block));
    if (blocks_per_hold < 16) throw ConfigError("dwell too short for frequency extraction");

    std::vector<double> path = grid;
    for (std::size_t i = grid.size() - 1; i-- > 0;) path.push_back(grid[i]);

    const SystemParams start = p.with_delta_s(grid.front());
    const auto stable = steady_state_solutions(start).stable_branches();
    if (stable.empty()) throw StartBranchMissing("no stable branch at the start of the sweep");
    const auto& first = stable.back();

    SimConfig run = cfg;
    run.duration = dwell * static_cast<double>(path.size());
    run.validate(start);
    Integrator integ(run, branch_state(first, start), first.delta, reference_photon_number(start));

    HysteresisSweep out;
    out.grid_step = grid[1] - grid[0];
    std::vector<cplx> hold;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const SystemParams q = p.with_delta_s(path[k]);
        hold.clear();
        for (std::size_t b = 0; b < blocks_per_hold; ++b) {
            const auto rec = integ.step_block(q);
            if (2 * b >= blocks_per_hold) hold.push_back(rec.alpha);
        }
        const ComplexSeries tail(hold, run.output_rate(), 0.0, SeriesKind::field);
        const double delta = oscillation_detuning(tail);
        if (k < grid.size()) {
            out.delta_s_up.push_back(path[k]);
            out.delta_up.push_back(delta);
        } else {
            out.delta_s_down.push_back(path[k]);
            out.delta_down.push_back(delta);
        }
    }
    // the down trace starts at the top of the grid
    out.delta_s_down.insert(out.delta_s_down.begin(), out.delta_s_up.back());
    out.delta_down.insert(out.delta_down.begin(), out.delta_up.back());

    const double threshold = 0.25 * p.gamma_spin;
    if (const auto k = detail::largest_jump(out.delta_up, threshold)) out.jump_up = out.delta_s_up[*k];
    if (const auto k = detail::largest_jump(out.delta_down, threshold)) out.jump_down = out.delta_s_down[*k];
    return out;
}

// ---------------------------------------------------------------------------
// Parameter trajectories and encirclement
// ---------------------------------------------------------------------------

struct Waypoint {
    double delta_g = 0.0;  // rad/s
    double delta_s = 0.0;  // rad/s
    double dwell = 0.0;    // s, length of the interval that starts here
};

enum class Interpolation { linear, hold };
enum class Direction { clockwise, counterclockwise, none };

inline const char* to_string(Direction d) {
    switch (d) {
        case Direction::clockwise: return "clockwise";
        case Direction::counterclockwise: return "counterclockwise";
        case Direction::none: return "none";
    }
    return "?";
}

/// Ordered waypoints in (delta_g, delta_s). With linear interpolation the
/// interval starting at waypoint k moves to waypoint k+1; the last
/// waypoint's dwell is a final hold.
struct ParameterTrajectory {
    std::vector<Waypoint> waypoints;
    Interpolation interpolation = Interpolation::linear;

    double duration() const {
        double t = 0.0;
        for (const auto& w : waypoints) t += w.dwell;
        return t;
    }

    bool closed() const {
        return waypoints.size() >= 2 && waypoints.front().delta_g == waypoints.back().delta_g &&
               waypoints.front().delta_s == waypoints.back().delta_s;
    }

    void validate() const {
        if (waypoints.size() < 2) throw ConfigError("trajectory needs at least 2 waypoints");
        for (const auto& w : waypoints)
            if (!(w.dwell >= 0.0) || !std::isfinite(w.delta_g) || !std::isfinite(w.delta_s))
                throw ConfigError("bad waypoint");
        if (!(duration() > 0.0)) throw ConfigError("trajectory duration must be > 0");
    }

    /// Orientation with delta_s on the horizontal and delta_g on the vertical
    /// axis (signed shoelace area).
    Direction direction() const {
        double area = 0.0;
        for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
            area += waypoints[i].delta_s * waypoints[i + 1].delta_g - waypoints[i + 1].delta_s * waypoints[i].delta_g;
        }
        if (area < 0.0) return Direction::clockwise;
        if (area > 0.0) return Direction::counterclockwise;
        return Direction::none;
    }

    /// (delta_g, delta_s) at time t.
    std::pair<double, double> at(double t) const {
        double start = 0.0;
        for (std::size_t k = 0; k < waypoints.size(); ++k) {
            const auto& w = waypoints[k];
            if (t < start + w.dwell || k + 1 == waypoints.size()) {
                if (interpolation == Interpolation::hold || k + 1 == waypoints.size() || w.dwell <= 0.0) {
                    return {w.delta_g, w.delta_s};
                }
                const double f = std::clamp((t - start) / w.dwell, 0.0, 1.0);
                const auto& n = waypoints[k + 1];
                return {w.delta_g + f * (n.delta_g - w.delta_g), w.delta_s + f * (n.delta_s - w.delta_s)};
            }
            start += w.dwell;
        }
        return {waypoints.back().delta_g, waypoints.back().delta_s};
    }

    /// Same points visited in the opposite order, same segment durations.
    ParameterTrajectory reversed() const {
        ParameterTrajectory r;
        r.interpolation = interpolation;
        const std::size_t n = waypoints.size();
        for (std::size_t i = 0; i < n; ++i) {
            Waypoint w = waypoints[n - 1 - i];
            // the interval leaving reversed point i is the one that arrived at it
            w.dwell = (i + 1 < n) ? waypoints[n - 2 - i].dwell : waypoints.back().dwell;
            r.waypoints.push_back(w);
        }
        return r;
    }
};

/// The loop A-B-C-D-E-A around the transition point: A on the resonance line
/// inside the bistable phase, B..E the corners of a rectangle spanning
/// delta_g in [-dg, +dg] and delta_s in [-ds, +ds]. Clockwise with delta_s
/// horizontal; reversed() gives A-E-D-C-B-A.
inline ParameterTrajectory encircle_loop(double dg, double ds, double segment_dwell) {
    ParameterTrajectory t;
    t.waypoints = {{-dg, 0.0, 0.5 * segment_dwell}, {-dg, -ds, segment_dwell}, {dg, -ds, segment_dwell},
                   {dg, ds, segment_dwell},         {-dg, ds, 0.5 * segment_dwell}, {-dg, 0.0, 0.0}};
    return t;
}

struct EncircleResult {
    ComplexSeries trace;           // cavity-frame field
    std::vector<double> step_time;   // s, end of each detection step
    std::vector<double> step_delta;  // rad/s, measured detuning per step
    std::vector<double> jump_times;  // s
    BranchLabel final_branch = BranchLabel::single;
    double final_delta = 0.0;
    Direction direction = Direction::none;

    std::size_t jumps() const { return jump_times.size(); }
};

namespace detail {

inline std::vector<double> stable_deltas(const SystemParams& p) {
    std::vector<double> d;
    for (const auto& b : steady_state_solutions(p).stable_branches()) d.push_back(b.delta);
    return d;
}

inline double nearest_distance(double x, const std::vector<double>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : set) best = std::min(best, std::abs(x - v));
    return best;
}

}  // namespace detail

/// Drives the system along `traj` starting on `start_branch` at the first
/// waypoint. Frequencies are compared over `steps` equal detection steps;
/// a jump is a step change exceeding 3x the local branch displacement per
/// step (plus a floor of 2% of g), merged over consecutive steps.
inline EncircleResult encircle(const SystemParams& p0, const ParameterTrajectory& traj, BranchLabel start_branch,
                               const SimConfig& cfg, std::size_t steps = 500) {
    traj.validate();
    auto params_at = [&](double t) {
        const auto [dg, ds] = traj.at(t);
        return p0.with_delta_g(dg).with_delta_s(ds);
    };
    const SystemParams start = params_at(0.0);
    const auto stable = steady_state_solutions(start).stable_branches();
    const SteadyStateBranch* chosen = nullptr;
    if (stable.size() == 2) {
        if (start_branch == BranchLabel::upper) chosen = &stable[1];
        if (start_branch == BranchLabel::lower) chosen = &stable[0];
    } else if (stable.size() == 1 && start_branch == BranchLabel::single) {
        chosen = &stable[0];
    }
    if (!chosen) {
        throw StartBranchMissing(std::string("branch '") + to_string(start_branch) + "' does not exist at the start point (" +
                                 std::to_string(stable.size()) + " stable)");
    }

    SimConfig run = cfg;
    run.duration = traj.duration();
    const double block = run.dt * static_cast<double>(run.decimation);
    const auto total_blocks = static_cast<std::size_t>(std::llround(run.duration / block));
    const std::size_t blocks_per_step = std::max<std::size_t>(1, total_blocks / steps);
    run.validate(start);

    double ref = reference_photon_number(start);
    for (const auto& w : traj.waypoints)
        ref = std::max(ref, reference_photon_number(p0.with_delta_g(w.delta_g).with_delta_s(w.delta_s)));
    Integrator integ(run, branch_state(*chosen, start), chosen->delta, ref);

    EncircleResult out;
    out.direction = traj.direction();
    std::vector<cplx> field;
    field.reserve(total_blocks);
    double acc = 0.0;
    std::size_t in_step = 0;
    for (std::size_t k = 0; k < total_blocks; ++k) {
        const auto rec = integ.step_block(params_at(integ.time()));
        field.push_back(rec.alpha);
        acc += rec.delta;
        if (++in_step == blocks_per_step) {
            out.step_time.push_back(rec.t_end);
            out.step_delta.push_back(acc / static_cast<double>(in_step));
            acc = 0.0;
            in_step = 0;
        }
    }
    out.trace = ComplexSeries(std::move(field), run.output_rate(), block, SeriesKind::field);

    // jump detection
    const double floor = 0.02 * p0.g;
    bool in_jump = false;
    std::vector<double> prev_branches = detail::stable_deltas(params_at(0.0));
    for (std::size_t k = 1; k < out.step_delta.size(); ++k) {
        const auto branches = detail::stable_deltas(params_at(out.step_time[k]));
        double spacing = 0.0;
        if (!prev_branches.empty() && !branches.empty()) {
            spacing = std::numeric_limits<double>::infinity();
            for (double b : prev_branches) spacing = std::min(spacing, detail::nearest_distance(b, branches));
        }
        const bool jump = std::abs(out.step_delta[k] - out.step_delta[k - 1]) > 3.0 * spacing + floor;
        if (jump && !in_jump) out.jump_times.push_back(out.step_time[k]);
        in_jump = jump;
        prev_branches = branches;
    }

    // final branch: nearest stable steady state at the end point
    out.final_delta = out.step_delta.empty() ? chosen->delta : out.step_delta.back();
    const SystemParams end = params_at(traj.duration());
    const auto end_stable = steady_state_solutions(end).stable_branches();
    if (end_stable.size() == 1) {
        out.final_branch = BranchLabel::single;
    } else if (!end_stable.empty()) {
        const bool upper = std::abs(out.final_delta - end_stable.back().delta) <
                           std::abs(out.final_delta - end_stable.front().delta);
        out.final_branch = upper ? BranchLabel::upper : BranchLabel::lower;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transition edge
// ---------------------------------------------------------------------------

struct TransitionEdge {
    double delay = 0.0;        // s, from the step to arrival
    double fold_delta_s = 0.0; // rad/s
    double origin = 0.0;       // rad/s, detuning before the step
    double destination = 0.0;  // rad/s, surviving branch after the step
};

/// Starts on the upper branch just inside its fold (the upper edge of the
/// bistable interval), steps delta_s by `delta_p` past the fold, and returns
/// the time until the measured detuning is within 10% of the
/// origin-destination distance from the surviving branch. The run is cut at
/// `cfg.duration`.
inline TransitionEdge transition_edge(const SystemParams& p, double delta_p, const SimConfig& cfg,
                                      double arrival_fraction = 0.1) {
    const auto edges = hysteresis_edges(p);
    if (!edges) throw NoTransition("no bistable interval at these parameters");
    const double fold = edges->second;
    const double inside = fold - 1e-6 * (edges->second - edges->first);
    const SystemParams before = p.with_delta_s(inside);
    const auto roots = oscillation_roots(before);
    if (roots.size() != 3) throw NoTransition("start point is not bistable");
    SteadyStateBranch upper;
    upper.delta = roots.back().value;
    upper.photon_number = photon_number_at(before, upper.delta);

    const SystemParams after = p.with_delta_s(fold + delta_p);
    const auto after_roots = oscillation_roots(after);
    if (!(delta_p > 0.0) || after_roots.size() != 1) {
        throw NoTransition("the original branch survives the step");
    }
    TransitionEdge out;
    out.fold_delta_s = fold;
    out.origin = upper.delta;
    out.destination = after_roots.front().value;
    const double tolerance = arrival_fraction * std::abs(out.origin - out.destination);

    cfg.validate(after);
    Integrator integ(cfg, branch_state(upper, before), upper.delta,
                     std::max(reference_photon_number(before), reference_photon_number(after)));
    const double block = cfg.dt * static_cast<double>(cfg.decimation);
    const auto blocks = static_cast<std::size_t>(std::llround(cfg.duration / block));
    for (std::size_t k = 0; k < blocks; ++k) {
        const auto rec = integ.step_block(after);
        if (std::abs(rec.delta - out.destination) < tolerance) {
            // interpolate inside the block is unnecessary: the block is the time resolution
            out.delay = rec.t_end - 0.5 * block;
            return out;
        }
    }
    throw NoTransition("no arrival within " + std::to_string(cfg.duration) + " s");
}

}  // namespace bpsim
