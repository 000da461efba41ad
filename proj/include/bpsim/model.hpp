#pragma once

// Steady-state layer: polariton eigenvalues, the oscillation-frequency cubic,
// photon number and stability of each branch, the bistable region and its
// transition point, spin saturation, and the passive reflection spectrum.
//
// The underlying semiclassical coupled-mode pair, in a frame rotating at w_f:
//
//   da/dt = [-i(w_c - w_f) + e^{i phi_L}(G - gamma_s |a|^2) - kappa/2] a - i g b
//   db/dt = [-i(w_s - w_f) - Gamma/2] b - i g a
//
// A self-oscillating solution a, b ~ e^{-i w t} with Delta = w - w_c must
// satisfy a real cubic in Delta (phase balance) and then fixes |a|^2
// (gain balance).

#include "bpsim/cubic.hpp"
#include "bpsim/error.hpp"
#include "bpsim/parallel.hpp"
#include "bpsim/params.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bpsim {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Linear polaritons
// ---------------------------------------------------------------------------

struct PolaritonSpectrum {
    std::array<cplx, 2> eigenvalues;  // real part: frequency, imaginary: -decay/2
};

/// Eigenvalues of [[w_c - i kappa/2, g], [g, w_s - i Gamma/2]], ordered by
/// descending real part, then descending imaginary part.
inline PolaritonSpectrum polariton_eigenvalues(const SystemParams& p) {
    const cplx a(p.omega_c, -0.5 * p.kappa);
    const cplx d(p.omega_s(), -0.5 * p.gamma_spin);
    const cplx mean = 0.5 * (a + d);
    const cplx half_diff = 0.5 * (a - d);
    const cplx root = std::sqrt(half_diff * half_diff + p.g * p.g);
    PolaritonSpectrum out{{mean + root, mean - root}};
    auto& e = out.eigenvalues;
    if (e[1].real() > e[0].real() || (e[1].real() == e[0].real() && e[1].imag() > e[0].imag())) {
        std::swap(e[0], e[1]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Oscillation condition
// ---------------------------------------------------------------------------

namespace detail {

inline double loop_tan(const SystemParams& p) {
    if (std::abs(p.loop_phase) >= 0.5 * std::numbers::pi) {
        throw ConfigError("loop_phase must lie in (-pi/2, pi/2)");
    }
    return std::tan(p.loop_phase);
}

/// Coefficients of (D + t k/2)((D - s)^2 + h^2) - g^2 ((D - s) - t h) in D,
/// highest power first.
inline std::array<double, 4> frequency_cubic(const SystemParams& p) {
    const double t = loop_tan(p);
    const double c0 = 0.5 * t * p.kappa;
    const double s = p.delta_s;
    const double h = p.half_spin_width();
    const double g2 = p.g * p.g;
    return {1.0,
            c0 - 2.0 * s,
            s * s + h * h - 2.0 * s * c0 - g2,
            c0 * (s * s + h * h) + g2 * s + g2 * t * h};
}

inline double scale_of(const SystemParams& p) { return std::max(p.gamma_spin, p.g); }

}  // namespace detail

/// Left-hand side of the phase-balance condition; zero on every oscillating
/// solution.
inline double frequency_residual(const SystemParams& p, double delta) {
    const auto c = detail::frequency_cubic(p);
    return ((c[0] * delta + c[1]) * delta + c[2]) * delta + c[3];
}

/// Depressed-cubic discriminant of the phase-balance cubic; negative where
/// three oscillation frequencies coexist.
inline double frequency_discriminant(const SystemParams& p) {
    const auto c = detail::frequency_cubic(p);
    return cubic_discriminant(c[0], c[1], c[2], c[3]);
}

/// Real roots of the phase-balance cubic, ascending (1 or 3 values; a
/// coincident pair or triple is reported once with its multiplicity).
inline std::vector<CubicRoot> oscillation_roots(const SystemParams& p) {
    const auto c = detail::frequency_cubic(p);
    return solve_cubic(c[0], c[1], c[2], c[3]);
}

/// Photon number from the gain-balance condition at oscillation frequency
/// `delta`. Negative values mean the loop is below threshold there.
inline double photon_number_at(const SystemParams& p, double delta) {
    const double h = p.half_spin_width();
    const double detuning = delta - p.delta_s;
    const double spin_absorption = p.g * p.g * h / (detuning * detuning + h * h);
    const double needed_gain = (0.5 * p.kappa + spin_absorption) / std::cos(p.loop_phase);
    return (p.gain - needed_gain) / p.gamma_s;
}

// ---------------------------------------------------------------------------
// Steady-state branches and stability
// ---------------------------------------------------------------------------

enum class BranchLabel { lower, middle, upper, single };

inline const char* to_string(BranchLabel l) {
    switch (l) {
        case BranchLabel::lower: return "lower";
        case BranchLabel::middle: return "middle";
        case BranchLabel::upper: return "upper";
        case BranchLabel::single: return "single";
    }
    return "?";
}

struct SteadyStateBranch {
    double delta = 0.0;          // rad/s, w - w_c
    double photon_number = 0.0;  // clamped at 0 below threshold
    bool stable = false;
    bool below_threshold = false;
    int multiplicity = 1;
    BranchLabel label = BranchLabel::single;
};

struct SteadyState {
    std::vector<SteadyStateBranch> branches;  // ascending delta
    bool below_threshold = false;             // no branch has positive photon number

    std::vector<SteadyStateBranch> stable_branches() const {
        std::vector<SteadyStateBranch> out;
        for (const auto& b : branches)
            if (b.stable) out.push_back(b);
        return out;
    }
};

/// Stationary field amplitudes (cavity a real and positive) of a branch in
/// the frame rotating at the branch frequency.
inline std::pair<cplx, cplx> branch_fields(const SteadyStateBranch& branch, const SystemParams& p) {
    const cplx a(std::sqrt(std::max(branch.photon_number, 0.0)), 0.0);
    const double spin_detuning = p.delta_s - branch.delta;  // w_s - w
    const cplx b = cplx(0.0, -p.g) * a / cplx(p.half_spin_width(), spin_detuning);
    return {a, b};
}

/// Jacobian of the coupled-mode flow in (Re a, Im a, Re b, Im b), linearised
/// about the branch in its co-rotating frame.
inline Eigen::Matrix4d branch_jacobian(const SteadyStateBranch& branch, const SystemParams& p) {
    const auto [a0, b0] = branch_fields(branch, p);
    const cplx rot = std::polar(1.0, p.loop_phase);
    const double n = std::norm(a0);
    // d(da) = A da + B conj(da) + C db ;  d(db) = E db + F da
    const cplx A = cplx(0.0, branch.delta) + rot * (p.gain - 2.0 * p.gamma_s * n) - 0.5 * p.kappa;
    const cplx B = -rot * p.gamma_s * a0 * a0;
    const cplx C(0.0, -p.g);
    const cplx E = cplx(-p.half_spin_width(), branch.delta - p.delta_s);
    const cplx F(0.0, -p.g);

    Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
    auto put_linear = [&J](int r, int c, cplx z) {
        J(r, c) += z.real();
        J(r, c + 1) += -z.imag();
        J(r + 1, c) += z.imag();
        J(r + 1, c + 1) += z.real();
    };
    auto put_conj = [&J](int r, int c, cplx z) {
        J(r, c) += z.real();
        J(r, c + 1) += z.imag();
        J(r + 1, c) += z.imag();
        J(r + 1, c + 1) += -z.real();
    };
    put_linear(0, 0, A);
    put_conj(0, 0, B);
    put_linear(0, 2, C);
    put_linear(2, 2, E);
    put_linear(2, 0, F);
    (void)b0;
    return J;
}

inline double stability_tolerance(const SystemParams& p) { return 1e-8 * std::max(p.kappa, p.gamma_spin); }

/// True iff every Jacobian eigenvalue other than the neutral global-phase
/// mode has negative real part. Throws DegenerateJacobian when a second
/// eigenvalue sits on the imaginary axis (a fold point).
inline bool classify_stability(const SteadyStateBranch& branch, const SystemParams& p) {
    if (branch.below_threshold || branch.photon_number <= 0.0) return false;
    const Eigen::Matrix4d J = branch_jacobian(branch, p);
    Eigen::EigenSolver<Eigen::Matrix4d> solver(J, false);
    const auto ev = solver.eigenvalues();
    const double tol = stability_tolerance(p);
    int neutral = 0;
    int neutral_index = 0;
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        const double re = std::abs(ev[i].real());
        if (re < tol) ++neutral;
        if (re < smallest) {
            smallest = re;
            neutral_index = i;
        }
    }
    if (neutral > 1) {
        throw DegenerateJacobian("extra zero eigenvalue at delta=" + std::to_string(branch.delta));
    }
    for (int i = 0; i < 4; ++i) {
        if (i == neutral_index) continue;
        if (ev[i].real() >= 0.0) return false;
    }
    return true;
}

/// All oscillation branches with photon number and stability. A branch whose
/// stability cannot be decided (exactly at a fold) is reported unstable.
inline SteadyState steady_state_solutions(const SystemParams& p) {
    SteadyState out;
    const auto roots = oscillation_roots(p);
    bool any_positive = false;
    for (const auto& r : roots) {
        SteadyStateBranch b;
        b.delta = r.value;
        b.multiplicity = r.multiplicity;
        const double n = photon_number_at(p, r.value);
        b.below_threshold = !(n > 0.0);
        b.photon_number = b.below_threshold ? 0.0 : n;
        any_positive = any_positive || !b.below_threshold;
        if (!b.below_threshold) {
            try {
                b.stable = classify_stability(b, p);
            } catch (const DegenerateJacobian&) {
                b.stable = false;
            }
        }
        out.branches.push_back(b);
    }
    if (out.branches.size() == 1) {
        out.branches[0].label = BranchLabel::single;
    } else if (out.branches.size() == 2) {
        out.branches[0].label = BranchLabel::lower;
        out.branches[1].label = BranchLabel::upper;
    } else {
        out.branches[0].label = BranchLabel::lower;
        out.branches[1].label = BranchLabel::middle;
        out.branches[2].label = BranchLabel::upper;
    }
    out.below_threshold = !any_positive;
    return out;
}

/// Exact fold points of the phase-balance cubic for zero loop phase, as
/// (delta_s, Delta) pairs; empty unless g > Gamma/2. Closed form, used as an
/// independent check on the discriminant search.
inline std::vector<std::pair<double, double>> fold_points(const SystemParams& p) {
    const double h = p.half_spin_width();
    const double g2 = p.g * p.g, h2 = h * h;
    if (p.g <= h) return {};
    // u = (Delta - delta_s)^2 solves u^2 + (g^2 + 2h^2) u - (g^2 - h^2) h^2 = 0
    const double bq = g2 + 2.0 * h2;
    const double cq = (g2 - h2) * h2;
    const double u = 2.0 * cq / (bq + std::sqrt(bq * bq + 4.0 * cq));
    std::vector<std::pair<double, double>> out;
    for (double sign : {-1.0, 1.0}) {
        const double detuning = sign * std::sqrt(u);
        const double delta = g2 * detuning / (u + h2);
        out.emplace_back(delta - detuning, delta);
    }
    if (out[0].first > out[1].first) std::swap(out[0], out[1]);
    return out;
}

// ---------------------------------------------------------------------------
// Bistable region
// ---------------------------------------------------------------------------

namespace detail {

/// delta_s at the middle of the three-root interval: 0 by symmetry without
/// loop phase, otherwise the minimiser of the discriminant.
inline double bistable_centre(const SystemParams& p) {
    if (p.loop_phase == 0.0) return 0.0;
    const double span = 3.0 * (p.g + p.half_spin_width()) + 4.0 * std::abs(loop_tan(p)) * p.kappa;
    auto disc = [&](double s) { return frequency_discriminant(p.with_delta_s(s)); };
    constexpr int n = 801;
    double best_s = -span, best = std::numeric_limits<double>::infinity();
    const double step = 2.0 * span / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double s = -span + step * i;
        const double v = disc(s);
        if (v < best) {
            best = v;
            best_s = s;
        }
    }
    // golden-section refinement inside the neighbouring cells
    double lo = best_s - step, hi = best_s + step;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = disc(x1), f2 = disc(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = disc(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = disc(x2);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Edges (lower, upper) of the delta_s interval holding three oscillation
/// frequencies, or nullopt when there is none.
inline std::optional<std::pair<double, double>> hysteresis_edges(const SystemParams& p) {
    const double centre = detail::bistable_centre(p);
    auto three_roots = [&](double s) { return frequency_discriminant(p.with_delta_s(s)) < 0.0; };
    if (!three_roots(centre)) return std::nullopt;

    const double scale = detail::scale_of(p);
    auto edge = [&](double direction) {
        double inside = centre;
        double step = 1e-6 * scale;
        double outside = centre + direction * step;
        while (three_roots(outside)) {
            inside = outside;
            step *= 2.0;
            outside = centre + direction * step;
            if (step > 1e3 * scale) throw NotBracketed("three-root interval does not close");
        }
        // bisect to 1e-6 relative of the half-width (tightened by 1e3)
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (inside + outside);
            if (three_roots(mid)) inside = mid; else outside = mid;
            if (std::abs(outside - inside) <= 1e-9 * std::abs(inside - centre)) break;
        }
        return 0.5 * (inside + outside);
    };
    const double lo = edge(-1.0);
    const double hi = edge(1.0);
    return std::make_pair(lo, hi);
}

/// Width (rad/s) of the delta_s interval where three oscillation
/// frequencies coexist; 0 outside the bistable phase.
inline double hysteresis_width(const SystemParams& p) {
    const auto e = hysteresis_edges(p);
    return e ? e->second - e->first : 0.0;
}

struct BistableMap {
    std::vector<double> delta_g;  // rows
    std::vector<double> delta_s;  // columns
    std::vector<int> stable_count;        // row-major
    std::vector<double> mean_delta;       // (D1 + D2)/2 where bistable, NaN otherwise
    std::vector<double> single_delta;     // unique stable frequency where monostable, NaN otherwise

    int count(std::size_t i, std::size_t j) const { return stable_count[i * delta_s.size() + j]; }
    double mean(std::size_t i, std::size_t j) const { return mean_delta[i * delta_s.size() + j]; }
};

/// Stable-branch count over a (delta_g, delta_s) grid; delta_g is moved
/// through the coupling g. Grid points are independent and evaluated in
/// parallel; the result is index-ordered.
inline BistableMap bistable_map(const SystemParams& p, const std::vector<double>& delta_g_values,
                                const std::vector<double>& delta_s_values, unsigned threads = 1) {
    BistableMap m;
    m.delta_g = delta_g_values;
    m.delta_s = delta_s_values;
    const std::size_t rows = delta_g_values.size(), cols = delta_s_values.size();
    m.stable_count.assign(rows * cols, 0);
    m.mean_delta.assign(rows * cols, std::numeric_limits<double>::quiet_NaN());
    m.single_delta.assign(rows * cols, std::numeric_limits<double>::quiet_NaN());
    parallel_for(rows * cols, threads, [&](std::size_t k) {
        const std::size_t i = k / cols, j = k % cols;
        const SystemParams q = p.with_delta_g(delta_g_values[i]).with_delta_s(delta_s_values[j]);
        const auto stable = steady_state_solutions(q).stable_branches();
        m.stable_count[k] = static_cast<int>(stable.size());
        if (stable.size() == 2) m.mean_delta[k] = 0.5 * (stable[0].delta + stable[1].delta);
        if (stable.size() == 1) m.single_delta[k] = stable[0].delta;
    });
    return m;
}

// ---------------------------------------------------------------------------
// Spin saturation and the transition point
// ---------------------------------------------------------------------------

/// Copy of p0 at oscillating power `power`, with the coupling reduced by
/// two-level saturation: g = g0 / sqrt(1 + P/P_sat).
inline SystemParams saturated_coupling(const SystemParams& p0, double power) {
    if (power < 0.0) throw ConfigError("power must be >= 0");
    SystemParams p = p0;
    p.power = power;
    p.g = p0.g / std::sqrt(1.0 + power / p0.p_sat);
    return p;
}

enum class Tunable { coupling, power, delta_g };

/// Critical value of `tunable` between lo and hi where the bistable region
/// closes. Powers are bisected in log space. Throws NotBracketed when the
/// bistability flag is the same at both ends.
inline double locate_bp(const SystemParams& p, Tunable tunable, double lo, double hi) {
    auto at = [&](double v) {
        switch (tunable) {
            case Tunable::coupling: {
                SystemParams q = p;
                q.g = v;
                return q;
            }
            case Tunable::power: return saturated_coupling(p, v);
            case Tunable::delta_g: return p.with_delta_g(v);
        }
        return p;
    };
    auto bistable = [&](double v) { return hysteresis_width(at(v)) > 0.0; };
    const bool log_space = tunable == Tunable::power;
    if (log_space && !(lo > 0.0 && hi > 0.0)) throw ConfigError("power bracket must be positive");
    const bool b_lo = bistable(lo), b_hi = bistable(hi);
    if (b_lo == b_hi) {
        throw NotBracketed(std::string("bistability ") + (b_lo ? "present" : "absent") + " at both ends");
    }
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = log_space ? std::sqrt(a * b) : 0.5 * (a + b);
        if (bistable(mid) == b_lo) a = mid; else b = mid;
        const double size = std::max({std::abs(a), std::abs(b), detail::scale_of(p) * (log_space ? 0.0 : 1.0)});
        if (std::abs(b - a) <= 1e-12 * size) break;
    }
    return log_space ? std::sqrt(a * b) : 0.5 * (a + b);
}

/// P_sat that closes the bistable region exactly at power `p_star`, given
/// p0.g as the unsaturated coupling.
inline double calibrate_saturation(const SystemParams& p0, double p_star) {
    const double h = p0.half_spin_width();
    const double g_bp = locate_bp(p0, Tunable::coupling, 0.25 * h, 4.0 * h);
    const double ratio = p0.g / g_bp;
    if (!(ratio > 1.0)) throw NotBracketed("unsaturated coupling is already below the transition point");
    return p_star / (ratio * ratio - 1.0);
}

/// Copy of p with loop_phase chosen so the bistable region closes at
/// Gamma/2 - g = delta_g_offset, i.e. at delta_g() == 0.
inline SystemParams calibrate_loop_phase(const SystemParams& p) {
    const double h = p.half_spin_width();
    auto bp_offset = [&](double phase) {
        SystemParams q = p;
        q.loop_phase = phase;
        return h - locate_bp(q, Tunable::coupling, 0.25 * h, 4.0 * h);
    };
    SystemParams out = p;
    if (p.delta_g_offset == 0.0) {
        out.loop_phase = 0.0;
        return out;
    }
    if (p.delta_g_offset < 0.0) throw NotBracketed("a loop phase only moves the transition to positive offsets");
    double lo = 0.0, hi = 1.4;
    if (bp_offset(hi) < p.delta_g_offset) throw NotBracketed("offset too large for any loop phase");
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (bp_offset(mid) < p.delta_g_offset) lo = mid; else hi = mid;
    }
    out.loop_phase = 0.5 * (lo + hi);
    return out;
}

// ---------------------------------------------------------------------------
// Passive spectroscopy
// ---------------------------------------------------------------------------

/// |r|^2 at the probe port for each probe angular frequency (absolute, same
/// frame as omega_c). Loop gain plays no part.
inline std::vector<double> reflection_spectrum(const SystemParams& p, const std::vector<double>& probe) {
    std::vector<double> out;
    out.reserve(probe.size());
    const double h = p.half_spin_width();
    for (double w : probe) {
        cplx spin(0.0, 0.0);
        for (const auto& line : p.hyperfine) {
            const double ws = p.omega_s() + line.detuning;
            spin += line.weight * p.g * p.g / cplx(h, ws - w);
        }
        const cplx denom = cplx(0.5 * p.kappa, p.omega_c - w) + spin;
        const cplx r = 1.0 - p.kappa_c1 / denom;
        out.push_back(std::norm(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Responsivity
// ---------------------------------------------------------------------------

struct Responsivity {
    double value = 0.0;  // signed dDelta/d delta_s
    bool divergent = false;

    double magnitude() const { return divergent ? std::numeric_limits<double>::infinity() : std::abs(value); }
};

/// dDelta/d delta_s on the branch at `delta`, by implicit differentiation of
/// the phase-balance cubic.
inline Responsivity responsivity_at(const SystemParams& p, double delta) {
    const double t = detail::loop_tan(p);
    const double shifted = delta + 0.5 * t * p.kappa;
    const double detuning = delta - p.delta_s;
    const double h = p.half_spin_width();
    const double g2 = p.g * p.g;
    const double numer = g2 - 2.0 * shifted * detuning;
    const double denom = g2 - detuning * detuning - h * h - 2.0 * shifted * detuning;
    Responsivity r;
    const double scale = std::max(g2, h * h);
    if (std::abs(denom) <= 1e-14 * scale) {
        r.divergent = true;
        r.value = std::copysign(std::numeric_limits<double>::infinity(), numer);
        return r;
    }
    r.value = numer / denom;
    return r;
}

/// Responsivity on the unique stable branch; when two stable branches
/// coexist, `prefer` selects lower (false) or upper (true).
inline Responsivity responsivity(const SystemParams& p, bool prefer_upper = true) {
    const auto stable = steady_state_solutions(p).stable_branches();
    if (stable.empty()) {
        // exactly at the transition point the single root is degenerate
        const auto roots = oscillation_roots(p);
        return responsivity_at(p, roots.front().value);
    }
    const auto& b = (stable.size() > 1 && prefer_upper) ? stable.back() : stable.front();
    return responsivity_at(p, b.delta);
}

}  // namespace bpsim
