#pragma once

// Closed-form real roots of a cubic polynomial.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace bpsim {

struct CubicRoot {
    double value = 0.0;
    int multiplicity = 1;
};

/// Monic depressed form t^3 + p t + q with x = t - b/3.
struct DepressedCubic {
    double shift = 0.0;  // b/3
    double p = 0.0;
    double q = 0.0;

    /// (q/2)^2 + (p/3)^3. Negative means three distinct real roots.
    double discriminant() const {
        const double h = 0.5 * q;
        const double t = p / 3.0;
        return h * h + t * t * t;
    }
};

inline DepressedCubic depress(double a, double b, double c, double d) {
    b /= a;
    c /= a;
    d /= a;
    DepressedCubic out;
    out.shift = b / 3.0;
    out.p = c - b * b / 3.0;
    out.q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    return out;
}

/// Discriminant sign convention: < 0 three real roots, > 0 one real root.
inline double cubic_discriminant(double a, double b, double c, double d) {
    return depress(a, b, c, d).discriminant();
}

/// Real roots of a x^3 + b x^2 + c x + d, ascending. Coincident roots are
/// reported once with their multiplicity. `a` must be nonzero.
inline std::vector<CubicRoot> solve_cubic(double a, double b, double c, double d) {
    const DepressedCubic dc = depress(a, b, c, d);
    const double bn = b / a, cn = c / a, dn = d / a;
    const double p = dc.p, q = dc.q;
    const double half_q = 0.5 * q;
    const double third_p = p / 3.0;
    const double A = half_q * half_q;
    const double B = third_p * third_p * third_p;
    const double D = A + B;

    constexpr double rel_tol = 1e-12;
    const double p_scale = std::max({std::abs(cn), bn * bn, 1e-300});
    const double q_scale = std::max({std::abs(dn), std::abs(bn * cn), std::abs(bn * bn * bn), 1e-300});

    std::vector<CubicRoot> roots;
    auto polish = [&](double x) {
        // two Newton steps on the monic polynomial; fixed count
        for (int i = 0; i < 2; ++i) {
            const double f = ((x + bn) * x + cn) * x + dn;
            const double df = (3.0 * x + 2.0 * bn) * x + cn;
            if (df == 0.0) break;
            const double step = f / df;
            if (!std::isfinite(step)) break;
            x -= step;
        }
        return x;
    };

    if (std::abs(p) <= rel_tol * p_scale && std::abs(q) <= rel_tol * q_scale) {
        roots.push_back({-dc.shift, 3});
        return roots;
    }
    if (std::abs(D) <= rel_tol * std::max(std::abs(A), std::abs(B))) {
        // double root at -3q/(2p), simple root at 3q/p
        const double t_simple = 3.0 * q / p;
        const double t_double = -1.5 * q / p;
        roots.push_back({polish(t_simple - dc.shift), 1});
        roots.push_back({t_double - dc.shift, 2});
    } else if (D > 0.0) {
        const double s = std::sqrt(D);
        const double u = std::cbrt(-half_q - std::copysign(s, half_q));
        const double t = (u != 0.0) ? u - p / (3.0 * u) : 0.0;
        roots.push_back({polish(t - dc.shift), 1});
    } else {
        const double r = 2.0 * std::sqrt(-third_p);
        double arg = (3.0 * q / (2.0 * p)) * std::sqrt(-3.0 / p);
        arg = std::clamp(arg, -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            const double t = r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
            roots.push_back({polish(t - dc.shift), 1});
        }
    }
    std::sort(roots.begin(), roots.end(), [](const CubicRoot& l, const CubicRoot& r) { return l.value < r.value; });
    return roots;
}

}  // namespace bpsim
