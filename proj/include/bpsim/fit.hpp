#pragma once

// Least-squares fits used for scaling checks.

#include "bpsim/error.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bpsim {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ConfigError("fit inputs differ in length");
    const std::size_t n = x.size();
    if (n < 2) throw ConfigError("fit needs at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit abscissae are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r2 = 0.0;
    double exponent_stderr = 0.0;
};

/// y = prefactor * x^exponent by least squares on log-log axes.
inline PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ConfigError("fit inputs differ in length");
    if (x.size() < 4) throw ConfigError("power-law fit needs at least 4 points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw NonPositiveInput("power-law fit input " + std::to_string(i) + " is not positive");
        }
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const auto f = fit_line(lx, ly);
    return {f.slope, std::exp(f.intercept), f.r2, f.slope_stderr};
}

struct StretchedExpFit {
    double beta = 0.0;       // stretching exponent
    double amplitude = 0.0;  // A
    double rate = 0.0;       // b
    double r2 = 0.0;         // on log y
};

/// y = A exp(b x^beta): beta from a scan over (0, 2], A and b from the
/// linear fit of log y on x^beta at each beta.
inline StretchedExpFit fit_stretched_exponential(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ConfigError("fit inputs differ in length");
    if (x.size() < 4) throw ConfigError("stretched-exponential fit needs at least 4 points");
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw NonPositiveInput("stretched-exponential input " + std::to_string(i) + " is not positive");
        }
        ly.push_back(std::log(y[i]));
    }
    auto at = [&](double beta) {
        std::vector<double> xb;
        for (double v : x) xb.push_back(std::pow(v, beta));
        return fit_line(xb, ly);
    };
    StretchedExpFit best;
    best.r2 = -std::numeric_limits<double>::infinity();
    auto consider = [&](double beta) {
        const auto f = at(beta);
        if (f.r2 > best.r2) best = {beta, std::exp(f.intercept), f.slope, f.r2};
    };
    for (int i = 1; i <= 400; ++i) consider(0.005 * i);
    // refine around the best grid point
    const double centre = best.beta;
    for (int i = -50; i <= 50; ++i) {
        const double b = centre + 1e-4 * i;
        if (b > 0.0) consider(b);
    }
    return best;
}

}  // namespace bpsim
