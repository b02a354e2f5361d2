#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "crowdguard/errors.hpp"

namespace crowdguard {
namespace detail {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);

    auto cont_frac = [](double a_, double b_, double x_) {
        constexpr double kTiny = 1e-300;
        constexpr int kMaxIter = 300;
        double c = 1.0, d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
        if (std::abs(d) < kTiny) d = kTiny;
        d = 1.0 / d;
        double f = d;
        for (int m = 1; m <= kMaxIter; ++m) {
            double num = m * (b_ - m) * x_ / ((a_ + 2.0 * m - 1.0) * (a_ + 2.0 * m));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            f *= c * d;
            num = -(a_ + m) * (a_ + b_ + m) * x_ / ((a_ + 2.0 * m) * (a_ + 2.0 * m + 1.0));
            d = 1.0 + num * d;
            if (std::abs(d) < kTiny) d = kTiny;
            c = 1.0 + num / c;
            if (std::abs(c) < kTiny) c = kTiny;
            d = 1.0 / d;
            const double delta = c * d;
            f *= delta;
            if (std::abs(delta - 1.0) < 1e-14) break;
        }
        return f;
    };

    // Use the symmetry relation for convergence.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * cont_frac(a, b, x) / a;
    return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - ln_beta) * cont_frac(b, a, 1.0 - x) / b;
}

}  // namespace detail

// CDF of Student's t with `df` degrees of freedom.
inline double student_t_cdf(double t, int df) {
    if (df < 1) throw ConfigError("student_t: df must be >= 1");
    const double x = df / (df + t * t);
    const double p = 0.5 * detail::incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0 ? 1.0 - p : p;
}

// Quantile (inverse CDF) by bisection on the CDF.
inline double student_t_quantile(double p, int df) {
    if (df < 1) throw ConfigError("student_t: df must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("student_t: quantile probability must be in (0,1)");
    if (p == 0.5) return 0.0;
    double lo = -1e6, hi = 1e6;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Mean and two-sided Student-t confidence half-width over R values:
// half_width = t_{(1+level)/2, R-1} * s / sqrt(R), s with R-1 denominator.
inline std::pair<double, double> mean_ci(const std::vector<double>& values, double level = 0.95) {
    const auto r = values.size();
    if (r < 2) throw ConfigError("mean_ci: need at least 2 values");
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(r);
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / static_cast<double>(r - 1));
    const double tcrit = student_t_quantile((1.0 + level) / 2.0, static_cast<int>(r) - 1);
    return {mean, tcrit * stddev / std::sqrt(static_cast<double>(r))};
}

}  // namespace crowdguard
