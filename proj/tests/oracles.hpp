#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's numerical code; everything is brute force or quadrature in
// long double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

inline long double normal_logpdf(long double x, long double mu, long double var) {
    return -0.5L * std::log(2.0L * std::numbers::pi_v<long double> * var) - (x - mu) * (x - mu) / (2.0L * var);
}

// V-statistic MMD^2 by the full O((n + m)^2) double sum.
inline double mmd2(std::span<const double> x, std::span<const double> y, double gamma) {
    auto k = [gamma](long double a, long double b) {
        return std::exp(-(a - b) * (a - b) / (2.0L * gamma * gamma));
    };
    long double xx = 0, yy = 0, xy = 0;
    for (double a : x)
        for (double b : x) xx += k(a, b);
    for (double a : y)
        for (double b : y) yy += k(a, b);
    for (double a : x)
        for (double b : y) xy += k(a, b);
    const long double n = static_cast<long double>(x.size()), m = static_cast<long double>(y.size());
    return static_cast<double>(xx / (n * n) + yy / (m * m) - 2.0L * xy / (n * m));
}

// Empirical quantile F^{-1}(u) = x_(ceil(u n)) on sorted data.
inline long double quantile(const std::vector<double>& sorted, long double u) {
    const auto n = static_cast<long double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil(u * n));
    idx = std::clamp<std::size_t>(idx, 1, sorted.size());
    return sorted[idx - 1];
}

// W1 = int_0^1 |F_x^{-1}(u) - F_y^{-1}(u)| du. Both quantile functions are
// step functions with jumps at multiples of 1/n and 1/m, so midpoint
// evaluation on the union of those breakpoints integrates exactly; `extra`
// refines each piece further to exercise the grid.
inline double w1_quantile_integral(std::span<const double> x, std::span<const double> y, int extra = 4) {
    std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    std::vector<long double> breaks{0.0L, 1.0L};
    for (std::size_t i = 1; i < xs.size(); ++i) breaks.push_back(static_cast<long double>(i) / xs.size());
    for (std::size_t j = 1; j < ys.size(); ++j) breaks.push_back(static_cast<long double>(j) / ys.size());
    std::sort(breaks.begin(), breaks.end());
    long double total = 0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const long double a = breaks[k], b = breaks[k + 1];
        if (b <= a) continue;
        const long double h = (b - a) / extra;
        for (int s = 0; s < extra; ++s) {
            const long double u = a + (s + 0.5L) * h;
            total += std::fabs(quantile(xs, u) - quantile(ys, u)) * h;
        }
    }
    return static_cast<double>(total);
}

// Unnormalised log posterior of the conjugate model, normalised by Simpson
// quadrature over mean +- 10 sd of the conjugate answer's scale.
struct QuadratureMoments {
    double mean;
    double variance;
};

inline QuadratureMoments posterior_by_quadrature(std::span<const double> y, double prior_mean, double prior_var,
                                                 double lik_var, double centre, double scale,
                                                 int intervals = 20000) {
    auto logpost = [&](long double t) {
        long double s = normal_logpdf(t, prior_mean, prior_var);
        for (double v : y) s += normal_logpdf(v, t, lik_var);
        return s;
    };
    const long double lo = centre - 10.0L * scale, hi = centre + 10.0L * scale;
    const long double h = (hi - lo) / intervals;
    const long double ref = logpost(centre);
    long double z = 0, m1 = 0, m2 = 0;
    for (int i = 0; i <= intervals; ++i) {
        const long double t = lo + i * h;
        const long double w = (i == 0 || i == intervals) ? 1.0L : (i % 2 ? 4.0L : 2.0L);
        const long double p = std::exp(logpost(t) - ref) * w;
        z += p;
        m1 += p * t;
        m2 += p * t * t;
    }
    const long double mean = m1 / z;
    return {static_cast<double>(mean), static_cast<double>(m2 / z - mean * mean)};
}

// sup |F_a - F_b| by evaluating both ECDFs at every sample point.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    auto ecdf = [](std::span<const double> s, double t) {
        std::size_t c = 0;
        for (double v : s) c += v <= t ? 1 : 0;
        return static_cast<double>(c) / static_cast<double>(s.size());
    };
    double d = 0;
    for (double t : a) d = std::max(d, std::fabs(ecdf(a, t) - ecdf(b, t)));
    for (double t : b) d = std::max(d, std::fabs(ecdf(a, t) - ecdf(b, t)));
    return d;
}

// Median of |a_i - a_j| over i < j by listing every pair.
inline double pairwise_median(std::span<const double> a) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) d.push_back(std::fabs(a[i] - a[j]));
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

// Integrated autocorrelation time of AR(1) with coefficient rho.
inline double ar1_iact(double rho) { return (1.0 + rho) / (1.0 - rho); }

}  // namespace oracle
