#pragma once

#include <span>
#include <vector>

namespace gbi {

// Ordered collection of real-valued scalar observations.
using Dataset = std::vector<double>;

// Sufficient statistics of a Gaussian sample: mean and sample variance
// (n - 1 divisor).
struct SummaryStats {
    double mean = 0.0;
    double variance = 0.0;
};

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// log N(x; mu, var). Throws InvalidParameter unless var > 0.
double normal_logpdf(double x, double mu, double var);

// Throws InsufficientData for fewer than two points.
SummaryStats summary_stats(std::span<const double> data);

// Plain arithmetic mean / sample variance helpers; both require n >= 1 / 2.
double mean(std::span<const double> data);
double sample_variance(std::span<const double> data);

}  // namespace gbi
