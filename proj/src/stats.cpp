#include "gbi/stats.hpp"

#include <cmath>

#include "gbi/error.hpp"

namespace gbi {

double normal_logpdf(double x, double mu, double var) {
    if (!(var > 0.0)) throw InvalidParameter("normal_logpdf: variance must be positive");
    const double d = x - mu;
    return -0.5 * (kLogTwoPi + std::log(var)) - d * d / (2.0 * var);
}

double mean(std::span<const double> data) {
    if (data.empty()) throw InsufficientData("mean: empty dataset");
    double s = 0.0;
    for (double v : data) s += v;
    return s / static_cast<double>(data.size());
}

double sample_variance(std::span<const double> data) {
    return summary_stats(data).variance;
}

SummaryStats summary_stats(std::span<const double> data) {
    if (data.size() < 2) throw InsufficientData("summary_stats: need at least two points");
    const double n = static_cast<double>(data.size());
    double s = 0.0;
    for (double v : data) s += v;
    const double m = s / n;
    double ss = 0.0;
    for (double v : data) {
        const double d = v - m;
        ss += d * d;
    }
    return {m, ss / (n - 1.0)};
}

}  // namespace gbi
