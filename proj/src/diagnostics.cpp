#include "gbi/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "gbi/error.hpp"
#include "gbi/samplers.hpp"

namespace gbi {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t fft_length(std::size_t n) {
    std::size_t len = 1;
    while (len < 2 * n) len <<= 1;
    return len;
}

// Biased autocovariances gamma_0 .. gamma_{n-1} of a centred series.
std::vector<double> autocovariance(const std::vector<double>& centred) {
    const std::size_t n = centred.size();
    const std::size_t len = fft_length(n);
    const std::size_t bins = len / 2 + 1;
    double* in = fftw_alloc_real(len);
    fftw_complex* spec = fftw_alloc_complex(bins);
    fftw_plan forward;
    fftw_plan backward;
    {
        std::lock_guard lock(fftw_planner_mutex());
        forward = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, spec, FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec, in, FFTW_ESTIMATE);
    }
    std::copy(centred.begin(), centred.end(), in);
    std::fill(in + n, in + len, 0.0);
    fftw_execute(forward);
    for (std::size_t k = 0; k < bins; ++k) {
        spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
        spec[k][1] = 0.0;
    }
    fftw_execute(backward);
    std::vector<double> acov(n);
    const double scale = 1.0 / (static_cast<double>(len) * static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t) acov[t] = in[t] * scale;
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
    }
    fftw_free(in);
    fftw_free(spec);
    return acov;
}

}  // namespace

PosteriorParams analytic_posterior(std::span<const double> y, double prior_mean, double prior_var,
                                   double lik_var) {
    if (y.empty()) throw InsufficientData("analytic_posterior: empty observations");
    if (!(prior_var > 0.0) || !(lik_var > 0.0))
        throw InvalidParameter("analytic_posterior: variances must be positive");
    const double n = static_cast<double>(y.size());
    const double precision = 1.0 / prior_var + n / lik_var;
    const double ybar = mean(y);
    return {(prior_mean / prior_var + n * ybar / lik_var) / precision, 1.0 / precision};
}

double effective_sample_size(std::span<const double> chain) {
    const std::size_t n = chain.size();
    if (n < 10) throw InsufficientData("effective_sample_size: need at least 10 samples");
    const auto [lo, hi] = std::minmax_element(chain.begin(), chain.end());
    if (*lo == *hi) throw DegenerateChain("effective_sample_size: chain is constant");
    const double m = mean(chain);
    std::vector<double> centred(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = chain[i] - m;
    const std::vector<double> acov = autocovariance(centred);
    if (!(acov[0] > 0.0)) throw DegenerateChain("effective_sample_size: zero variance");

    // Initial positive sequence: Gamma_k = rho_{2k} + rho_{2k+1} summed while
    // positive; tau = -1 + 2 sum Gamma_k.
    double pair_sum = 0.0;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double gamma_k = (acov[2 * k] + acov[2 * k + 1]) / acov[0];
        if (!(gamma_k > 0.0)) break;
        pair_sum += gamma_k;
    }
    const double tau = -1.0 + 2.0 * pair_sum;
    const double nn = static_cast<double>(n);
    if (!(tau > 0.0)) return nn;
    return std::min(nn, nn / tau);
}

double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-theta form, converges fast for small lambda.
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double odd = 2.0 * k - 1.0;
            s += std::exp(-odd * odd * c);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InsufficientData("ks_two_sample: empty sample");
    std::vector<double> xs(a.begin(), a.end());
    std::vector<double> ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double n = static_cast<double>(xs.size());
    const double m = static_cast<double>(ys.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < xs.size() && j < ys.size()) {
        const double v = std::min(xs[i], ys[j]);
        while (i < xs.size() && xs[i] == v) ++i;
        while (j < ys.size() && ys[j] == v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    const double ne = n * m / (n + m);
    return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

PosteriorSummary posterior_summary(const Trace& trace) {
    if (trace.thetas.size() < 10) throw DegenerateChain("posterior_summary: trace too short");
    const SummaryStats s = summary_stats(trace.thetas);
    return {s.mean, s.variance, effective_sample_size(trace.thetas)};
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& rng) {
    if (k > n) throw InsufficientData("sample_without_replacement: k exceeds n");
    std::vector<std::size_t> out;
    out.reserve(k);
    std::size_t needed = k;
    for (std::size_t t = 0; t < n && needed > 0; ++t) {
        if (static_cast<double>(n - t) * rng.uniform() < static_cast<double>(needed)) {
            out.push_back(t);
            --needed;
        }
    }
    return out;
}

KsCheck ks_verification_protocol(std::span<const double> chain_a, std::span<const double> chain_b,
                                 RngStream& rng, const KsProtocolOptions& options) {
    const std::size_t k = options.subsample;
    if (k == 0) throw InvalidParameter("ks_verification_protocol: subsample length must be positive");
    if (chain_a.size() < k || chain_b.size() < k)
        throw InsufficientData("ks_verification_protocol: chains shorter than the subsample length");
    auto pick = [&](std::span<const double> chain) {
        std::vector<double> sub;
        sub.reserve(k);
        if (options.mode == SubsampleMode::Strided) {
            const std::size_t stride = chain.size() / k;
            const std::size_t offset = static_cast<std::size_t>(rng.uniform() * static_cast<double>(stride));
            for (std::size_t t = 0; t < k; ++t) sub.push_back(chain[offset + t * stride]);
        } else {
            for (std::size_t idx : sample_without_replacement(chain.size(), k, rng)) sub.push_back(chain[idx]);
        }
        return sub;
    };
    const auto sa = pick(chain_a);
    const auto sb = pick(chain_b);
    const KsResult r = ks_two_sample(sa, sb);
    return {r.statistic, r.pvalue, r.pvalue >= options.level};
}

}  // namespace gbi
