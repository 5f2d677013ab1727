#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gbi/rng.hpp"
#include "gbi/stats.hpp"

namespace gbi {

struct Trace;

// Closed-form posterior of the Gaussian location model with a Gaussian prior.
struct PosteriorParams {
    double mean = 0.0;
    double variance = 1.0;
};

// Conjugate update for y_i ~ N(theta, lik_var), theta ~ N(prior_mean, prior_var).
PosteriorParams analytic_posterior(std::span<const double> y, double prior_mean, double prior_var,
                                   double lik_var);

// N / tau with tau = 1 + 2 sum rho_k truncated by Geyer's initial positive
// sequence; autocorrelations come from an FFT. Result lies in (0, N].
// Throws InsufficientData below 10 samples and DegenerateChain for a
// constant chain.
double effective_sample_size(std::span<const double> chain);

struct KsResult {
    double statistic = 0.0;
    double pvalue = 1.0;
};

// Exact two-sample KS statistic (ties handled) with the asymptotic Kolmogorov
// p-value at effective size n m / (n + m).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct PosteriorSummary {
    double mean = 0.0;
    double variance = 0.0;
    double ess = 0.0;
};

// Mean, sample variance and ESS of the stored (post-burn-in) thetas.
PosteriorSummary posterior_summary(const Trace& trace);

enum class SubsampleMode { UniformRandom, Strided };

struct KsProtocolOptions {
    std::size_t subsample = 150;
    double level = 0.1;
    SubsampleMode mode = SubsampleMode::UniformRandom;
};

struct KsCheck {
    double statistic = 0.0;
    double pvalue = 1.0;
    bool passed = false;  // null hypothesis not rejected at `level`
};

// Random subsamples of each chain (without replacement) compared by a
// two-sample KS test. Throws InsufficientData if either chain is shorter than
// the subsample length.
KsCheck ks_verification_protocol(std::span<const double> chain_a, std::span<const double> chain_b,
                                 RngStream& rng, const KsProtocolOptions& options = {});

// k indices from [0, n) without replacement, ascending (selection sampling).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& rng);

}  // namespace gbi
