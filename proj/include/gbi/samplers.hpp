#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbi/error.hpp"
#include "gbi/losses.hpp"
#include "gbi/rng.hpp"
#include "gbi/simulator.hpp"

namespace gbi {

struct MCMCConfig {
    std::size_t iterations = 10000;
    double proposal_std = 1.0;          // sqrt(lambda) of the N(theta, lambda) random walk
    std::optional<double> init_theta;   // empty: draw from the prior
    std::optional<std::size_t> burn_in; // empty: 10% of iterations
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> budget;  // max simulator calls, initial state included

    std::size_t effective_burn_in() const { return burn_in ? *burn_in : iterations / 10; }
    // Throws InvalidParameter unless iterations > burn_in and proposal_std > 0.
    void validate() const;
};

enum class TraceStatus { Complete, BudgetExhausted };

// Post-burn-in output of one chain. `values` holds the loss (ABC) or the
// log-likelihood estimate (pseudo-marginal) carried by each stored state.
struct Trace {
    std::vector<double> thetas;
    std::vector<double> values;
    std::vector<std::uint8_t> accepted;
    std::size_t burn_in = 0;
    std::size_t iterations_run = 0;
    std::uint64_t simulator_calls = 0;
    std::uint64_t simulator_draws = 0;
    double acceptance_rate = 0.0;
    TraceStatus status = TraceStatus::Complete;
};

// iter,theta,loss,accepted with 17 significant digits; iter counts from the
// start of the chain.
void write_trace_csv(std::ostream& os, const Trace& trace);

// min{1, exp(-w (l' - l) + logp' - logp)}; +inf proposed loss gives 0,
// +inf current loss with a finite proposal gives 1. Throws NumericalError on
// NaN input.
double acceptance_probability(double w, double loss_current, double loss_proposed,
                              double logprior_current, double logprior_proposed);

// Generalized ABC-MCMC on exp(-w l(y; x)) p(theta) with l the M-particle
// average of the base loss. The incumbent's loss is carried forward on
// rejection, never refreshed.
Trace gbi_abc_mcmc(const MCMCConfig& config, const LossSpec& spec,
                   const GaussianLocationModel& model, std::span<const double> y, RngStream rng);

// Same chain for an arbitrary prepared base loss and simulator.
Trace gbi_abc_mcmc(const MCMCConfig& config, const ParticleLoss& loss, double weight,
                   std::size_t particles, std::size_t dataset_size, Simulator& simulator,
                   const GaussianLocationModel& prior, RngStream rng);

// sum_i log[(1/M) sum_m g(y_i | x_{i,m})], x_{i,m} ~ f(. | theta), one fresh
// simulated point per observation and particle.
double unbiased_loglik_estimate(const GaussianLocationModel& model, double theta,
                                std::span<const double> y, std::size_t M, RngStream& rng);

// Batch form used inside the chain: draws M datasets of size |y| through the
// simulator (M calls).
double unbiased_loglik_estimate(Simulator& simulator, const GaussianLocationModel& model,
                                double theta, std::span<const double> y, std::size_t M,
                                const RngStream& family, std::vector<double>& scratch);

// Pseudo-marginal Metropolis chain targeting the exact error-model posterior.
Trace pseudo_marginal_mcmc(const MCMCConfig& config, const GaussianLocationModel& model,
                           std::span<const double> y, std::size_t M, RngStream rng);

// ---------------------------------------------------------------------------
// Pilot tuning

// Runs one pilot chain with the given config and particle count.
using ChainRunner = std::function<Trace(const MCMCConfig&, std::size_t particles)>;

struct TuneOptions {
    double target_rate = 0.25;
    double tolerance = 0.05;
    std::size_t pilot_iterations = 10000;
    int max_rounds = 24;
    bool tune_proposal = true;
    bool tune_particles = false;
    std::size_t particles = 1;
    std::size_t max_particles = 4096;
};

struct TuneResult {
    MCMCConfig config;
    std::size_t particles = 1;
    double pilot_acceptance = 0.0;
    std::uint64_t pilot_calls = 0;
    int rounds = 0;
};

class TuningFailed : public Error {
public:
    TuningFailed(const std::string& what, TuneResult best) : Error(what), best_(std::move(best)) {}
    const TuneResult& best() const { return best_; }

private:
    TuneResult best_;
};

// Pilot-run search for a config whose acceptance rate is within
// options.tolerance of options.target_rate. Particle count is searched first
// (doubling then bisection, acceptance rises with M), then the proposal scale
// (doubling/halving then log-bisection, acceptance falls with the scale).
// Each pilot uses config.seed + round as its seed; the returned config keeps
// the caller's seed.
TuneResult tune_acceptance(const MCMCConfig& config, const ChainRunner& runner,
                           const TuneOptions& options);

// ---------------------------------------------------------------------------
// Weight calibration

struct CalibrationOptions {
    std::size_t iterations = 20000;
    // Empty: 2.38 times the standard deviation of the reference draws.
    std::optional<double> proposal_std;
    // Shift each chain onto the reference mean before the KS comparison, so
    // the score measures spread and shape only. The weight cannot move a
    // robust loss's posterior location, and without alignment a shifted
    // posterior leaves the KS score nearly flat in w.
    bool align_location = false;
};

struct CalibrationResult {
    double weight = 0.0;
    std::vector<double> grid;
    std::vector<double> ks_statistic;  // NaN for degenerate candidates
    std::uint64_t simulator_calls = 0;
};

class CalibrationFailed : public Error {
public:
    using Error::Error;
};

// Short chain per candidate weight; returns the weight whose post-burn-in
// samples are closest to the reference draws in KS distance.
CalibrationResult calibrate_weight(const LossSpec& spec, const GaussianLocationModel& model,
                                   std::span<const double> y, std::span<const double> reference,
                                   std::span<const double> grid, RngStream rng,
                                   const CalibrationOptions& options = {});

}  // namespace gbi
