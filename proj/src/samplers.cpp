#include "gbi/samplers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include "gbi/diagnostics.hpp"
#include "gbi/kernels.hpp"

namespace gbi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream layout of a chain: proposals and acceptance uniforms come from
// split(0), simulator datasets from the split(1) family.
constexpr std::uint64_t kChainStream = 0;
constexpr std::uint64_t kSimulationStream = 1;

void append_double(std::string& out, double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

// Shared random-walk Metropolis loop. `estimate(theta)` runs the simulator
// and returns the value stored with a state; `accept(current, proposed,
// logp, logp_new)` maps stored values to an acceptance probability.
template <class Estimate, class Accept>
Trace run_metropolis(const MCMCConfig& config, const GaussianLocationModel& prior,
                     Simulator& simulator, std::uint64_t calls_per_step, RngStream rng,
                     Estimate&& estimate, Accept&& accept) {
    config.validate();
    RngStream chain = rng.split(kChainStream);
    const std::uint64_t start_calls = simulator.calls();
    const std::uint64_t start_draws = simulator.draws();
    if (config.budget && *config.budget < calls_per_step)
        throw InvalidParameter("MCMC budget cannot pay for the initial state");

    const double prior_sd = std::sqrt(prior.prior_var);
    double theta = config.init_theta ? *config.init_theta : chain.normal(prior.prior_mean, prior_sd);
    double value = estimate(theta);
    double logp = prior_logpdf(prior, theta);

    Trace trace;
    trace.burn_in = config.effective_burn_in();
    const std::size_t kept = config.iterations - trace.burn_in;
    trace.thetas.reserve(kept);
    trace.values.reserve(kept);
    trace.accepted.reserve(kept);

    std::size_t accepted_kept = 0;
    std::size_t it = 0;
    for (; it < config.iterations; ++it) {
        if (config.budget && simulator.calls() - start_calls + calls_per_step > *config.budget) {
            trace.status = TraceStatus::BudgetExhausted;
            break;
        }
        const double proposal = theta + config.proposal_std * chain.standard_normal();
        const double u = chain.uniform();
        const double proposed_value = estimate(proposal);
        const double proposed_logp = prior_logpdf(prior, proposal);
        const bool take = u < accept(value, proposed_value, logp, proposed_logp);
        if (take) {
            theta = proposal;
            value = proposed_value;
            logp = proposed_logp;
        }
        if (it >= trace.burn_in) {
            trace.thetas.push_back(theta);
            trace.values.push_back(value);
            trace.accepted.push_back(take ? 1 : 0);
            accepted_kept += take ? 1 : 0;
        }
    }
    trace.iterations_run = it;
    trace.simulator_calls = simulator.calls() - start_calls;
    trace.simulator_draws = simulator.draws() - start_draws;
    trace.acceptance_rate = trace.accepted.empty()
                                ? 0.0
                                : static_cast<double>(accepted_kept) /
                                      static_cast<double>(trace.accepted.size());
    return trace;
}

}  // namespace

void MCMCConfig::validate() const {
    if (iterations == 0) throw InvalidParameter("MCMC iterations must be positive");
    if (effective_burn_in() >= iterations)
        throw InvalidParameter("MCMC burn-in must be smaller than the iteration count");
    if (!(proposal_std > 0.0)) throw InvalidParameter("proposal_std must be positive");
    if (budget && *budget == 0) throw InvalidParameter("simulator budget must be positive");
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
    std::string out = "iter,theta,loss,accepted\n";
    out.reserve(out.size() + trace.thetas.size() * 48);
    for (std::size_t k = 0; k < trace.thetas.size(); ++k) {
        out += std::to_string(trace.burn_in + k);
        out += ',';
        append_double(out, trace.thetas[k]);
        out += ',';
        append_double(out, trace.values[k]);
        out += trace.accepted[k] ? ",1\n" : ",0\n";
    }
    os << out;
}

double acceptance_probability(double w, double loss_current, double loss_proposed,
                              double logprior_current, double logprior_proposed) {
    if (std::isnan(w) || std::isnan(loss_current) || std::isnan(loss_proposed) ||
        std::isnan(logprior_current) || std::isnan(logprior_proposed))
        throw NumericalError("acceptance_probability: NaN input");
    if (!(w > 0.0)) throw InvalidParameter("acceptance_probability: weight must be positive");
    if (loss_proposed == kInf || logprior_proposed == -kInf) return 0.0;
    if (loss_current == kInf || logprior_current == -kInf) return 1.0;
    const double log_ratio =
        -w * (loss_proposed - loss_current) + (logprior_proposed - logprior_current);
    return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

Trace gbi_abc_mcmc(const MCMCConfig& config, const ParticleLoss& loss, double weight,
                   std::size_t particles, std::size_t dataset_size, Simulator& simulator,
                   const GaussianLocationModel& prior, RngStream rng) {
    if (particles == 0) throw InvalidParameter("gbi_abc_mcmc: particles must be positive");
    if (dataset_size == 0) throw InvalidParameter("gbi_abc_mcmc: dataset size must be positive");
    if (!(weight > 0.0)) throw InvalidParameter("gbi_abc_mcmc: weight must be positive");
    const RngStream family = rng.split(kSimulationStream);
    std::vector<double> buffer(particles * dataset_size);
    auto estimate = [&](double theta) {
        simulator.simulate_batch(theta, dataset_size, particles, family, buffer);
        return averaged_loss(loss, buffer, dataset_size, particles);
    };
    auto accept = [weight](double cur, double prop, double lp, double lp_new) {
        return acceptance_probability(weight, cur, prop, lp, lp_new);
    };
    return run_metropolis(config, prior, simulator, particles, rng, estimate, accept);
}

Trace gbi_abc_mcmc(const MCMCConfig& config, const LossSpec& spec,
                   const GaussianLocationModel& model, std::span<const double> y, RngStream rng) {
    if (y.empty()) throw InsufficientData("gbi_abc_mcmc: empty observations");
    spec.validate();
    GaussianSimulator simulator(model);
    const auto loss = prepare_loss(spec, y);
    return gbi_abc_mcmc(config, *loss, spec.weight, spec.particles, y.size(), simulator, model, rng);
}

double unbiased_loglik_estimate(Simulator& simulator, const GaussianLocationModel& model,
                                double theta, std::span<const double> y, std::size_t M,
                                const RngStream& family, std::vector<double>& scratch) {
    if (M == 0) throw InvalidParameter("unbiased_loglik_estimate: M must be positive");
    if (y.empty()) throw InsufficientData("unbiased_loglik_estimate: empty observations");
    const std::size_t n = y.size();
    scratch.resize(n * M + n);
    std::span<double> particles(scratch.data(), n * M);
    std::span<double> terms(scratch.data() + n * M, n);
    simulator.simulate_batch(theta, n, M, family, particles);
    kernels::loglik_terms(y, particles, M, model.error_var, terms);
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

double unbiased_loglik_estimate(const GaussianLocationModel& model, double theta,
                                std::span<const double> y, std::size_t M, RngStream& rng) {
    if (M == 0) throw InvalidParameter("unbiased_loglik_estimate: M must be positive");
    if (y.empty()) throw InsufficientData("unbiased_loglik_estimate: empty observations");
    GaussianSimulator simulator(model);
    std::vector<double> particles;
    particles.reserve(y.size() * M);
    for (std::size_t m = 0; m < M; ++m) {
        const Dataset x = simulator.simulate(theta, y.size(), rng);
        particles.insert(particles.end(), x.begin(), x.end());
    }
    std::vector<double> terms(y.size());
    kernels::loglik_terms(y, particles, M, model.error_var, terms);
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

Trace pseudo_marginal_mcmc(const MCMCConfig& config, const GaussianLocationModel& model,
                           std::span<const double> y, std::size_t M, RngStream rng) {
    if (y.empty()) throw InsufficientData("pseudo_marginal_mcmc: empty observations");
    if (M == 0) throw InvalidParameter("pseudo_marginal_mcmc: M must be positive");
    GaussianSimulator simulator(model);
    const RngStream family = rng.split(kSimulationStream);
    std::vector<double> scratch;
    auto estimate = [&](double theta) {
        return unbiased_loglik_estimate(simulator, model, theta, y, M, family, scratch);
    };
    auto accept = [](double cur, double prop, double lp, double lp_new) {
        if (std::isnan(cur) || std::isnan(prop)) throw NumericalError("pseudo-marginal: NaN estimate");
        if (prop == -kInf || lp_new == -kInf) return 0.0;
        if (cur == -kInf || lp == -kInf) return 1.0;
        const double log_ratio = (prop - cur) + (lp_new - lp);
        return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    };
    return run_metropolis(config, model, simulator, M, rng, estimate, accept);
}

// ---------------------------------------------------------------------------

TuneResult tune_acceptance(const MCMCConfig& config, const ChainRunner& runner,
                           const TuneOptions& options) {
    if (!(options.target_rate > 0.05 && options.target_rate < 0.95))
        throw InvalidParameter("tune_acceptance: target rate must lie in (0.05, 0.95)");
    if (options.pilot_iterations < 10) throw InvalidParameter("tune_acceptance: pilot too short");
    const double target = options.target_rate;
    const double tol = options.tolerance;

    TuneResult best;
    best.config = config;
    best.particles = options.particles;
    double best_gap = kInf;
    std::uint64_t pilot_calls = 0;
    int rounds = 0;

    auto pilot = [&](double proposal_std, std::size_t particles) {
        if (rounds >= options.max_rounds) {
            best.pilot_calls = pilot_calls;
            best.rounds = rounds;
            throw TuningFailed("tune_acceptance: no config within tolerance after " +
                                   std::to_string(rounds) + " pilot runs",
                               best);
        }
        MCMCConfig c = config;
        c.iterations = options.pilot_iterations;
        c.burn_in = options.pilot_iterations / 10;
        c.proposal_std = proposal_std;
        c.budget.reset();
        c.seed = config.seed + static_cast<std::uint64_t>(rounds);
        const Trace t = runner(c, particles);
        ++rounds;
        pilot_calls += t.simulator_calls;
        const double gap = std::fabs(t.acceptance_rate - target);
        if (gap < best_gap) {
            best_gap = gap;
            best.config = config;
            best.config.proposal_std = proposal_std;
            best.particles = particles;
            best.pilot_acceptance = t.acceptance_rate;
        }
        return t.acceptance_rate;
    };
    auto within = [&](double acc) { return std::fabs(acc - target) <= tol; };
    auto finish = [&]() {
        best.pilot_calls = pilot_calls;
        best.rounds = rounds;
        return best;
    };

    double scale = config.proposal_std;
    std::size_t particles = std::max<std::size_t>(1, options.particles);
    double acc = pilot(scale, particles);
    if (within(acc)) return finish();

    if (options.tune_particles) {
        if (acc < target) {
            std::size_t low = particles;
            while (acc < target - tol && particles < options.max_particles) {
                low = particles;
                particles = std::min(options.max_particles, 2 * particles);
                acc = pilot(scale, particles);
            }
            std::size_t high = particles;
            while (!within(acc) && acc > target && high - low > 1) {
                const std::size_t mid = low + (high - low) / 2;
                acc = pilot(scale, mid);
                if (acc < target) low = mid; else high = mid;
                particles = mid;
            }
        } else {
            std::size_t high = particles;
            while (acc > target + tol && particles > 1) {
                high = particles;
                particles = std::max<std::size_t>(1, particles / 2);
                acc = pilot(scale, particles);
            }
            std::size_t low = particles;
            while (!within(acc) && acc < target && high - low > 1) {
                const std::size_t mid = low + (high - low) / 2;
                acc = pilot(scale, mid);
                if (acc < target) low = mid; else high = mid;
                particles = mid;
            }
        }
        if (within(acc)) return finish();
        // Fall through to the proposal scale with the best particle count.
        particles = best.particles;
        acc = best.pilot_acceptance;
    }

    if (options.tune_proposal) {
        double small = scale;  // acceptance above target
        double large = scale;  // acceptance below target
        if (acc > target) {
            while (acc > target + tol) {
                small = scale;
                scale *= 2.0;
                acc = pilot(scale, particles);
            }
            large = scale;
        } else {
            while (acc < target - tol) {
                large = scale;
                scale *= 0.5;
                acc = pilot(scale, particles);
            }
            small = scale;
        }
        while (!within(acc)) {
            scale = std::sqrt(small * large);
            acc = pilot(scale, particles);
            if (acc > target) small = scale; else large = scale;
        }
        return finish();
    }
    best.pilot_calls = pilot_calls;
    best.rounds = rounds;
    throw TuningFailed("tune_acceptance: target rate not reached", best);
}

// ---------------------------------------------------------------------------

CalibrationResult calibrate_weight(const LossSpec& spec, const GaussianLocationModel& model,
                                   std::span<const double> y, std::span<const double> reference,
                                   std::span<const double> grid, RngStream rng,
                                   const CalibrationOptions& options) {
    if (reference.size() < 2) throw InsufficientData("calibrate_weight: reference draws required");
    if (grid.empty()) throw InvalidParameter("calibrate_weight: empty weight grid");
    CalibrationResult result;
    result.grid.assign(grid.begin(), grid.end());
    if (grid.size() == 1) {
        result.weight = grid[0];
        result.ks_statistic.push_back(std::numeric_limits<double>::quiet_NaN());
        return result;
    }
    const SummaryStats ref = summary_stats(reference);
    MCMCConfig chain;
    chain.iterations = options.iterations;
    chain.proposal_std = options.proposal_std ? *options.proposal_std : 2.38 * std::sqrt(ref.variance);
    chain.init_theta = ref.mean;

    GaussianSimulator simulator(model);
    LossSpec candidate = spec;
    const auto loss = prepare_loss(spec, y);
    double best = kInf;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        candidate.weight = grid[k];
        candidate.validate();
        const Trace t = gbi_abc_mcmc(chain, *loss, candidate.weight, candidate.particles, y.size(),
                                     simulator, model, rng.split(k));
        result.simulator_calls += t.simulator_calls;
        const auto [lo, hi] = std::minmax_element(t.thetas.begin(), t.thetas.end());
        if (t.thetas.empty() || t.acceptance_rate == 0.0 || *lo == *hi) {
            result.ks_statistic.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        double d = 0.0;
        if (options.align_location) {
            std::vector<double> shifted(t.thetas);
            const double shift = ref.mean - mean(shifted);
            for (double& v : shifted) v += shift;
            d = ks_two_sample(shifted, reference).statistic;
        } else {
            d = ks_two_sample(t.thetas, reference).statistic;
        }
        result.ks_statistic.push_back(d);
        if (d < best) {
            best = d;
            result.weight = grid[k];
        }
    }
    if (best == kInf) throw CalibrationFailed("calibrate_weight: every candidate chain was degenerate");
    return result;
}

}  // namespace gbi
