#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "gbi/rng.hpp"
#include "gbi/stats.hpp"

namespace gbi {

// Gaussian location toy problem: the simulator draws N(theta, sim_var), the
// data actually come from N(theta_star, true_var), and the gap is explained
// by an additive N(0, error_var) measurement error. With the defaults,
// true_var = sim_var + error_var, so the error model is exact.
struct GaussianLocationModel {
    double sim_var = 1.0;
    double true_var = 2.0;
    double error_var = 1.0;
    double prior_mean = 0.0;
    double prior_var = 25.0;
    double theta_star = 1.0;
    std::size_t n_obs = 100;

    // Throws InvalidParameter on a non-positive variance or n_obs == 0.
    void validate() const;
};

// A stochastic simulator theta -> dataset with tamper-proof accounting.
//
// One "call" is one simulator run producing one dataset; "draws" counts the
// scalar points produced. Budgets are expressed in calls. Instances are
// movable between threads but must not be shared mutably.
class Simulator {
public:
    virtual ~Simulator() = default;

    // One dataset of n points drawn sequentially from rng.
    Dataset simulate(double theta, std::size_t n, RngStream& rng);

    // `count` datasets of n points written row-major into out (size count*n).
    // Dataset number c of this instance's lifetime is drawn from
    // family.split(c), so the result does not depend on how the batch is
    // scheduled across threads.
    void simulate_batch(double theta, std::size_t n, std::size_t count, const RngStream& family,
                        std::span<double> out, bool parallel = true);

    std::uint64_t calls() const { return calls_; }
    std::uint64_t draws() const { return draws_; }

protected:
    // Fill `out` with one dataset at theta. Must be safe to call concurrently
    // with distinct rng/out arguments.
    virtual void draw(double theta, std::span<double> out, RngStream& rng) const = 0;

private:
    std::uint64_t calls_ = 0;
    std::uint64_t draws_ = 0;
};

class GaussianSimulator final : public Simulator {
public:
    explicit GaussianSimulator(const GaussianLocationModel& model);

    const GaussianLocationModel& model() const { return model_; }

protected:
    void draw(double theta, std::span<double> out, RngStream& rng) const override;

private:
    GaussianLocationModel model_;
    double sim_sd_;
};

// Standard-normal noise vector xi of length model.n_obs. Reusing the same
// stream value reproduces the same xi.
Dataset draw_observation_noise(const GaussianLocationModel& model, RngStream rng);

// y_i = theta_star + sqrt(sigma2) * xi_i. Throws InvalidParameter unless
// sigma2 > 0 and xi.size() == n_obs.
Dataset observations_from_noise(const GaussianLocationModel& model, double sigma2,
                                std::span<const double> xi);

// Observation set under true variance sigma2. The noise comes from a copy of
// rng, so calling this with the same stream and different sigma2 reuses xi.
Dataset generate_observations(const GaussianLocationModel& model, double sigma2,
                              const RngStream& rng);

double prior_logpdf(const GaussianLocationModel& model, double theta);
double error_logpdf(const GaussianLocationModel& model, double y_point, double x_point);

}  // namespace gbi
