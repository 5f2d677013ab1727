#include "gbi/simulator.hpp"

#include <cmath>
#include <string>

#include "gbi/error.hpp"

namespace gbi {

void GaussianLocationModel::validate() const {
    if (!(sim_var > 0.0) || !(true_var > 0.0) || !(error_var > 0.0) || !(prior_var > 0.0))
        throw InvalidParameter("GaussianLocationModel: variances must be positive");
    if (n_obs == 0) throw InvalidParameter("GaussianLocationModel: n_obs must be positive");
}

Dataset Simulator::simulate(double theta, std::size_t n, RngStream& rng) {
    if (n == 0) throw InvalidParameter("simulate: n must be positive");
    Dataset out(n);
    draw(theta, out, rng);
    calls_ += 1;
    draws_ += n;
    return out;
}

void Simulator::simulate_batch(double theta, std::size_t n, std::size_t count,
                               const RngStream& family, std::span<double> out, bool parallel) {
    if (n == 0) throw InvalidParameter("simulate_batch: n must be positive");
    if (out.size() != n * count)
        throw InvalidParameter("simulate_batch: output span has the wrong size");
    const std::uint64_t first = calls_;
    const auto total = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static) if (parallel && count * n >= 4096)
    for (std::int64_t j = 0; j < total; ++j) {
        RngStream rng = family.split(first + static_cast<std::uint64_t>(j));
        draw(theta, out.subspan(static_cast<std::size_t>(j) * n, n), rng);
    }
    calls_ += count;
    draws_ += count * n;
}

GaussianSimulator::GaussianSimulator(const GaussianLocationModel& model)
    : model_(model), sim_sd_(0.0) {
    model_.validate();
    sim_sd_ = std::sqrt(model_.sim_var);
}

void GaussianSimulator::draw(double theta, std::span<double> out, RngStream& rng) const {
    rng.fill_standard_normal(out);
    for (double& v : out) v = theta + sim_sd_ * v;
}

Dataset draw_observation_noise(const GaussianLocationModel& model, RngStream rng) {
    model.validate();
    Dataset xi(model.n_obs);
    rng.fill_standard_normal(xi);
    return xi;
}

Dataset observations_from_noise(const GaussianLocationModel& model, double sigma2,
                                std::span<const double> xi) {
    if (!(sigma2 > 0.0)) throw InvalidParameter("observations: sigma2 must be positive");
    if (xi.size() != model.n_obs)
        throw InvalidParameter("observations: noise vector has " + std::to_string(xi.size()) +
                               " entries, expected " + std::to_string(model.n_obs));
    const double sigma = std::sqrt(sigma2);
    Dataset y(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) y[i] = model.theta_star + sigma * xi[i];
    return y;
}

Dataset generate_observations(const GaussianLocationModel& model, double sigma2,
                              const RngStream& rng) {
    if (!(sigma2 > 0.0)) throw InvalidParameter("generate_observations: sigma2 must be positive");
    return observations_from_noise(model, sigma2, draw_observation_noise(model, rng));
}

double prior_logpdf(const GaussianLocationModel& model, double theta) {
    return normal_logpdf(theta, model.prior_mean, model.prior_var);
}

double error_logpdf(const GaussianLocationModel& model, double y_point, double x_point) {
    return normal_logpdf(y_point, x_point, model.error_var);
}

}  // namespace gbi
