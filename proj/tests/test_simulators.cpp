#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gbi/simulator.hpp"
#include "gbi/stats.hpp"

using namespace gbi;

TEST_CASE("simulate draws N(theta, sim_var)") {
    GaussianLocationModel model;
    GaussianSimulator sim(model);
    RngStream rng(1, 1);
    const auto x = sim.simulate(1.0, 100000, rng);
    const auto s = summary_stats(x);
    CHECK((s.mean > 0.99 && s.mean < 1.01));
    CHECK((s.variance > 0.98 && s.variance < 1.02));
}

TEST_CASE("simulate is deterministic and rejects n = 0") {
    GaussianSimulator sim{GaussianLocationModel{}};
    RngStream a(4, 4), b(4, 4);
    CHECK(sim.simulate(0.3, 50, a) == sim.simulate(0.3, 50, b));
    CHECK_THROWS_AS(sim.simulate(0.3, 0, a), InvalidParameter);
}

TEST_CASE("model validation") {
    GaussianLocationModel m;
    m.sim_var = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidParameter);
    CHECK_THROWS_AS(GaussianSimulator{m}, InvalidParameter);
    GaussianLocationModel n;
    n.n_obs = 0;
    CHECK_THROWS_AS(n.validate(), InvalidParameter);
    GaussianLocationModel ok;
    CHECK(ok.sim_var + ok.error_var == ok.true_var);
}

TEST_CASE("call and draw accounting") {
    GaussianSimulator sim{GaussianLocationModel{}};
    RngStream rng(2, 2);
    const std::vector<std::size_t> sizes{3, 10, 1, 100};
    std::size_t total = 0;
    for (auto n : sizes) {
        (void)sim.simulate(0.0, n, rng);
        total += n;
    }
    CHECK(sim.calls() == sizes.size());
    CHECK(sim.draws() == total);
    std::vector<double> buf(7 * 20);
    sim.simulate_batch(0.0, 20, 7, rng, buf);
    CHECK(sim.calls() == sizes.size() + 7);
    CHECK(sim.draws() == total + 140);
}

TEST_CASE("simulate_batch is independent of scheduling") {
    GaussianSimulator a{GaussianLocationModel{}}, b{GaussianLocationModel{}};
    const RngStream family(10, 10);
    std::vector<double> x(64 * 100), y(64 * 100);
    a.simulate_batch(0.5, 100, 64, family, x, true);
    b.simulate_batch(0.5, 100, 64, family, y, false);
    CHECK(x == y);
    // Dataset c of an instance's lifetime always uses family.split(c).
    std::vector<double> first(32 * 100), second(32 * 100);
    GaussianSimulator c{GaussianLocationModel{}};
    c.simulate_batch(0.5, 100, 32, family, first);
    c.simulate_batch(0.5, 100, 32, family, second);
    CHECK(std::equal(first.begin(), first.end(), x.begin()));
    CHECK(std::equal(second.begin(), second.end(), x.begin() + 3200));
    CHECK_THROWS_AS(c.simulate_batch(0.5, 100, 2, family, first), InvalidParameter);
}

TEST_CASE("generate_observations shares xi across sigma2") {
    GaussianLocationModel model;
    const RngStream rng(7, 7);
    const auto y1 = generate_observations(model, 0.25, rng);
    const auto y2 = generate_observations(model, 16.0, rng);
    REQUIRE(y1.size() == model.n_obs);
    for (std::size_t i = 0; i < y1.size(); ++i)
        CHECK((y1[i] - 1.0) / 0.5 == doctest::Approx((y2[i] - 1.0) / 4.0).epsilon(1e-12));
    CHECK_THROWS_AS(generate_observations(model, 0.0, rng), InvalidParameter);
    CHECK_THROWS_AS(generate_observations(model, -2.0, rng), InvalidParameter);
}

TEST_CASE("sigma2 = 1 reproduces the sample variance of xi") {
    GaussianLocationModel model;
    const RngStream rng(8, 8);
    const auto xi = draw_observation_noise(model, rng);
    const auto y = generate_observations(model, 1.0, rng);
    CHECK(summary_stats(y).variance == doctest::Approx(summary_stats(xi).variance).epsilon(1e-12));
}

TEST_CASE("prior and error densities") {
    GaussianLocationModel model;
    CHECK(prior_logpdf(model, 0.0) == doctest::Approx(-0.5 * std::log(50 * std::numbers::pi)).epsilon(1e-14));
    CHECK(prior_logpdf(model, 5.0) == prior_logpdf(model, -5.0));
    // -0.5 log(50 pi) - 100 / 50
    CHECK(prior_logpdf(model, 10.0) == doctest::Approx(-4.528376445638774).epsilon(1e-13));
    CHECK(error_logpdf(model, 1.3, 1.3) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
    CHECK(error_logpdf(model, 0.0, 2.0) == doctest::Approx(-2.9189385332046727).epsilon(1e-14));
    CHECK(error_logpdf(model, 3.0, 1.0) == error_logpdf(model, 1.0, 3.0));
}

TEST_CASE("error model convolved with the simulator gives N(theta, 2)") {
    GaussianLocationModel model;
    GaussianSimulator sim(model);
    RngStream rng(9, 9);
    const double theta = 0.4;
    for (double y : {0.4, 1.5, -1.0}) {
        const auto x = sim.simulate(theta, 100000, rng);
        double s = 0, s2 = 0;
        for (double v : x) {
            const double g = std::exp(error_logpdf(model, y, v));
            s += g;
            s2 += g * g;
        }
        const double n = static_cast<double>(x.size());
        const double est = s / n;
        const double se = std::sqrt((s2 / n - est * est) / n);
        const double exact = std::exp(normal_logpdf(y, theta, 2.0));
        CHECK(std::fabs(est - exact) < 3 * se);
    }
}
