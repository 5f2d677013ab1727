#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gbi/diagnostics.hpp"
#include "gbi/rng.hpp"
#include "gbi/samplers.hpp"
#include "oracles.hpp"

using namespace gbi;

TEST_CASE("analytic posterior matches quadrature") {
    RngStream rng(21, 0);
    for (int k = 0; k < 5; ++k) {
        std::vector<double> y(20 + 40 * k);
        for (auto& v : y) v = rng.normal(1.0, std::sqrt(2.0));
        for (double lik_var : {1.0, 2.0}) {
            const auto p = analytic_posterior(y, 0.0, 25.0, lik_var);
            const auto q = oracle::posterior_by_quadrature(y, 0.0, 25.0, lik_var, p.mean, std::sqrt(p.variance));
            CHECK(std::fabs(p.mean - q.mean) < 1e-6);
            CHECK(std::fabs(p.variance - q.variance) < 1e-6);
        }
    }
    const std::vector<double> y{2.0, 4.0};
    const auto p = analytic_posterior(y, 0.0, 1.0, 1.0);
    CHECK(p.variance == doctest::Approx(1.0 / 3.0));
    CHECK(p.mean == doctest::Approx(2.0));
}

TEST_CASE("ESS of iid draws is close to N") {
    RngStream rng(22, 0);
    std::vector<double> x(100000);
    for (auto& v : x) v = rng.standard_normal();
    const double ess = effective_sample_size(x);
    CHECK(ess > 90000.0);
    CHECK(ess <= 100000.0);
}

TEST_CASE("ESS of AR(1) chains follows the integrated autocorrelation time") {
    RngStream rng(23, 0);
    for (double rho : {0.5, 0.9, 0.99}) {
        std::vector<double> x(400000);
        double s = rng.standard_normal() / std::sqrt(1.0 - rho * rho);
        for (auto& v : x) {
            s = rho * s + rng.standard_normal();
            v = s;
        }
        const double expect = static_cast<double>(x.size()) / oracle::ar1_iact(rho);
        CHECK(effective_sample_size(x) == doctest::Approx(expect).epsilon(0.15));
    }
}

TEST_CASE("ESS edge cases") {
    CHECK_THROWS_AS(effective_sample_size(std::vector<double>(5, 1.0)), InsufficientData);
    CHECK_THROWS_AS(effective_sample_size(std::vector<double>(100, 1.0)), DegenerateChain);
    std::vector<double> alt(1000);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
    const double ess = effective_sample_size(alt);
    CHECK(ess > 0.0);
    CHECK(ess <= 1000.0);
}

TEST_CASE("KS statistic") {
    const std::vector<double> a{1, 2, 3, 4}, b{1.5, 2.5, 3.5, 4.5};
    CHECK(ks_two_sample(a, b).statistic == 0.25);
    CHECK(ks_two_sample(b, a).statistic == 0.25);
    CHECK(ks_two_sample(a, a).statistic == 0.0);
    CHECK(ks_two_sample(a, a).pvalue == doctest::Approx(1.0));
    const std::vector<double> far{10, 11};
    CHECK(ks_two_sample(a, far).statistic == 1.0);
    RngStream rng(24, 0);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> x(30 + k), y(17 + 2 * k);
        // Rounded values force ties.
        for (auto& v : x) v = std::round(rng.standard_normal() * 4.0) / 4.0;
        for (auto& v : y) v = std::round(rng.normal(0.3, 1.0) * 4.0) / 4.0;
        CHECK(ks_two_sample(x, y).statistic == doctest::Approx(oracle::ks_statistic(x, y)).epsilon(1e-14));
        CHECK(ks_two_sample(x, y).statistic == ks_two_sample(y, x).statistic);
    }
}

TEST_CASE("Kolmogorov survival function") {
    CHECK(kolmogorov_survival(0.0) == 1.0);
    CHECK(kolmogorov_survival(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(kolmogorov_survival(1.2238478702170825) == doctest::Approx(0.10).epsilon(1e-6));
    CHECK(kolmogorov_survival(10.0) < 1e-40);
    double prev = 1.0;
    for (double t = 0.05; t < 3.0; t += 0.05) {
        const double s = kolmogorov_survival(t);
        CHECK(s <= prev);
        prev = s;
    }
}

TEST_CASE("KS protocol separates equal and shifted distributions") {
    RngStream data(25, 0), rng(25, 1);
    int equal_pass = 0, shifted_pass = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> a(2000), b(2000), c(2000);
        for (auto& v : a) v = data.standard_normal();
        for (auto& v : b) v = data.standard_normal();
        for (auto& v : c) v = data.normal(1.0, 1.0);
        equal_pass += ks_verification_protocol(a, b, rng).passed;
        shifted_pass += ks_verification_protocol(a, c, rng).passed;
    }
    // Level 0.1: about 90% of equal pairs pass.
    CHECK(equal_pass > 160);
    CHECK(equal_pass < 195);
    CHECK(shifted_pass == 0);
    std::vector<double> shorty(100);
    CHECK_THROWS_AS(ks_verification_protocol(shorty, shorty, rng), InsufficientData);
    KsProtocolOptions strided;
    strided.mode = SubsampleMode::Strided;
    std::vector<double> a(3000);
    for (auto& v : a) v = data.standard_normal();
    CHECK(ks_verification_protocol(a, a, rng, strided).statistic >= 0.0);
}

TEST_CASE("sampling without replacement") {
    RngStream rng(26, 0);
    std::vector<int> hits(50, 0);
    for (int t = 0; t < 20000; ++t) {
        const auto idx = sample_without_replacement(50, 10, rng);
        REQUIRE(idx.size() == 10);
        CHECK(std::is_sorted(idx.begin(), idx.end()));
        CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
        for (auto i : idx) ++hits[i];
    }
    // Each index is included with probability 1/5: 4000 expected, sd 57.
    for (int h : hits) CHECK(std::abs(h - 4000) < 300);
    CHECK(sample_without_replacement(5, 5, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), InsufficientData);
}

TEST_CASE("posterior summary of a trace") {
    Trace t;
    t.thetas = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const auto s = posterior_summary(t);
    CHECK(s.mean == 6.0);
    CHECK(s.variance == 11.0);
    CHECK(s.ess > 0.0);
    t.thetas.assign(20, 2.0);
    CHECK_THROWS_AS(posterior_summary(t), DegenerateChain);
}
