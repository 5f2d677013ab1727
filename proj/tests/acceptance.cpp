// Acceptance runner: `gbi-acceptance A1 ... A6` prints one PASS/FAIL line per
// criterion and exits non-zero if any fails. A1-A4 run the full-scale
// experiments in-process; A5 and A6 check against the test oracles.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gbi/diagnostics.hpp"
#include "gbi/experiments.hpp"
#include "gbi/losses.hpp"
#include "gbi/samplers.hpp"
#include "gbi/simulator.hpp"
#include "oracles.hpp"

using namespace gbi;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr std::uint64_t kA1Budget = 1'500'000;
constexpr double kA1EssLow = 1e3, kA1EssHigh = 1e4, kA1MinRatio = 2.0;
constexpr std::uint64_t kA2Budget = 3'000'000;
constexpr std::size_t kA2ArgmaxLow = 10, kA2ArgmaxHigh = 30;
constexpr double kA2MinFactor = 2.0;
constexpr std::size_t kA3Iterations = 1'000'000;
constexpr double kA3MinFraction = 0.9;
constexpr std::size_t kA4MinPasses = 4;
constexpr std::size_t kReplications = 5;
constexpr double kA5PosteriorTol = 1e-6, kA5MmdTol = 1e-10, kA5W1Tol = 1e-9;
constexpr double kA6VarianceTol = 0.10, kA6EssTol = 0.10, kA6MeanSe = 3.0;

struct Verdict {
    bool passed = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) passed = false;
        detail << (ok ? "" : "[x] ") << what << "; ";
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<const ResultRow*> rows_of(const ExperimentResult& r, const std::string& method,
                                      std::optional<std::size_t> M, const std::string& stat) {
    std::vector<const ResultRow*> out;
    for (const auto& row : r.rows)
        if (row.method == method && row.statistic == stat && (!M || row.particles == M)) out.push_back(&row);
    return out;
}

ExperimentResult run(ExperimentKind kind, ExperimentConfig& cfg) {
    const char* base = std::getenv(kOutputDirEnv);
    cfg.output_dir = fs::path(base ? base : "acceptance-output") / experiment_name(kind);
    cfg.workers = std::max(1u, std::thread::hardware_concurrency());
    cfg.replications = kReplications;
    return run_experiment(cfg);
}

Verdict a1() {
    auto cfg = default_config(ExperimentKind::BudgetComparison);
    cfg.budget = kA1Budget;
    cfg.model = GaussianLocationModel{};
    cfg.abc_particles = 15;
    cfg.target_acceptance = 0.25;
    cfg.acceptance_tolerance = 0.05;
    const auto res = run(ExperimentKind::BudgetComparison, cfg);
    std::vector<double> pm, ratio;
    bool budget_ok = true, tuned_ok = true;
    for (const auto* r : rows_of(res, "PM", std::nullopt, "ess")) pm.push_back(r->value);
    for (const auto* r : rows_of(res, "ST/PM", std::nullopt, "ess_ratio")) ratio.push_back(r->value);
    for (const char* m : {"PM", "ST"})
        for (const auto* r : rows_of(res, m, std::nullopt, "ess")) budget_ok &= r->simulator_calls <= kA1Budget;
    for (const auto* r : rows_of(res, "PM", std::nullopt, "pilot_acceptance"))
        tuned_ok &= std::fabs(r->value - 0.25) <= 0.05;
    Verdict v;
    v.require(pm.size() == kReplications && ratio.size() == kReplications, "5 seeds");
    const double pm_med = median(pm), ratio_med = median(ratio);
    v.require(pm_med >= kA1EssLow && pm_med <= kA1EssHigh, "median PM ESS " + fmt(pm_med) + " in [1e3, 1e4]");
    v.require(ratio_med >= kA1MinRatio, "median ST/PM ESS ratio " + fmt(ratio_med) + " >= 2");
    v.require(budget_ok, "chains within 1.5e6 calls");
    v.require(tuned_ok, "PM pilot acceptance in 25% +- 5%");
    return v;
}

Verdict a2() {
    auto cfg = default_config(ExperimentKind::EssVsParticles);
    cfg.budget = kA2Budget;
    cfg.losses = {LossKind::SoftThreshold, LossKind::Mmd, LossKind::Wasserstein};
    const auto res = run(ExperimentKind::EssVsParticles, cfg);
    auto mean_ess = [&](const std::string& label, std::size_t M) {
        const auto rows = rows_of(res, label, M, "ess");
        double s = 0.0;
        for (const auto* r : rows) s += r->value;
        return rows.empty() ? std::nan("") : s / static_cast<double>(rows.size());
    };
    Verdict v;
    std::size_t best_M = 0;
    double best = -1.0;
    for (std::size_t M : cfg.particle_grid) {
        const double e = mean_ess("ST", M);
        if (e > best) {
            best = e;
            best_M = M;
        }
    }
    v.require(best_M >= kA2ArgmaxLow && best_M <= kA2ArgmaxHigh,
              "(a) ST argmax M = " + std::to_string(best_M) + " (ESS " + fmt(best) + ")");
    const double st1 = mean_ess("ST", 1);
    for (const char* label : {"K2", "W1"}) {
        const double e1 = mean_ess(label, 1), e16 = mean_ess(label, 16);
        v.require(e1 > e16, std::string("(b) ") + label + " ESS M=1 " + fmt(e1) + " > M=16 " + fmt(e16));
        v.require(e1 >= kA2MinFactor * st1,
                  std::string("(c) ") + label + " M=1 / ST M=1 = " + fmt(e1 / st1) + " >= 2");
    }
    return v;
}

Verdict a3() {
    auto cfg = default_config(ExperimentKind::MisspecSweep);
    cfg.iterations = kA3Iterations;
    cfg.sigma2_grid = {0.25, 0.5, 1, 2, 4, 8, 16};
    cfg.methods = {{LossKind::SoftThreshold, 64}, {LossKind::Mmd, 1}, {LossKind::Wasserstein, 1}};
    const auto res = run(ExperimentKind::MisspecSweep, cfg);
    std::map<std::pair<double, std::uint64_t>, double> st;
    for (const auto* r : rows_of(res, "ST", 64, "abs_error")) st[{*r->sigma2, r->seed}] = r->value;
    Verdict v;
    v.require(st.size() == cfg.sigma2_grid.size() * kReplications, "ST cells " + std::to_string(st.size()));
    for (const char* label : {"K2", "W1"}) {
        std::size_t wins = 0, cells = 0;
        for (const auto* r : rows_of(res, label, 1, "abs_error")) {
            const auto it = st.find({*r->sigma2, r->seed});
            if (it == st.end()) continue;
            ++cells;
            wins += r->value <= it->second;
        }
        const double frac = cells ? static_cast<double>(wins) / static_cast<double>(st.size()) : 0.0;
        v.require(frac >= kA3MinFraction, std::string(label) + " no worse than ST(M=64) on " + std::to_string(wins) +
                                              "/" + std::to_string(st.size()) + " cells");
    }
    return v;
}

Verdict a4() {
    auto cfg = default_config(ExperimentKind::PosteriorCompare);
    cfg.ks_subsample = 150;
    cfg.ks_level = 0.1;
    const auto res = run(ExperimentKind::PosteriorCompare, cfg);
    Verdict v;
    for (const char* label : {"PM", "ST"}) {
        const auto rows = rows_of(res, label, std::nullopt, "ks_pass");
        std::size_t passes = 0;
        for (const auto* r : rows) passes += r->value == 1.0;
        v.require(rows.size() == kReplications && passes >= kA4MinPasses,
                  std::string(label) + " KS passes " + std::to_string(passes) + "/" + std::to_string(rows.size()));
    }
    return v;
}

std::vector<double> normals(RngStream& rng, std::size_t n, double mu, double sd) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(mu, sd);
    return x;
}

Verdict a5() {
    Verdict v;
    RngStream rng(0xA5, 0);
    double post_err = 0.0;
    for (int k = 0; k < 10; ++k) {
        const auto y = normals(rng, 100, 1.0, std::sqrt(2.0));
        const auto p = analytic_posterior(y, 0.0, 25.0, 2.0);
        const auto q = oracle::posterior_by_quadrature(y, 0.0, 25.0, 2.0, p.mean, std::sqrt(p.variance));
        post_err = std::max({post_err, std::fabs(p.mean - q.mean), std::fabs(p.variance - q.variance)});
    }
    v.require(post_err <= kA5PosteriorTol, "posterior vs quadrature max error " + fmt(post_err));
    double mmd_err = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto x = normals(rng, 10 + k, rng.normal(0, 1), 0.5 + rng.uniform());
        const auto y = normals(rng, 100, 1.0, 1.4);
        const double gamma = 0.2 + 2.0 * rng.uniform();
        mmd_err = std::max(mmd_err, std::fabs(mmd2_loss(x, y, gamma) - oracle::mmd2(x, y, gamma)));
    }
    v.require(mmd_err <= kA5MmdTol, "mmd2 vs double sum max error " + fmt(mmd_err));
    double w1_err = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto x = normals(rng, 5 + k % 37, rng.normal(0, 1), 1.0);
        const auto y = normals(rng, 3 + k % 53, 0.0, 1.5);
        w1_err = std::max(w1_err, std::fabs(wasserstein_loss(x, y) - oracle::w1_quantile_integral(x, y)));
    }
    v.require(w1_err <= kA5W1Tol, "W1 vs quantile integral max error " + fmt(w1_err));
    return v;
}

Verdict a6() {
    Verdict v;
    RngStream rng(0xA6, 0);

    bool props = true, triangle = true;
    for (LossKind kind : {LossKind::SoftThreshold, LossKind::GaussianKernel, LossKind::HardThreshold,
                          LossKind::Mmd, LossKind::Wasserstein}) {
        LossSpec spec;
        spec.kind = kind;
        spec.gamma = 1.0;
        for (int k = 0; k < 50; ++k) {
            const auto x = normals(rng, 20 + k, rng.normal(0, 1), 1.0);
            const auto y = normals(rng, 50, rng.normal(0, 1), 1.3);
            const double a = (*prepare_loss(spec, y))(x), b = (*prepare_loss(spec, x))(y);
            props &= a >= 0.0 && (a == b || std::fabs(a - b) <= 1e-10 * std::max(1.0, a));
            props &= std::fabs((*prepare_loss(spec, y))(y)) <= 1e-12;
        }
    }
    for (int k = 0; k < 1000; ++k) {
        const auto x = normals(rng, 1 + k % 13, 0, 1), y = normals(rng, 1 + k % 7, 0.5, 2),
                   z = normals(rng, 1 + k % 19, -1, 0.5);
        triangle &= wasserstein_loss(x, z) <= wasserstein_loss(x, y) + wasserstein_loss(y, z) + 1e-12;
    }
    v.require(props, "loss nonnegativity/symmetry/identity");
    v.require(triangle, "W1 triangle inequality");

    bool in_range = true;
    for (int k = 0; k < 10000; ++k) {
        const double a = acceptance_probability(0.1 + 10 * rng.uniform(), rng.normal(0, 3), rng.normal(0, 3),
                                                rng.normal(0, 3), rng.normal(0, 3));
        in_range &= a >= 0.0 && a <= 1.0;
    }
    const double inf = std::numeric_limits<double>::infinity();
    const bool trivial = acceptance_probability(3.0, 1.2, 1.2, -0.4, -0.4) == 1.0 &&
                         std::fabs(acceptance_probability(1.0, 0.7, 0.7 + std::log(2.0), 0.0, 0.0) - 0.5) < 1e-15 &&
                         acceptance_probability(1.0, 0.7, inf, 0.0, 0.0) == 0.0;
    v.require(in_range && trivial, "acceptance probability in [0,1], trivial cases exact");

    {
        GaussianLocationModel model;
        const auto y = generate_observations(model, model.true_var, RngStream(0xA6, 1));
        LossSpec flat;
        flat.kind = LossKind::HardThreshold;
        flat.threshold = 1e300;
        MCMCConfig c;
        c.iterations = 100000;
        c.proposal_std = 2.38 * 5.0;
        const auto t = gbi_abc_mcmc(c, flat, model, y, RngStream(0xA6, 2));
        const auto s = posterior_summary(t);
        const double se = std::sqrt(s.variance / s.ess);
        v.require(std::fabs(s.mean) <= kA6MeanSe * se && std::fabs(s.variance / 25.0 - 1.0) <= kA6VarianceTol,
                  "prior recovery mean " + fmt(s.mean) + " (3 SE " + fmt(3 * se) + "), variance " + fmt(s.variance));
    }
    {
        std::vector<double> ar(100000);
        double s = rng.standard_normal() / std::sqrt(0.75);
        for (auto& x : ar) x = s = 0.5 * s + rng.standard_normal();
        const double ess = effective_sample_size(ar), target = static_cast<double>(ar.size()) / 3.0;
        v.require(std::fabs(ess / target - 1.0) <= kA6EssTol, "AR(1) ESS " + fmt(ess) + " vs N/3 " + fmt(target));
    }
    {
        auto cfg = default_config(ExperimentKind::WeightSweep);
        cfg.iterations = 3000;
        cfg.replications = 2;
        cfg.weight_grid = {1.0, 10.0};
        cfg.write_samples = true;
        const fs::path base = fs::temp_directory_path() / "gbi-acceptance-a6";
        std::string text[2];
        for (int k = 0; k < 2; ++k) {
            cfg.output_dir = base / std::to_string(k);
            fs::remove_all(cfg.output_dir);
            const auto res = run_experiment(cfg);
            for (const auto& f : res.sample_files) {
                std::ifstream in(cfg.output_dir / f);
                text[k] += std::string(std::istreambuf_iterator<char>(in), {});
            }
            std::ifstream in(cfg.output_dir / "results.csv");
            text[k] += std::string(std::istreambuf_iterator<char>(in), {});
        }
        v.require(!text[0].empty() && text[0] == text[1], "repeated seeded runs give byte-identical CSVs");
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<std::string, std::function<Verdict()>> criteria{
        {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}};
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.empty())
        for (const auto& [name, fn] : criteria) wanted.push_back(name);
    bool all = true;
    for (const auto& name : wanted) {
        const auto it = criteria.find(name);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion " << name << "\n";
            return 2;
        }
        Verdict v;
        try {
            v = it->second();
        } catch (const std::exception& e) {
            v.passed = false;
            v.detail << "error: " << e.what();
        }
        std::cout << name << (v.passed ? " PASS: " : " FAIL: ") << v.detail.str() << std::endl;
        all &= v.passed;
    }
    return all ? 0 : 1;
}
