#include "gbi/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gbi/diagnostics.hpp"
#include "gbi/samplers.hpp"

namespace gbi {

namespace {

// Stream ids. Every random quantity of a replication is drawn from
// RngStream(seed + r, id) or a split of it.
constexpr std::uint64_t kObservationStream = 0x6f62730001;
constexpr std::uint64_t kReferenceStream = 0x7265660002;
constexpr std::uint64_t kCalibrationStream = 0x63616c0003;
constexpr std::uint64_t kChainStream = 0x6368610004;
constexpr std::uint64_t kPilotStream = 0x70696c0005;
constexpr std::uint64_t kCheckStream = 0x6b73740006;

constexpr double kRobertsScale = 2.38;

const std::vector<LossKind> kAllLosses = {LossKind::SoftThreshold, LossKind::GaussianKernel,
                                          LossKind::HardThreshold, LossKind::Mmd,
                                          LossKind::Wasserstein};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string_view::npos ? s.size() : comma;
        auto item = trim(s.substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + t + "'");
    return v;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
    const double v = parse_double(key, text);
    if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e18)
        throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string t = lower(trim(text));
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected a boolean");
}

LossKind parse_loss_key(std::string_view key, std::string_view text) {
    try {
        return parse_loss_kind(lower(trim(text)));
    } catch (const Error&) {
        throw ConfigError("config key '" + std::string(key) + "': unknown loss '" + std::string(text) + "'");
    }
}

std::vector<double> parse_double_list(std::string_view key, std::string_view text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
    return out;
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string out;
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (k) out += ',';
        out += fmt(items[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worker pool

// Runs body(i) for i in [0, count) on `workers` threads. Exceptions are
// collected per cell and the lowest-index one is rethrown.
void for_each_cell(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(count);
    const auto n = static_cast<std::int64_t>(count);
    const int threads = static_cast<int>(std::max<std::size_t>(1, std::min(workers, count)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Shared pieces of the experiments

struct Replication {
    std::uint64_t seed = 0;
    Dataset y;
    PosteriorParams posterior;
};

Replication make_replication(const ExperimentConfig& cfg, std::uint64_t seed, double sigma2) {
    Replication rep;
    rep.seed = seed;
    rep.y = generate_observations(cfg.model, sigma2, RngStream(seed, kObservationStream));
    rep.posterior = analytic_posterior(rep.y, cfg.model.prior_mean, cfg.model.prior_var,
                                       cfg.model.sim_var + cfg.model.error_var);
    return rep;
}

std::vector<double> reference_draws(const ExperimentConfig& cfg, const Replication& rep, std::uint64_t tag) {
    RngStream rng = RngStream(rep.seed, kReferenceStream).split(tag);
    std::vector<double> out(cfg.reference_draws);
    const double sd = std::sqrt(rep.posterior.variance);
    for (auto& v : out) v = rng.normal(rep.posterior.mean, sd);
    return out;
}

LossSpec loss_spec(const ExperimentConfig& cfg, LossKind kind, std::size_t particles, double weight) {
    LossSpec s;
    s.kind = kind;
    s.bandwidth = cfg.bandwidth;
    s.threshold = cfg.threshold;
    s.gamma = cfg.gamma;
    s.weight = weight;
    s.particles = particles;
    return s;
}

MCMCConfig chain_config(const ExperimentConfig& cfg, const Replication& rep, std::size_t iterations) {
    MCMCConfig c;
    c.iterations = iterations;
    c.proposal_std = cfg.proposal_std.value_or(kRobertsScale * std::sqrt(rep.posterior.variance));
    c.init_theta = cfg.init_theta;
    c.burn_in = cfg.burn_in;
    c.seed = rep.seed;
    return c;
}

std::size_t loss_index(LossKind kind) { return static_cast<std::size_t>(kind); }

std::size_t calibration_particles(const ExperimentConfig& cfg, LossKind kind) {
    const auto it = cfg.calibration_particles.find(kind);
    return it == cfg.calibration_particles.end() ? 1 : it->second;
}

ResultRow base_row(const ExperimentConfig& cfg, std::string method, std::optional<std::size_t> M,
                   std::optional<double> w, std::optional<double> sigma2, std::uint64_t seed) {
    ResultRow r;
    r.experiment = experiment_name(cfg.experiment);
    r.method = std::move(method);
    r.particles = M;
    r.weight = w;
    r.sigma2 = sigma2;
    r.seed = seed;
    return r;
}

void add_row(std::vector<ResultRow>& rows, ResultRow base, std::string statistic, double value,
             std::uint64_t calls) {
    base.statistic = std::move(statistic);
    base.value = value;
    base.simulator_calls = calls;
    rows.push_back(std::move(base));
}

// Weight for one loss on one replication: the configured value, or the
// calibrated one (reported as a calibrated_weight row).
double resolve_weight(const ExperimentConfig& cfg, LossKind kind, const Replication& rep,
                      std::optional<double> sigma2, std::vector<ResultRow>& rows) {
    if (const auto it = cfg.weights.find(kind); it != cfg.weights.end()) return it->second;
    const auto grid_it = cfg.calibration_grid.find(kind);
    if (grid_it == cfg.calibration_grid.end() || grid_it->second.empty())
        throw ConfigError("no weight and no calibration grid for loss " + loss_kind_name(kind));
    const std::size_t M = calibration_particles(cfg, kind);
    const auto reference = reference_draws(cfg, rep, 0);
    CalibrationOptions options;
    options.iterations = cfg.calibration_iterations;
    options.align_location = cfg.calibration_align;
    options.proposal_std = cfg.proposal_std;
    const auto result = calibrate_weight(loss_spec(cfg, kind, M, 1.0), cfg.model, rep.y, reference,
                                         grid_it->second,
                                         RngStream(rep.seed, kCalibrationStream).split(loss_index(kind)),
                                         options);
    add_row(rows, base_row(cfg, loss_method_label(kind), M, result.weight, sigma2, rep.seed),
            "calibrated_weight", result.weight, result.simulator_calls);
    return result.weight;
}

std::string cell_file(const ExperimentConfig& cfg, const std::string& method, std::size_t M,
                      std::optional<double> w, std::optional<double> sigma2, std::size_t r) {
    std::string name = "samples_" + experiment_name(cfg.experiment) + "_" + method + "_M" + std::to_string(M);
    if (w) name += "_w" + format_double(*w);
    if (sigma2) name += "_s" + format_double(*sigma2);
    name += "_r" + std::to_string(r) + ".csv";
    return name;
}

bool wants_samples(const ExperimentConfig& cfg, std::size_t r) {
    return cfg.write_samples && !cfg.output_dir.empty() && r < cfg.sample_replications;
}

void write_samples_file(const ExperimentConfig& cfg, const std::string& name, const Trace& trace) {
    std::ofstream out(cfg.output_dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (cfg.output_dir / name).string());
    write_trace_csv(out, trace);
    if (!out) throw Error("write failed for " + (cfg.output_dir / name).string());
}

void prepare_output_dir(const ExperimentConfig& cfg) {
    if (cfg.output_dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw Error("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
}

// Standard rows for a finished chain. A chain without movement gets
// ess = 0 plus a degenerate_chain flag.
std::optional<PosteriorSummary> chain_rows(std::vector<ResultRow>& rows, const ResultRow& base,
                                           const Trace& trace) {
    const std::uint64_t calls = trace.simulator_calls;
    std::optional<PosteriorSummary> summary;
    add_row(rows, base, "acceptance_rate", trace.acceptance_rate, calls);
    try {
        summary = posterior_summary(trace);
        add_row(rows, base, "posterior_mean", summary->mean, calls);
        add_row(rows, base, "posterior_variance", summary->variance, calls);
        add_row(rows, base, "ess", summary->ess, calls);
    } catch (const DegenerateChain&) {
        if (!trace.thetas.empty()) add_row(rows, base, "posterior_mean", trace.thetas.back(), calls);
        add_row(rows, base, "ess", 0.0, calls);
        add_row(rows, base, "degenerate_chain", 1.0, calls);
    }
    if (trace.status == TraceStatus::BudgetExhausted) add_row(rows, base, "budget_exhausted", 1.0, calls);
    return summary;
}

// Percentile bootstrap interval for the standard deviation of a chain,
// resampling a thinned copy whose spacing follows the chain's ESS.
std::pair<double, double> bootstrap_sd_interval(std::span<const double> chain, double ess, RngStream rng,
                                                std::size_t resamples = 400) {
    const std::size_t step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(static_cast<double>(chain.size()) / std::max(ess, 1.0))));
    std::vector<double> thin;
    for (std::size_t k = 0; k < chain.size(); k += step) thin.push_back(chain[k]);
    if (thin.size() < 2) return {0.0, std::numeric_limits<double>::infinity()};
    std::vector<double> sds(resamples), draw(thin.size());
    for (auto& sd : sds) {
        for (auto& v : draw) v = thin[static_cast<std::size_t>(rng.uniform() * static_cast<double>(thin.size()))];
        sd = std::sqrt(sample_variance(draw));
    }
    std::sort(sds.begin(), sds.end());
    const auto at = [&](double q) { return sds[static_cast<std::size_t>(q * static_cast<double>(resamples - 1))]; };
    return {at(0.025), at(0.975)};
}

// ---------------------------------------------------------------------------
// Row lookup helpers

std::optional<double> row_value(const std::vector<ResultRow>& rows, std::string_view statistic) {
    for (const auto& r : rows)
        if (r.statistic == statistic) return r.value;
    return std::nullopt;
}

struct RowQuery {
    std::string method;
    std::optional<std::size_t> particles;
    std::optional<double> weight;
    std::optional<double> sigma2;
    std::optional<std::uint64_t> seed;
    std::string statistic;
};

std::vector<const ResultRow*> select(const std::vector<ResultRow>& rows, const RowQuery& q) {
    std::vector<const ResultRow*> out;
    for (const auto& r : rows) {
        if (r.method != q.method || r.statistic != q.statistic) continue;
        if (q.particles && r.particles != q.particles) continue;
        if (q.weight && r.weight != q.weight) continue;
        if (q.sigma2 && r.sigma2 != q.sigma2) continue;
        if (q.seed && r.seed != *q.seed) continue;
        out.push_back(&r);
    }
    return out;
}

std::optional<double> mean_of(const std::vector<const ResultRow*>& rows) {
    if (rows.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto* r : rows) s += r->value;
    return s / static_cast<double>(rows.size());
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Names and configuration

ExperimentKind parse_experiment(std::string_view name) {
    std::string n = lower(trim(name));
    std::replace(n.begin(), n.end(), '_', '-');
    if (n == "weight-sweep") return ExperimentKind::WeightSweep;
    if (n == "ess-vs-particles") return ExperimentKind::EssVsParticles;
    if (n == "misspec-sweep") return ExperimentKind::MisspecSweep;
    if (n == "posterior-compare") return ExperimentKind::PosteriorCompare;
    if (n == "budget-comparison") return ExperimentKind::BudgetComparison;
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::string experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::WeightSweep: return "weight-sweep";
        case ExperimentKind::EssVsParticles: return "ess-vs-particles";
        case ExperimentKind::MisspecSweep: return "misspec-sweep";
        case ExperimentKind::PosteriorCompare: return "posterior-compare";
        case ExperimentKind::BudgetComparison: return "budget-comparison";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    try {
        model.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    if (iterations < 2) throw ConfigError("iterations must be at least 2");
    if (proposal_std && !(*proposal_std > 0.0)) throw ConfigError("proposal_std must be positive");
    if (burn_in && *burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
    if (budget && *budget == 0) throw ConfigError("budget must be positive");
    if (!(bandwidth > 0.0) || !(threshold > 0.0)) throw ConfigError("bandwidth and threshold must be positive");
    if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
    for (const auto& [kind, w] : weights)
        if (!(w > 0.0)) throw ConfigError("weight for " + loss_kind_name(kind) + " must be positive");
    for (const auto& [kind, grid] : calibration_grid)
        for (double w : grid)
            if (!(w > 0.0)) throw ConfigError("calibration grid for " + loss_kind_name(kind) + " must be positive");
    if (particles == 0 || abc_particles == 0) throw ConfigError("particle counts must be positive");
    if (replications == 0) throw ConfigError("replications must be at least 1");
    if (workers == 0) throw ConfigError("workers must be at least 1");
    if (calibration_iterations < 20) throw ConfigError("calibration_iterations too small");
    if (reference_draws < 2) throw ConfigError("reference_draws must be at least 2");
    if (!(target_acceptance > 0.05 && target_acceptance < 0.95))
        throw ConfigError("target_acceptance must lie in (0.05, 0.95)");
    if (!(ks_level > 0.0 && ks_level < 1.0)) throw ConfigError("ks_level must lie in (0, 1)");
    switch (experiment) {
        case ExperimentKind::WeightSweep:
            if (weight_grid.empty()) throw ConfigError("weight-sweep needs a non-empty weight_grid");
            if (losses.empty()) throw ConfigError("weight-sweep needs at least one loss");
            for (double w : weight_grid)
                if (!(w > 0.0)) throw ConfigError("weight_grid entries must be positive");
            break;
        case ExperimentKind::EssVsParticles:
            if (particle_grid.empty()) throw ConfigError("ess-vs-particles needs a non-empty particle_grid");
            if (losses.empty()) throw ConfigError("ess-vs-particles needs at least one loss");
            if (!budget) throw ConfigError("ess-vs-particles needs a budget");
            for (auto m : particle_grid)
                if (m == 0) throw ConfigError("particle_grid entries must be positive");
            break;
        case ExperimentKind::MisspecSweep:
            if (sigma2_grid.empty()) throw ConfigError("misspec-sweep needs a non-empty sigma2_grid");
            if (methods.empty()) throw ConfigError("misspec-sweep needs at least one method");
            for (double s : sigma2_grid)
                if (!(s > 0.0)) throw ConfigError("sigma2_grid entries must be positive");
            break;
        case ExperimentKind::PosteriorCompare:
            if (iterations - (burn_in ? *burn_in : iterations / 10) < ks_subsample)
                throw ConfigError("posterior-compare chains are shorter than ks_subsample");
            break;
        case ExperimentKind::BudgetComparison:
            if (!budget || *budget < 10 * model.n_obs)
                throw ConfigError("budget-comparison needs budget >= 10 * n_obs");
            break;
    }
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output_dir = env;
    c.calibration_grid[LossKind::SoftThreshold] = {20, 25, 30, 35, 40, 45, 50, 55, 60, 70, 80, 90, 100};
    c.calibration_grid[LossKind::Mmd] = {150, 200, 250, 300, 350, 400, 450, 500, 550, 600};
    c.calibration_grid[LossKind::Wasserstein] = {15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
    c.calibration_particles[LossKind::SoftThreshold] = 15;
    c.calibration_particles[LossKind::Mmd] = 1;
    c.calibration_particles[LossKind::Wasserstein] = 1;
    switch (kind) {
        case ExperimentKind::WeightSweep:
            c.losses = {LossKind::SoftThreshold, LossKind::Wasserstein};
            c.weight_grid = {0.1, 0.5, 1, 2, 10};
            c.iterations = 50000;
            c.write_samples = true;
            break;
        case ExperimentKind::EssVsParticles:
            c.losses = {LossKind::SoftThreshold, LossKind::Mmd, LossKind::Wasserstein};
            c.particle_grid = {1, 2, 4, 8, 15, 16, 25, 32, 64};
            c.budget = 3000000;
            break;
        case ExperimentKind::MisspecSweep:
            c.sigma2_grid = {0.25, 0.5, 1, 2, 4, 8, 16};
            c.methods = {{LossKind::SoftThreshold, 2}, {LossKind::SoftThreshold, 64},
                         {LossKind::Mmd, 1}, {LossKind::Wasserstein, 1}};
            c.iterations = 1000000;
            break;
        case ExperimentKind::PosteriorCompare:
            c.iterations = 1000000;
            c.write_samples = true;
            break;
        case ExperimentKind::BudgetComparison:
            c.budget = 1500000;
            break;
    }
    return c;
}

void apply_setting(ExperimentConfig& cfg, std::string_view raw_key, std::string_view raw_value) {
    const std::string key = lower(trim(raw_key));
    const std::string value = trim(raw_value);
    const std::string lv = lower(value);
    auto& m = cfg.model;
    auto positive_count = [&](std::string_view k) {
        const auto v = parse_count(k, value);
        if (v == 0) throw ConfigError("config key '" + std::string(k) + "' must be positive");
        return static_cast<std::size_t>(v);
    };

    if (key == "sim_var") m.sim_var = parse_double(key, value);
    else if (key == "true_var") m.true_var = parse_double(key, value);
    else if (key == "error_var") m.error_var = parse_double(key, value);
    else if (key == "prior_mean") m.prior_mean = parse_double(key, value);
    else if (key == "prior_var") m.prior_var = parse_double(key, value);
    else if (key == "theta_star") m.theta_star = parse_double(key, value);
    else if (key == "n_obs") m.n_obs = positive_count(key);
    else if (key == "iterations") cfg.iterations = positive_count(key);
    else if (key == "proposal_std") {
        if (lv == "auto") cfg.proposal_std.reset();
        else cfg.proposal_std = parse_double(key, value);
    } else if (key == "init_theta") {
        if (lv == "prior-draw" || lv == "prior") cfg.init_theta.reset();
        else cfg.init_theta = parse_double(key, value);
    } else if (key == "burn_in") {
        if (lv == "auto") cfg.burn_in.reset();
        else cfg.burn_in = parse_count(key, value);
    } else if (key == "seed") cfg.seed = parse_count(key, value);
    else if (key == "budget") {
        if (lv == "none") cfg.budget.reset();
        else cfg.budget = parse_count(key, value);
    } else if (key == "losses") {
        cfg.losses.clear();
        for (const auto& item : split_list(value)) cfg.losses.push_back(parse_loss_key(key, item));
    } else if (key.rfind("weight_", 0) == 0 && key != "weight_grid") {
        const LossKind kind = parse_loss_key(key, key.substr(7));
        if (lv == "calibrate") cfg.weights.erase(kind);
        else cfg.weights[kind] = parse_double(key, value);
    } else if (key == "bandwidth" || key == "h") cfg.bandwidth = parse_double(key, value);
    else if (key == "threshold" || key == "eps") cfg.threshold = parse_double(key, value);
    else if (key == "gamma") {
        if (lv == "median") cfg.gamma.reset();
        else cfg.gamma = parse_double(key, value);
    } else if (key == "particles") cfg.particles = positive_count(key);
    else if (key == "abc_particles") cfg.abc_particles = positive_count(key);
    else if (key == "weight_grid") cfg.weight_grid = parse_double_list(key, value);
    else if (key == "particle_grid") {
        cfg.particle_grid.clear();
        for (const auto& item : split_list(value)) cfg.particle_grid.push_back(parse_count(key, item));
    } else if (key == "sigma2_grid") cfg.sigma2_grid = parse_double_list(key, value);
    else if (key == "methods") {
        cfg.methods.clear();
        for (const auto& item : split_list(value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw ConfigError("config key 'methods': expected loss:M entries, got '" + item + "'");
            MethodSpec spec;
            spec.kind = parse_loss_key(key, item.substr(0, colon));
            spec.particles = parse_count(key, item.substr(colon + 1));
            if (spec.particles == 0) throw ConfigError("config key 'methods': M must be positive");
            cfg.methods.push_back(spec);
        }
    } else if (key.rfind("calibration_grid_", 0) == 0) {
        cfg.calibration_grid[parse_loss_key(key, key.substr(17))] = parse_double_list(key, value);
    } else if (key.rfind("calibration_particles_", 0) == 0) {
        cfg.calibration_particles[parse_loss_key(key, key.substr(22))] = positive_count(key);
    } else if (key == "calibration_iterations") cfg.calibration_iterations = positive_count(key);
    else if (key == "calibration_align") cfg.calibration_align = parse_bool(key, value);
    else if (key == "reference_draws") cfg.reference_draws = positive_count(key);
    else if (key == "target_acceptance") cfg.target_acceptance = parse_double(key, value);
    else if (key == "acceptance_tolerance") cfg.acceptance_tolerance = parse_double(key, value);
    else if (key == "pilot_iterations") cfg.pilot_iterations = positive_count(key);
    else if (key == "ks_subsample") cfg.ks_subsample = positive_count(key);
    else if (key == "ks_level") cfg.ks_level = parse_double(key, value);
    else if (key == "replications") cfg.replications = positive_count(key);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "workers") cfg.workers = positive_count(key);
    else if (key == "write_samples") cfg.write_samples = parse_bool(key, value);
    else if (key == "sample_replications") cfg.sample_replications = parse_count(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig load_config(ExperimentKind kind, const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg = default_config(kind);
    if (path) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(path->string(), tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("cannot read config: ") + e.what());
        }
        const std::string own = experiment_name(kind);
        auto section_name = [](std::string s) {
            s = lower(s);
            std::replace(s.begin(), s.end(), '_', '-');
            return s;
        };
        // Global keys first, then the experiment's own section.
        for (const auto& [key, node] : tree)
            if (node.empty()) apply_setting(cfg, key, node.data());
        for (const auto& [key, node] : tree)
            if (!node.empty() && section_name(key) == "general")
                for (const auto& [k, v] : node) apply_setting(cfg, k, v.data());
        for (const auto& [key, node] : tree)
            if (!node.empty() && section_name(key) == own)
                for (const auto& [k, v] : node) apply_setting(cfg, k, v.data());
    }
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
    cfg.validate();
    return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    const auto& m = cfg.model;
    auto count = [](auto v) { return std::to_string(v); };
    os << "[" << experiment_name(cfg.experiment) << "]\n";
    os << "sim_var = " << format_double(m.sim_var) << "\n";
    os << "true_var = " << format_double(m.true_var) << "\n";
    os << "error_var = " << format_double(m.error_var) << "\n";
    os << "prior_mean = " << format_double(m.prior_mean) << "\n";
    os << "prior_var = " << format_double(m.prior_var) << "\n";
    os << "theta_star = " << format_double(m.theta_star) << "\n";
    os << "n_obs = " << m.n_obs << "\n";
    os << "iterations = " << cfg.iterations << "\n";
    os << "proposal_std = " << (cfg.proposal_std ? format_double(*cfg.proposal_std) : "auto") << "\n";
    os << "init_theta = " << (cfg.init_theta ? format_double(*cfg.init_theta) : "prior-draw") << "\n";
    os << "burn_in = " << (cfg.burn_in ? count(*cfg.burn_in) : "auto") << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "budget = " << (cfg.budget ? count(*cfg.budget) : "none") << "\n";
    os << "losses = " << join(cfg.losses, loss_kind_name) << "\n";
    for (LossKind k : kAllLosses) {
        const auto it = cfg.weights.find(k);
        os << "weight_" << loss_kind_name(k) << " = "
           << (it == cfg.weights.end() ? "calibrate" : format_double(it->second)) << "\n";
    }
    os << "bandwidth = " << format_double(cfg.bandwidth) << "\n";
    os << "threshold = " << format_double(cfg.threshold) << "\n";
    os << "gamma = " << (cfg.gamma ? format_double(*cfg.gamma) : "median") << "\n";
    os << "particles = " << cfg.particles << "\n";
    os << "abc_particles = " << cfg.abc_particles << "\n";
    os << "weight_grid = " << join(cfg.weight_grid, format_double) << "\n";
    os << "particle_grid = " << join(cfg.particle_grid, count) << "\n";
    os << "sigma2_grid = " << join(cfg.sigma2_grid, format_double) << "\n";
    os << "methods = "
       << join(cfg.methods, [](const MethodSpec& s) { return loss_kind_name(s.kind) + ":" + std::to_string(s.particles); })
       << "\n";
    for (const auto& [k, grid] : cfg.calibration_grid)
        os << "calibration_grid_" << loss_kind_name(k) << " = " << join(grid, format_double) << "\n";
    for (const auto& [k, M] : cfg.calibration_particles)
        os << "calibration_particles_" << loss_kind_name(k) << " = " << M << "\n";
    os << "calibration_iterations = " << cfg.calibration_iterations << "\n";
    os << "calibration_align = " << (cfg.calibration_align ? "true" : "false") << "\n";
    os << "reference_draws = " << cfg.reference_draws << "\n";
    os << "target_acceptance = " << format_double(cfg.target_acceptance) << "\n";
    os << "acceptance_tolerance = " << format_double(cfg.acceptance_tolerance) << "\n";
    os << "pilot_iterations = " << cfg.pilot_iterations << "\n";
    os << "ks_subsample = " << cfg.ks_subsample << "\n";
    os << "ks_level = " << format_double(cfg.ks_level) << "\n";
    os << "replications = " << cfg.replications << "\n";
    os << "output_dir = " << cfg.output_dir.string() << "\n";
    os << "workers = " << cfg.workers << "\n";
    os << "write_samples = " << (cfg.write_samples ? "true" : "false") << "\n";
    os << "sample_replications = " << cfg.sample_replications << "\n";
    return os.str();
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    std::string out(kResultsHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.experiment;
        out += ',';
        out += r.method;
        out += ',';
        if (r.particles) out += std::to_string(*r.particles);
        out += ',';
        if (r.weight) out += format_double(*r.weight);
        out += ',';
        if (r.sigma2) out += format_double(*r.sigma2);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += r.statistic;
        out += ',';
        out += format_double(r.value);
        out += ',';
        out += std::to_string(r.simulator_calls);
        out += '\n';
    }
    os << out;
}

// ---------------------------------------------------------------------------
// Experiments

ExperimentResult run_weight_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    const Replication rep = make_replication(cfg, cfg.seed, cfg.model.true_var);
    struct Cell { std::size_t loss, weight, r; };
    std::vector<Cell> cells;
    for (std::size_t l = 0; l < cfg.losses.size(); ++l)
        for (std::size_t w = 0; w < cfg.weight_grid.size(); ++w)
            for (std::size_t r = 0; r < cfg.replications; ++r) cells.push_back({l, w, r});

    std::vector<std::vector<ResultRow>> out(cells.size());
    std::vector<std::string> files(cells.size());
    for_each_cell(cells.size(), cfg.workers, [&](std::size_t i) {
        const Cell& c = cells[i];
        const LossKind kind = cfg.losses[c.loss];
        const double w = cfg.weight_grid[c.weight];
        const std::uint64_t seed = cfg.seed + c.r;
        const std::string label = loss_method_label(kind);
        MCMCConfig chain = chain_config(cfg, rep, cfg.iterations);
        chain.seed = seed;
        const RngStream rng = RngStream(seed, kChainStream).split(loss_index(kind)).split(c.weight);
        const Trace trace = gbi_abc_mcmc(chain, loss_spec(cfg, kind, cfg.particles, w), cfg.model, rep.y, rng);
        const ResultRow base = base_row(cfg, label, cfg.particles, w, cfg.model.true_var, seed);
        if (const auto summary = chain_rows(out[i], base, trace)) {
            const auto [lo, hi] = bootstrap_sd_interval(trace.thetas, summary->ess, rng.split(kCheckStream));
            add_row(out[i], base, "posterior_sd_ci_low", lo, trace.simulator_calls);
            add_row(out[i], base, "posterior_sd_ci_high", hi, trace.simulator_calls);
        }
        if (wants_samples(cfg, c.r)) {
            files[i] = cell_file(cfg, label, cfg.particles, w, std::nullopt, c.r);
            write_samples_file(cfg, files[i], trace);
        }
    });

    ExperimentResult result;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.rows.insert(result.rows.end(), out[i].begin(), out[i].end());
        if (!files[i].empty()) result.sample_files.push_back(files[i]);
    }
    return result;
}

ExperimentResult run_ess_vs_particles(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    const Replication rep = make_replication(cfg, cfg.seed, cfg.model.true_var);
    ExperimentResult result;

    // Weights are set once on the baseline observations and held across M.
    std::vector<double> weights(cfg.losses.size());
    std::vector<std::vector<ResultRow>> calib_rows(cfg.losses.size());
    for_each_cell(cfg.losses.size(), cfg.workers, [&](std::size_t l) {
        weights[l] = resolve_weight(cfg, cfg.losses[l], rep, cfg.model.true_var, calib_rows[l]);
    });
    for (const auto& rows : calib_rows) result.rows.insert(result.rows.end(), rows.begin(), rows.end());

    struct Cell { std::size_t loss, m, r; };
    std::vector<Cell> cells;
    for (std::size_t l = 0; l < cfg.losses.size(); ++l)
        for (std::size_t m = 0; m < cfg.particle_grid.size(); ++m)
            for (std::size_t r = 0; r < cfg.replications; ++r) cells.push_back({l, m, r});

    std::vector<std::vector<ResultRow>> out(cells.size());
    std::vector<std::string> files(cells.size());
    const std::uint64_t budget = *cfg.budget;
    for_each_cell(cells.size(), cfg.workers, [&](std::size_t i) {
        const Cell& c = cells[i];
        const LossKind kind = cfg.losses[c.loss];
        const std::size_t M = cfg.particle_grid[c.m];
        const std::uint64_t seed = cfg.seed + c.r;
        const std::string label = loss_method_label(kind);
        const ResultRow base = base_row(cfg, label, M, weights[c.loss], cfg.model.true_var, seed);
        // The initial state is paid from the same budget.
        const std::uint64_t steps = budget / M;
        if (steps < 21) {
            add_row(out[i], base, "skipped_budget_too_small", 1.0, 0);
            return;
        }
        MCMCConfig chain = chain_config(cfg, rep, steps - 1);
        chain.seed = seed;
        chain.burn_in.reset();
        chain.budget = budget;
        const RngStream rng = RngStream(seed, kChainStream).split(loss_index(kind)).split(M);
        const Trace trace = gbi_abc_mcmc(chain, loss_spec(cfg, kind, M, weights[c.loss]), cfg.model, rep.y, rng);
        chain_rows(out[i], base, trace);
        if (wants_samples(cfg, c.r)) {
            files[i] = cell_file(cfg, label, M, weights[c.loss], std::nullopt, c.r);
            write_samples_file(cfg, files[i], trace);
        }
    });
    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.rows.insert(result.rows.end(), out[i].begin(), out[i].end());
        if (!files[i].empty()) result.sample_files.push_back(files[i]);
    }
    return result;
}

ExperimentResult run_misspec_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    ExperimentResult result;

    // Distinct losses among the methods, each calibrated once per replication
    // on the sigma2 = true_var member of that replication's observation family.
    std::vector<LossKind> kinds;
    for (const auto& m : cfg.methods)
        if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end()) kinds.push_back(m.kind);

    std::vector<std::vector<double>> weights(cfg.replications, std::vector<double>(kinds.size()));
    std::vector<std::vector<ResultRow>> calib_rows(cfg.replications * kinds.size());
    for_each_cell(calib_rows.size(), cfg.workers, [&](std::size_t i) {
        const std::size_t r = i / kinds.size(), k = i % kinds.size();
        const Replication rep = make_replication(cfg, cfg.seed + r, cfg.model.true_var);
        weights[r][k] = resolve_weight(cfg, kinds[k], rep, cfg.model.true_var, calib_rows[i]);
    });
    for (const auto& rows : calib_rows) result.rows.insert(result.rows.end(), rows.begin(), rows.end());

    struct Cell { std::size_t method, s, r; };
    std::vector<Cell> cells;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
        for (std::size_t s = 0; s < cfg.sigma2_grid.size(); ++s)
            for (std::size_t r = 0; r < cfg.replications; ++r) cells.push_back({m, s, r});

    std::vector<std::vector<ResultRow>> out(cells.size());
    std::vector<std::string> files(cells.size());
    for_each_cell(cells.size(), cfg.workers, [&](std::size_t i) {
        const Cell& c = cells[i];
        const MethodSpec& method = cfg.methods[c.method];
        const double sigma2 = cfg.sigma2_grid[c.s];
        const std::uint64_t seed = cfg.seed + c.r;
        const std::size_t k = static_cast<std::size_t>(
            std::find(kinds.begin(), kinds.end(), method.kind) - kinds.begin());
        const double w = weights[c.r][k];
        const Replication rep = make_replication(cfg, seed, sigma2);
        const std::string label = loss_method_label(method.kind);
        MCMCConfig chain = chain_config(cfg, rep, cfg.iterations);
        const RngStream rng =
            RngStream(seed, kChainStream).split(loss_index(method.kind)).split(method.particles).split(c.s);
        const Trace trace = gbi_abc_mcmc(chain, loss_spec(cfg, method.kind, method.particles, w), cfg.model,
                                         rep.y, rng);
        const ResultRow base = base_row(cfg, label, method.particles, w, sigma2, seed);
        chain_rows(out[i], base, trace);
        if (const auto m = row_value(out[i], "posterior_mean"))
            add_row(out[i], base, "abs_error", std::fabs(*m - cfg.model.theta_star), trace.simulator_calls);
        if (wants_samples(cfg, c.r)) {
            files[i] = cell_file(cfg, label, method.particles, w, sigma2, c.r);
            write_samples_file(cfg, files[i], trace);
        }
    });
    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.rows.insert(result.rows.end(), out[i].begin(), out[i].end());
        if (!files[i].empty()) result.sample_files.push_back(files[i]);
    }
    return result;
}

namespace {

struct TunedPm {
    TuneResult tune;
    std::vector<ResultRow> rows;
};

// Pilot tuning of the pseudo-marginal chain: particle count first, then the
// proposal scale, toward the target acceptance rate.
TunedPm tune_pseudo_marginal(const ExperimentConfig& cfg, const Replication& rep, std::optional<double> sigma2) {
    const MCMCConfig base = chain_config(cfg, rep, cfg.pilot_iterations);
    const GaussianLocationModel& model = cfg.model;
    const Dataset& y = rep.y;
    ChainRunner runner = [&model, &y](const MCMCConfig& c, std::size_t M) {
        return pseudo_marginal_mcmc(c, model, y, M, RngStream(c.seed, kPilotStream));
    };
    TuneOptions options;
    options.target_rate = cfg.target_acceptance;
    options.tolerance = cfg.acceptance_tolerance;
    options.pilot_iterations = cfg.pilot_iterations;
    options.tune_particles = true;
    options.tune_proposal = true;
    options.particles = 1;
    TunedPm out;
    out.tune = tune_acceptance(base, runner, options);
    const ResultRow row = base_row(cfg, "PM", out.tune.particles, std::nullopt, sigma2, rep.seed);
    add_row(out.rows, row, "tuned_particles", static_cast<double>(out.tune.particles), out.tune.pilot_calls);
    add_row(out.rows, row, "tuned_proposal_std", out.tune.config.proposal_std, out.tune.pilot_calls);
    add_row(out.rows, row, "pilot_acceptance", out.tune.pilot_acceptance, out.tune.pilot_calls);
    return out;
}

}  // namespace

ExperimentResult run_posterior_compare(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    std::vector<std::vector<ResultRow>> out(cfg.replications);
    std::vector<std::vector<std::string>> files(cfg.replications);
    KsProtocolOptions ks;
    ks.subsample = cfg.ks_subsample;
    ks.level = cfg.ks_level;

    for_each_cell(cfg.replications, cfg.workers, [&](std::size_t r) {
        auto& rows = out[r];
        const double sigma2 = cfg.model.true_var;
        const Replication rep = make_replication(cfg, cfg.seed + r, sigma2);
        const ResultRow analytic = base_row(cfg, "analytic", std::nullopt, std::nullopt, sigma2, rep.seed);
        add_row(rows, analytic, "posterior_mean", rep.posterior.mean, 0);
        add_row(rows, analytic, "posterior_variance", rep.posterior.variance, 0);
        add_row(rows, analytic, "observation_mean", mean(rep.y), 0);
        const auto reference = reference_draws(cfg, rep, 1);
        RngStream ks_rng(rep.seed, kCheckStream);

        auto verify = [&](const ResultRow& base, const Trace& trace) {
            chain_rows(rows, base, trace);
            const KsCheck check = ks_verification_protocol(trace.thetas, reference, ks_rng, ks);
            add_row(rows, base, "ks_statistic", check.statistic, trace.simulator_calls);
            add_row(rows, base, "ks_pvalue", check.pvalue, trace.simulator_calls);
            add_row(rows, base, "ks_pass", check.passed ? 1.0 : 0.0, trace.simulator_calls);
        };

        const TunedPm pm = tune_pseudo_marginal(cfg, rep, sigma2);
        rows.insert(rows.end(), pm.rows.begin(), pm.rows.end());
        MCMCConfig pm_chain = pm.tune.config;
        pm_chain.iterations = cfg.iterations;
        pm_chain.burn_in = cfg.burn_in;
        pm_chain.seed = rep.seed;
        const Trace pm_trace = pseudo_marginal_mcmc(pm_chain, cfg.model, rep.y, pm.tune.particles,
                                                    RngStream(rep.seed, kChainStream).split(100));
        verify(base_row(cfg, "PM", pm.tune.particles, std::nullopt, sigma2, rep.seed), pm_trace);
        if (wants_samples(cfg, r)) {
            files[r].push_back(cell_file(cfg, "PM", pm.tune.particles, std::nullopt, std::nullopt, r));
            write_samples_file(cfg, files[r].back(), pm_trace);
        }

        const LossKind kind = LossKind::SoftThreshold;
        const double w = resolve_weight(cfg, kind, rep, sigma2, rows);
        const Trace st_trace = gbi_abc_mcmc(chain_config(cfg, rep, cfg.iterations),
                                            loss_spec(cfg, kind, cfg.abc_particles, w), cfg.model, rep.y,
                                            RngStream(rep.seed, kChainStream).split(loss_index(kind)));
        verify(base_row(cfg, "ST", cfg.abc_particles, w, sigma2, rep.seed), st_trace);
        if (wants_samples(cfg, r)) {
            files[r].push_back(cell_file(cfg, "ST", cfg.abc_particles, w, std::nullopt, r));
            write_samples_file(cfg, files[r].back(), st_trace);
        }
    });
    ExperimentResult result;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        result.rows.insert(result.rows.end(), out[r].begin(), out[r].end());
        result.sample_files.insert(result.sample_files.end(), files[r].begin(), files[r].end());
    }
    return result;
}

ExperimentResult run_budget_comparison(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    const std::uint64_t budget = *cfg.budget;
    std::vector<std::vector<ResultRow>> out(cfg.replications);
    std::vector<std::vector<std::string>> files(cfg.replications);

    for_each_cell(cfg.replications, cfg.workers, [&](std::size_t r) {
        auto& rows = out[r];
        const double sigma2 = cfg.model.true_var;
        const Replication rep = make_replication(cfg, cfg.seed + r, sigma2);

        auto budget_chain = [&](MCMCConfig c, std::size_t M) {
            const std::uint64_t steps = budget / M;
            if (steps < 21) throw Error("budget too small for " + std::to_string(M) + " particles");
            c.iterations = steps - 1;
            c.burn_in = cfg.burn_in;
            if (c.burn_in && *c.burn_in >= c.iterations) c.burn_in.reset();
            c.seed = rep.seed;
            c.budget = budget;
            return c;
        };

        const TunedPm pm = tune_pseudo_marginal(cfg, rep, sigma2);
        rows.insert(rows.end(), pm.rows.begin(), pm.rows.end());
        const std::size_t pm_M = pm.tune.particles;
        const Trace pm_trace = pseudo_marginal_mcmc(budget_chain(pm.tune.config, pm_M), cfg.model, rep.y, pm_M,
                                                    RngStream(rep.seed, kChainStream).split(100));
        std::vector<ResultRow> pm_rows;
        chain_rows(pm_rows, base_row(cfg, "PM", pm_M, std::nullopt, sigma2, rep.seed), pm_trace);

        const LossKind kind = LossKind::SoftThreshold;
        const double w = resolve_weight(cfg, kind, rep, sigma2, rows);
        const std::size_t M = cfg.abc_particles;
        const Trace st_trace =
            gbi_abc_mcmc(budget_chain(chain_config(cfg, rep, 2), M), loss_spec(cfg, kind, M, w), cfg.model, rep.y,
                         RngStream(rep.seed, kChainStream).split(loss_index(kind)));
        std::vector<ResultRow> st_rows;
        chain_rows(st_rows, base_row(cfg, "ST", M, w, sigma2, rep.seed), st_trace);

        rows.insert(rows.end(), pm_rows.begin(), pm_rows.end());
        rows.insert(rows.end(), st_rows.begin(), st_rows.end());
        const double pm_ess = row_value(pm_rows, "ess").value_or(0.0);
        const double st_ess = row_value(st_rows, "ess").value_or(0.0);
        add_row(rows, base_row(cfg, "ST/PM", std::nullopt, std::nullopt, sigma2, rep.seed), "ess_ratio",
                pm_ess > 0.0 ? st_ess / pm_ess : std::numeric_limits<double>::infinity(),
                pm_trace.simulator_calls + st_trace.simulator_calls);

        if (wants_samples(cfg, r)) {
            files[r].push_back(cell_file(cfg, "PM", pm_M, std::nullopt, std::nullopt, r));
            write_samples_file(cfg, files[r].back(), pm_trace);
            files[r].push_back(cell_file(cfg, "ST", M, w, std::nullopt, r));
            write_samples_file(cfg, files[r].back(), st_trace);
        }
    });
    ExperimentResult result;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        result.rows.insert(result.rows.end(), out[r].begin(), out[r].end());
        result.sample_files.insert(result.sample_files.end(), files[r].begin(), files[r].end());
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);
    ExperimentResult result;
    switch (cfg.experiment) {
        case ExperimentKind::WeightSweep: result = run_weight_sweep(cfg); break;
        case ExperimentKind::EssVsParticles: result = run_ess_vs_particles(cfg); break;
        case ExperimentKind::MisspecSweep: result = run_misspec_sweep(cfg); break;
        case ExperimentKind::PosteriorCompare: result = run_posterior_compare(cfg); break;
        case ExperimentKind::BudgetComparison: result = run_budget_comparison(cfg); break;
    }
    if (!cfg.output_dir.empty()) {
        std::ofstream csv(cfg.output_dir / "results.csv", std::ios::binary);
        write_results_csv(csv, result.rows);
        std::ofstream ini(cfg.output_dir / "config.ini", std::ios::binary);
        ini << render_config(cfg);
        if (!csv || !ini) throw Error("cannot write results into " + cfg.output_dir.string());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checks

namespace {

std::vector<CheckOutcome> check_weight_sweep(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::vector<CheckOutcome> out;
    std::vector<double> grid = cfg.weight_grid;
    std::sort(grid.begin(), grid.end());
    for (LossKind kind : cfg.losses) {
        if (kind != LossKind::SoftThreshold) continue;
        CheckOutcome c{"st-sd-decreasing-in-w", true, ""};
        for (std::size_t r = 0; r < cfg.replications; ++r) {
            const std::uint64_t seed = cfg.seed + r;
            for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
                const auto low = select(rows, {"ST", cfg.particles, grid[k], std::nullopt, seed, "posterior_sd_ci_low"});
                const auto high =
                    select(rows, {"ST", cfg.particles, grid[k + 1], std::nullopt, seed, "posterior_sd_ci_high"});
                if (low.empty() || high.empty() || !(high[0]->value < low[0]->value)) {
                    c.passed = false;
                    c.detail += "seed " + std::to_string(seed) + ": w=" + fmt(grid[k]) + " vs w=" + fmt(grid[k + 1]) +
                                " not separated; ";
                }
            }
        }
        if (c.passed) c.detail = "bootstrap intervals separated for every adjacent pair";
        out.push_back(c);
    }
    // A vanishing weight leaves the prior in place.
    if (!grid.empty() && grid.front() <= 0.01) {
        for (LossKind kind : cfg.losses) {
            const auto v = mean_of(select(rows, {loss_method_label(kind), cfg.particles, grid.front(), std::nullopt,
                                                 std::nullopt, "posterior_variance"}));
            const bool ok = v && std::fabs(*v / cfg.model.prior_var - 1.0) <= 0.15;
            out.push_back({"prior-limit-" + loss_kind_name(kind), ok,
                           "variance " + (v ? fmt(*v) : std::string("n/a")) + " vs prior " + fmt(cfg.model.prior_var)});
        }
    }
    return out;
}

std::vector<CheckOutcome> check_ess_vs_particles(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    auto mean_ess = [&](const std::string& label, std::size_t M) {
        return mean_of(select(rows, {label, M, std::nullopt, std::nullopt, std::nullopt, "ess"}));
    };
    auto has = [&](LossKind k) { return std::find(cfg.losses.begin(), cfg.losses.end(), k) != cfg.losses.end(); };
    auto in_grid = [&](std::size_t M) {
        return std::find(cfg.particle_grid.begin(), cfg.particle_grid.end(), M) != cfg.particle_grid.end();
    };
    std::vector<CheckOutcome> out;
    if (has(LossKind::SoftThreshold)) {
        std::size_t best_M = 0;
        double best = -1.0;
        std::string curve;
        for (std::size_t M : cfg.particle_grid) {
            const auto e = mean_ess("ST", M);
            curve += std::to_string(M) + ":" + (e ? fmt(*e) : std::string("-")) + " ";
            if (e && *e > best) {
                best = *e;
                best_M = M;
            }
        }
        out.push_back({"st-argmax-in-10-30", best_M >= 10 && best_M <= 30,
                       "argmax M = " + std::to_string(best_M) + "; mean ESS " + curve});
    }
    for (LossKind k : {LossKind::Mmd, LossKind::Wasserstein}) {
        if (!has(k) || !in_grid(1)) continue;
        const std::string label = loss_method_label(k);
        if (in_grid(16)) {
            const auto e1 = mean_ess(label, 1), e16 = mean_ess(label, 16);
            out.push_back({label + "-m1-beats-m16", e1 && e16 && *e1 > *e16,
                           "mean ESS M=1 " + fmt(e1.value_or(NAN)) + ", M=16 " + fmt(e16.value_or(NAN))});
        }
        if (has(LossKind::SoftThreshold)) {
            const auto e = mean_ess(label, 1), st = mean_ess("ST", 1);
            out.push_back({label + "-vs-st-at-m1", e && st && *e >= 2.0 * *st,
                           "mean ESS " + label + " " + fmt(e.value_or(NAN)) + ", ST " + fmt(st.value_or(NAN))});
        }
    }
    return out;
}

std::vector<CheckOutcome> check_misspec_sweep(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::vector<CheckOutcome> out;
    const std::optional<std::size_t> st_M = [&]() -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        for (const auto& m : cfg.methods)
            if (m.kind == LossKind::SoftThreshold && (!best || m.particles > *best)) best = m.particles;
        return best;
    }();
    if (!st_M) return out;
    for (const auto& m : cfg.methods) {
        if (m.kind == LossKind::SoftThreshold) continue;
        const std::string label = loss_method_label(m.kind);
        std::size_t wins = 0, total = 0;
        for (double s2 : cfg.sigma2_grid)
            for (std::size_t r = 0; r < cfg.replications; ++r) {
                const std::uint64_t seed = cfg.seed + r;
                const auto a = select(rows, {label, m.particles, std::nullopt, s2, seed, "abs_error"});
                const auto b = select(rows, {"ST", *st_M, std::nullopt, s2, seed, "abs_error"});
                ++total;
                if (!a.empty() && !b.empty() && a[0]->value <= b[0]->value) ++wins;
            }
        const double frac = total ? static_cast<double>(wins) / static_cast<double>(total) : 0.0;
        out.push_back({label + "-beats-st" + std::to_string(*st_M), frac >= 0.9,
                       std::to_string(wins) + "/" + std::to_string(total) + " cells with |mean - theta*| <= ST"});
    }
    return out;
}

std::vector<CheckOutcome> check_posterior_compare(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::vector<CheckOutcome> out;
    const auto needed = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(cfg.replications)));
    for (const std::string label : {"PM", "ST"}) {
        std::size_t passes = 0;
        const auto hits = select(rows, {label, std::nullopt, std::nullopt, std::nullopt, std::nullopt, "ks_pass"});
        for (const auto* r : hits) passes += r->value > 0.5 ? 1 : 0;
        out.push_back({label + "-ks-protocol", passes >= needed && hits.size() == cfg.replications,
                       std::to_string(passes) + "/" + std::to_string(hits.size()) + " observation sets pass"});
    }
    return out;
}

std::vector<CheckOutcome> check_budget_comparison(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::vector<double> pm, ratio;
    bool within_budget = true;
    for (const auto& r : rows) {
        if (r.method == "PM" && r.statistic == "ess") pm.push_back(r.value);
        if (r.method == "ST/PM" && r.statistic == "ess_ratio") ratio.push_back(r.value);
        if ((r.method == "PM" || r.method == "ST") && r.statistic == "ess" && r.simulator_calls > *cfg.budget)
            within_budget = false;
    }
    const double pm_med = median(pm), ratio_med = median(ratio);
    return {{"pm-ess-order", pm_med >= 1e3 && pm_med <= 1e4, "median PM ESS " + fmt(pm_med)},
            {"st-pm-ratio", ratio_med >= 2.0, "median ESS ratio " + fmt(ratio_med)},
            {"budget-respected", within_budget, within_budget ? "all chains within budget" : "budget exceeded"}};
}

}  // namespace

std::vector<CheckOutcome> check_experiment(const ExperimentConfig& cfg, const ExperimentResult& result) {
    switch (cfg.experiment) {
        case ExperimentKind::WeightSweep: return check_weight_sweep(cfg, result.rows);
        case ExperimentKind::EssVsParticles: return check_ess_vs_particles(cfg, result.rows);
        case ExperimentKind::MisspecSweep: return check_misspec_sweep(cfg, result.rows);
        case ExperimentKind::PosteriorCompare: return check_posterior_compare(cfg, result.rows);
        case ExperimentKind::BudgetComparison: return check_budget_comparison(cfg, result.rows);
    }
    return {};
}

}  // namespace gbi
