#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gbi/error.hpp"
#include "gbi/losses.hpp"
#include "gbi/simulator.hpp"

namespace gbi {

enum class ExperimentKind { WeightSweep, EssVsParticles, MisspecSweep, PosteriorCompare, BudgetComparison };

// CLI names: weight-sweep, ess-vs-particles, misspec-sweep, posterior-compare,
// budget-comparison. Underscores are accepted in place of dashes.
ExperimentKind parse_experiment(std::string_view name);
std::string experiment_name(ExperimentKind kind);

// One sampler configuration of a sweep: a loss at a fixed particle count.
struct MethodSpec {
    LossKind kind = LossKind::SoftThreshold;
    std::size_t particles = 1;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::WeightSweep;
    GaussianLocationModel model;

    // Sampler. Empty proposal_std: 2.38 times the analytic posterior sd of
    // the current observations. Empty init_theta: a prior draw.
    std::size_t iterations = 100000;
    std::optional<double> proposal_std;
    std::optional<double> init_theta;
    std::optional<std::size_t> burn_in;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> budget;

    // Losses. A missing weight is calibrated against the analytic posterior.
    std::vector<LossKind> losses;
    std::map<LossKind, double> weights;
    double bandwidth = 1.0;
    double threshold = 1.0;
    std::optional<double> gamma;
    std::size_t particles = 1;       // weight sweep
    std::size_t abc_particles = 15;  // ST-ABC in posterior-compare and budget-comparison

    std::vector<double> weight_grid;
    std::vector<std::size_t> particle_grid;
    std::vector<double> sigma2_grid;
    std::vector<MethodSpec> methods;  // misspec sweep

    // Weight calibration.
    std::map<LossKind, std::vector<double>> calibration_grid;
    std::map<LossKind, std::size_t> calibration_particles;
    std::size_t calibration_iterations = 100000;
    bool calibration_align = true;  // compare spread and shape only, see CalibrationOptions
    std::size_t reference_draws = 100000;

    // Pseudo-marginal pilot tuning.
    double target_acceptance = 0.25;
    double acceptance_tolerance = 0.05;
    std::size_t pilot_iterations = 5000;

    // KS verification.
    std::size_t ks_subsample = 150;
    double ks_level = 0.1;

    std::size_t replications = 5;
    std::filesystem::path output_dir = "gbi-output";
    std::size_t workers = 1;
    bool write_samples = false;
    std::size_t sample_replications = 1;  // sample files for replications [0, k)

    // Throws ConfigError when a required grid is empty or a value is invalid.
    void validate() const;
};

inline constexpr const char* kOutputDirEnv = "GBI_ABC_OUTPUT_DIR";

// Defaults for one experiment. output_dir comes from $GBI_ABC_OUTPUT_DIR when
// set, else ./gbi-output.
ExperimentConfig default_config(ExperimentKind kind);

// Sets one key (the spelling used in config files). Throws ConfigError on an
// unknown key or an unparsable value.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Flat INI text: keys at top level or under [general] apply to every
// experiment, keys under a section named after the experiment override them.
// Other sections are ignored. Overrides are applied last, in order.
ExperimentConfig load_config(ExperimentKind kind, const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Effective config in the same INI format, readable by load_config.
std::string render_config(const ExperimentConfig& cfg);

struct ResultRow {
    std::string experiment;
    std::string method;
    std::optional<std::size_t> particles;
    std::optional<double> weight;
    std::optional<double> sigma2;
    std::uint64_t seed = 0;
    std::string statistic;
    double value = 0.0;
    std::uint64_t simulator_calls = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> sample_files;  // names relative to output_dir
};

inline constexpr std::string_view kResultsHeader =
    "experiment,method,M,w,sigma2,seed,statistic_name,statistic_value,simulator_calls";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);

// Runs every cell on cfg.workers threads and writes results.csv, sample files
// and config.ini into cfg.output_dir (when non-empty). Output depends only on
// the config, not on the worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

ExperimentResult run_weight_sweep(const ExperimentConfig& cfg);
ExperimentResult run_ess_vs_particles(const ExperimentConfig& cfg);
ExperimentResult run_misspec_sweep(const ExperimentConfig& cfg);
ExperimentResult run_posterior_compare(const ExperimentConfig& cfg);
ExperimentResult run_budget_comparison(const ExperimentConfig& cfg);

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Expected qualitative behaviour of an experiment, evaluated on its rows.
std::vector<CheckOutcome> check_experiment(const ExperimentConfig& cfg, const ExperimentResult& result);

}  // namespace gbi
