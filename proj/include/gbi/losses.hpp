#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbi/kernels.hpp"
#include "gbi/stats.hpp"

namespace gbi {

enum class LossKind { SoftThreshold, GaussianKernel, HardThreshold, Mmd, Wasserstein };

// CLI spelling: st | gk | ht | mmd | w1 (k2 is accepted for mmd).
LossKind parse_loss_kind(std::string_view name);
std::string loss_kind_name(LossKind kind);
// Method label used in result tables: ST, GK, HT, K2, W1.
std::string loss_method_label(LossKind kind);

// Discrepancy choice plus the Gibbs weight w and particle count M.
struct LossSpec {
    LossKind kind = LossKind::SoftThreshold;
    double bandwidth = 1.0;        // h, GaussianKernel
    double threshold = 1.0;        // eps, HardThreshold
    std::optional<double> gamma;   // MMD kernel scale; empty = median heuristic on y
    double weight = 1.0;
    std::size_t particles = 1;

    // Throws InvalidParameter when any positivity constraint fails.
    void validate() const;
};

// Statistic-based losses. Stats are (mean, sample variance).
double soft_threshold_loss(const SummaryStats& y_stats, const SummaryStats& x_stats);
double gaussian_kernel_loss(const SummaryStats& y_stats, const SummaryStats& x_stats, double h);
// 0 inside the open eps-ball, +infinity on or outside it.
double hard_threshold_loss(const SummaryStats& y_stats, const SummaryStats& x_stats, double eps);

// Biased (V-statistic) squared MMD with k(a, b) = exp(-(a - b)^2 / (2 gamma^2)).
double mmd2_loss(std::span<const double> x, std::span<const double> y, double gamma);
double median_heuristic(std::span<const double> y);
// W1 between the two empirical distributions, exact for unequal sizes.
double wasserstein_loss(std::span<const double> x, std::span<const double> y);

// The base loss l~(y; .) with y fixed, prepared once per chain: observed
// statistics, sorted observations and kernel moments are cached. Evaluation
// is const and thread-safe.
class ParticleLoss {
public:
    virtual ~ParticleLoss() = default;
    virtual double operator()(std::span<const double> x) const = 0;
};

std::unique_ptr<ParticleLoss> prepare_loss(const LossSpec& spec, std::span<const double> y);

// Bandwidth an MMD loss prepared from (spec, y) will use.
double resolve_mmd_gamma(const LossSpec& spec, std::span<const double> y);

// Mean of the base loss over M datasets of size n stored row-major.
double averaged_loss(const ParticleLoss& loss, std::span<const double> particles, std::size_t n,
                     std::size_t M, kernels::Exec exec = kernels::Exec::Parallel);

// (1/M) sum_i l~(y; x_i). Throws InvalidParameter if particles.size() differs
// from spec.particles.
double averaged_loss(const LossSpec& spec, std::span<const double> y,
                     const std::vector<Dataset>& particles);

}  // namespace gbi
