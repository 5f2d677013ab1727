#include "gbi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "gbi/error.hpp"

namespace gbi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute truncation tolerance of the moment expansions, per kernel term.
constexpr double kExpansionTol = 1e-15;

double stats_distance_sq(const SummaryStats& a, const SummaryStats& b) {
    const double dm = a.mean - b.mean;
    const double dv = a.variance - b.variance;
    return dm * dm + dv * dv;
}

void require_nonempty(std::span<const double> x, std::span<const double> y, const char* what) {
    if (x.empty() || y.empty()) throw InsufficientData(std::string(what) + ": empty dataset");
}

double sorted_w1(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    const std::size_t m = ys.size();
    if (n == m) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::fabs(xs[i] - ys[i]);
        return s / static_cast<double>(n);
    }
    // Walk the merged breakpoints of the two quantile step functions on the
    // common grid 1/(n m); segment lengths are exact integers.
    std::size_t i = 0;
    std::size_t j = 0;
    std::uint64_t prev = 0;
    double total = 0.0;
    while (i < n && j < m) {
        const std::uint64_t a = (i + 1) * static_cast<std::uint64_t>(m);
        const std::uint64_t b = (j + 1) * static_cast<std::uint64_t>(n);
        const std::uint64_t next = std::min(a, b);
        total += static_cast<double>(next - prev) * std::fabs(xs[i] - ys[j]);
        prev = next;
        if (a == next) ++i;
        if (b == next) ++j;
    }
    return total / (static_cast<double>(n) * static_cast<double>(m));
}

class StatsLoss final : public ParticleLoss {
public:
    StatsLoss(const LossSpec& spec, std::span<const double> y)
        : spec_(spec), y_stats_(summary_stats(y)) {}

    double operator()(std::span<const double> x) const override {
        const SummaryStats xs = summary_stats(x);
        switch (spec_.kind) {
            case LossKind::SoftThreshold:
                return soft_threshold_loss(y_stats_, xs);
            case LossKind::GaussianKernel:
                return gaussian_kernel_loss(y_stats_, xs, spec_.bandwidth);
            case LossKind::HardThreshold:
                return hard_threshold_loss(y_stats_, xs, spec_.threshold);
            default:
                throw InvalidParameter("StatsLoss: not a statistic-based loss");
        }
    }

private:
    LossSpec spec_;
    SummaryStats y_stats_;
};

class WassersteinLoss final : public ParticleLoss {
public:
    explicit WassersteinLoss(std::span<const double> y) : sorted_y_(y.begin(), y.end()) {
        if (sorted_y_.empty()) throw InsufficientData("wasserstein: empty observations");
        std::sort(sorted_y_.begin(), sorted_y_.end());
    }

    double operator()(std::span<const double> x) const override {
        if (x.empty()) throw InsufficientData("wasserstein: empty dataset");
        thread_local std::vector<double> buf;
        buf.assign(x.begin(), x.end());
        std::sort(buf.begin(), buf.end());
        return sorted_w1(buf, sorted_y_);
    }

private:
    std::vector<double> sorted_y_;
};

class MmdLoss final : public ParticleLoss {
public:
    MmdLoss(std::span<const double> y, double gamma)
        : gamma_(gamma),
          y_(y.begin(), y.end()),
          y_moments_(y, kernels::KernelMoments::midrange(y), gamma) {
        if (y_.empty()) throw InsufficientData("mmd: empty observations");
        const double m = static_cast<double>(y_.size());
        yy_term_ = kernels::gaussian_self_sum(y_, gamma_) / (m * m);
    }

    double operator()(std::span<const double> x) const override {
        if (x.empty()) throw InsufficientData("mmd: empty dataset");
        const double n = static_cast<double>(x.size());
        const double m = static_cast<double>(y_.size());
        const double xx = kernels::gaussian_self_sum_fast(x, gamma_, kExpansionTol * n * n);
        const auto fast = y_moments_.cross_sum_with(x, kExpansionTol * n * m);
        const double xy = fast ? *fast : kernels::gaussian_cross_sum(x, y_, gamma_, kernels::Exec::Serial);
        return std::max(0.0, xx / (n * n) + yy_term_ - 2.0 * xy / (n * m));
    }

private:
    double gamma_;
    std::vector<double> y_;
    kernels::KernelMoments y_moments_;
    double yy_term_ = 0.0;
};

}  // namespace

LossKind parse_loss_kind(std::string_view name) {
    if (name == "st") return LossKind::SoftThreshold;
    if (name == "gk") return LossKind::GaussianKernel;
    if (name == "ht") return LossKind::HardThreshold;
    if (name == "mmd" || name == "k2") return LossKind::Mmd;
    if (name == "w1" || name == "w") return LossKind::Wasserstein;
    throw InvalidParameter("unknown loss '" + std::string(name) + "' (expected st|gk|ht|mmd|w1)");
}

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::SoftThreshold: return "st";
        case LossKind::GaussianKernel: return "gk";
        case LossKind::HardThreshold: return "ht";
        case LossKind::Mmd: return "mmd";
        case LossKind::Wasserstein: return "w1";
    }
    return "?";
}

std::string loss_method_label(LossKind kind) {
    switch (kind) {
        case LossKind::SoftThreshold: return "ST";
        case LossKind::GaussianKernel: return "GK";
        case LossKind::HardThreshold: return "HT";
        case LossKind::Mmd: return "K2";
        case LossKind::Wasserstein: return "W1";
    }
    return "?";
}

void LossSpec::validate() const {
    if (!(weight > 0.0)) throw InvalidParameter("loss weight must be positive");
    if (particles < 1) throw InvalidParameter("particle count must be at least 1");
    if (!(bandwidth > 0.0)) throw InvalidParameter("bandwidth h must be positive");
    if (!(threshold > 0.0)) throw InvalidParameter("threshold eps must be positive");
    if (gamma && !(*gamma > 0.0)) throw InvalidParameter("MMD gamma must be positive");
}

double soft_threshold_loss(const SummaryStats& y_stats, const SummaryStats& x_stats) {
    return std::sqrt(stats_distance_sq(y_stats, x_stats));
}

double gaussian_kernel_loss(const SummaryStats& y_stats, const SummaryStats& x_stats, double h) {
    if (!(h > 0.0)) throw InvalidParameter("gaussian_kernel_loss: h must be positive");
    return stats_distance_sq(y_stats, x_stats) / (2.0 * h * h);
}

double hard_threshold_loss(const SummaryStats& y_stats, const SummaryStats& x_stats, double eps) {
    if (!(eps > 0.0)) throw InvalidParameter("hard_threshold_loss: eps must be positive");
    return std::sqrt(stats_distance_sq(y_stats, x_stats)) < eps ? 0.0 : kInf;
}

double mmd2_loss(std::span<const double> x, std::span<const double> y, double gamma) {
    require_nonempty(x, y, "mmd2_loss");
    if (!(gamma > 0.0)) throw InvalidParameter("mmd2_loss: gamma must be positive");
    return MmdLoss(y, gamma)(x);
}

double median_heuristic(std::span<const double> y) {
    if (y.size() < 2) throw InsufficientData("median_heuristic: need at least two points");
    const double med = kernels::median_pairwise_distance(y);
    if (!(med > 0.0))
        throw DegenerateData("median_heuristic: median pairwise distance is zero");
    return med;
}

double wasserstein_loss(std::span<const double> x, std::span<const double> y) {
    require_nonempty(x, y, "wasserstein_loss");
    std::vector<double> xs(x.begin(), x.end());
    std::vector<double> ys(y.begin(), y.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    return sorted_w1(xs, ys);
}

double resolve_mmd_gamma(const LossSpec& spec, std::span<const double> y) {
    return spec.gamma ? *spec.gamma : median_heuristic(y);
}

std::unique_ptr<ParticleLoss> prepare_loss(const LossSpec& spec, std::span<const double> y) {
    spec.validate();
    switch (spec.kind) {
        case LossKind::SoftThreshold:
        case LossKind::GaussianKernel:
        case LossKind::HardThreshold:
            return std::make_unique<StatsLoss>(spec, y);
        case LossKind::Mmd:
            return std::make_unique<MmdLoss>(y, resolve_mmd_gamma(spec, y));
        case LossKind::Wasserstein:
            return std::make_unique<WassersteinLoss>(y);
    }
    throw InvalidParameter("prepare_loss: unknown loss kind");
}

double averaged_loss(const ParticleLoss& loss, std::span<const double> particles, std::size_t n,
                     std::size_t M, kernels::Exec exec) {
    if (M == 0 || particles.size() != n * M)
        throw InvalidParameter("averaged_loss: particle buffer does not hold M datasets of size n");
    if (M == 1) return loss(particles);
    thread_local std::vector<double> scratch;
    // Bind to this thread's buffer; naming the thread_local inside the
    // parallel region would give every worker its own copy.
    std::vector<double>& values = scratch;
    values.resize(M);
    const auto mm = static_cast<std::int64_t>(M);
    const bool par = exec == kernels::Exec::Parallel && M >= 4 && M * n >= 4096;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t k = 0; k < mm; ++k) {
        const auto j = static_cast<std::size_t>(k);
        values[j] = loss(particles.subspan(j * n, n));
    }
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(M);
}

double averaged_loss(const LossSpec& spec, std::span<const double> y,
                     const std::vector<Dataset>& particles) {
    if (particles.size() != spec.particles)
        throw InvalidParameter("averaged_loss: got " + std::to_string(particles.size()) +
                               " particles, spec requires " + std::to_string(spec.particles));
    const auto loss = prepare_loss(spec, y);
    double s = 0.0;
    for (const auto& x : particles) s += (*loss)(x);
    return s / static_cast<double>(particles.size());
}

}  // namespace gbi
