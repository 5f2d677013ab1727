#include "gbi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "gbi/error.hpp"
#include "gbi/stats.hpp"

namespace gbi::kernels {

namespace {

// Below this many pairwise terms the parallel kernels run serially.
constexpr std::size_t kParallelThreshold = 1 << 14;

double row_sum(double ai, std::span<const double> b, double inv_two_gamma_sq) {
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t j = 0; j < b.size(); ++j) {
        const double d = ai - b[j];
        s += std::exp(-d * d * inv_two_gamma_sq);
    }
    return s;
}

double ordered_sum(std::span<const double> parts) {
    double s = 0.0;
    for (double v : parts) s += v;
    return s;
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0)) throw InvalidParameter("kernel bandwidth gamma must be positive");
}

}  // namespace

double gaussian_cross_sum(std::span<const double> a, std::span<const double> b, double gamma,
                          Exec exec) {
    check_gamma(gamma);
    const double inv = 1.0 / (2.0 * gamma * gamma);
    std::vector<double> rows(a.size());
    const auto n = static_cast<std::int64_t>(a.size());
    const bool par = exec == Exec::Parallel && a.size() * b.size() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = row_sum(a[i], b, inv);
    return ordered_sum(rows);
}

double gaussian_self_sum(std::span<const double> a, double gamma, Exec exec) {
    check_gamma(gamma);
    const double inv = 1.0 / (2.0 * gamma * gamma);
    std::vector<double> rows(a.size());
    const auto n = static_cast<std::int64_t>(a.size());
    const bool par = exec == Exec::Parallel && a.size() * a.size() >= 2 * kParallelThreshold;
    // Strict upper triangle per row; dynamic schedule because rows shrink.
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        rows[k] = row_sum(a[k], a.subspan(k + 1), inv);
    }
    return static_cast<double>(a.size()) + 2.0 * ordered_sum(rows);
}

void loglik_terms(std::span<const double> y, std::span<const double> particles, std::size_t M,
                  double error_var, std::span<double> out, Exec exec) {
    const std::size_t n = y.size();
    if (M == 0) throw InvalidParameter("loglik_terms: M must be positive");
    if (particles.size() != n * M || out.size() != n)
        throw InvalidParameter("loglik_terms: size mismatch");
    if (!(error_var > 0.0)) throw InvalidParameter("loglik_terms: error variance must be positive");
    const double inv = 1.0 / (2.0 * error_var);
    const double norm = -0.5 * (kLogTwoPi + std::log(error_var)) - std::log(static_cast<double>(M));
    const auto nn = static_cast<std::int64_t>(n);
    const bool par = exec == Exec::Parallel && n * M >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t ii = 0; ii < nn; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double yi = y[i];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < M; ++m) {
            const double d = yi - particles[m * n + i];
            best = std::max(best, -d * d * inv);
        }
        double s = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double d = yi - particles[m * n + i];
            s += std::exp(-d * d * inv - best);
        }
        out[i] = best + std::log(s) + norm;
    }
}

double median_pairwise_distance(std::span<const double> a, Exec exec) {
    const std::size_t n = a.size();
    if (n < 2) throw InsufficientData("median_pairwise_distance: need at least two points");
    std::vector<double> diffs(n * (n - 1) / 2);
    const auto nn = static_cast<std::int64_t>(n);
    const bool par = exec == Exec::Parallel && diffs.size() >= kParallelThreshold;
#pragma omp parallel for schedule(dynamic, 16) if (par)
    for (std::int64_t ii = 0; ii < nn; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        // Row i starts after the rows 0..i-1 of lengths n-1, n-2, ...
        std::size_t pos = i * (2 * n - i - 1) / 2;
        for (std::size_t j = i + 1; j < n; ++j) diffs[pos++] = std::fabs(a[i] - a[j]);
    }
    const std::size_t half = diffs.size() / 2;
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(half), diffs.end());
    const double upper = diffs[half];
    if (diffs.size() % 2 == 1) return upper;
    const double lower = *std::max_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(half));
    return 0.5 * (lower + upper);
}

// ---------------------------------------------------------------------------

double KernelMoments::midrange(std::span<const double> points) {
    if (points.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(points.begin(), points.end());
    return 0.5 * (*lo + *hi);
}

KernelMoments::KernelMoments(std::span<const double> points, double center, double gamma,
                             std::size_t max_order)
    : center_(center), gamma_(gamma), size_(points.size()) {
    check_gamma(gamma);
    const double scale = 1.0 / gamma;  // sqrt(2) * s
    std::vector<double> u(points.size());
    std::vector<double> p(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        u[i] = (points[i] - center) * scale;
        p[i] = std::exp(-0.5 * u[i] * u[i]);
        radius_ = std::max(radius_, std::fabs(u[i]));
    }
    moments_.resize(max_order + 1);
    abs_moments_.resize(max_order + 1);
    for (std::size_t k = 0; k <= max_order; ++k) {
        double s = 0.0;
        double sa = 0.0;
        for (double v : p) {
            s += v;
            sa += std::fabs(v);
        }
        moments_[k] = s;
        abs_moments_[k] = sa;
        const double f = 1.0 / std::sqrt(static_cast<double>(k + 1));
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= u[i] * f;
    }
}

std::optional<double> KernelMoments::cross_sum(const KernelMoments& other, double abs_tol) const {
    if (other.center_ != center_ || other.gamma_ != gamma_)
        throw InvalidParameter("KernelMoments: centre or bandwidth mismatch");
    const double uv = radius_ * other.radius_;
    const std::size_t order = std::min(moments_.size(), other.moments_.size());
    double total = 0.0;
    for (std::size_t k = 0; k < order; ++k) {
        total += moments_[k] * other.moments_[k];
        const double r = uv / static_cast<double>(k + 1);
        if (r <= 0.5 && abs_moments_[k] * other.abs_moments_[k] * r / (1.0 - r) <= abs_tol)
            return total;
    }
    return std::nullopt;
}

std::optional<double> KernelMoments::self_sum(double abs_tol) const { return cross_sum(*this, abs_tol); }

std::optional<double> KernelMoments::cross_sum_with(std::span<const double> x, double abs_tol) const {
    const double scale = 1.0 / gamma_;
    thread_local std::vector<double> u;
    thread_local std::vector<double> p;
    u.resize(x.size());
    p.resize(x.size());
    double radius = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        u[i] = (x[i] - center_) * scale;
        radius = std::max(radius, std::fabs(u[i]));
    }
    const double uv = radius * radius_;
    if (2.0 * uv + 1.0 >= static_cast<double>(moments_.size())) return std::nullopt;
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::exp(-0.5 * u[i] * u[i]);
    double total = 0.0;
    for (std::size_t k = 0; k < moments_.size(); ++k) {
        double s = 0.0;
        double sa = 0.0;
#pragma omp simd reduction(+ : s, sa)
        for (std::size_t i = 0; i < p.size(); ++i) {
            s += p[i];
            sa += std::fabs(p[i]);
        }
        total += s * moments_[k];
        const double r = uv / static_cast<double>(k + 1);
        if (r <= 0.5 && sa * abs_moments_[k] * r / (1.0 - r) <= abs_tol) return total;
        const double f = 1.0 / std::sqrt(static_cast<double>(k + 1));
#pragma omp simd
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= u[i] * f;
    }
    return std::nullopt;
}

double gaussian_self_sum_fast(std::span<const double> x, double gamma, double abs_tol) {
    check_gamma(gamma);
    const double center = KernelMoments::midrange(x);
    const double scale = 1.0 / gamma;
    thread_local std::vector<double> u;
    thread_local std::vector<double> p;
    u.resize(x.size());
    p.resize(x.size());
    double radius = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        u[i] = (x[i] - center) * scale;
        radius = std::max(radius, std::fabs(u[i]));
    }
    const double uu = radius * radius;
    if (2.0 * uu + 1.0 >= static_cast<double>(KernelMoments::kMaxOrder))
        return gaussian_self_sum(x, gamma, Exec::Serial);
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::exp(-0.5 * u[i] * u[i]);
    double total = 0.0;
    for (std::size_t k = 0; k <= KernelMoments::kMaxOrder; ++k) {
        double s = 0.0;
        double sa = 0.0;
#pragma omp simd reduction(+ : s, sa)
        for (std::size_t i = 0; i < p.size(); ++i) {
            s += p[i];
            sa += std::fabs(p[i]);
        }
        total += s * s;
        const double r = uu / static_cast<double>(k + 1);
        if (r <= 0.5 && sa * sa * r / (1.0 - r) <= abs_tol) return total;
        const double f = 1.0 / std::sqrt(static_cast<double>(k + 1));
#pragma omp simd
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= u[i] * f;
    }
    return gaussian_self_sum(x, gamma, Exec::Serial);
}

}  // namespace gbi::kernels
