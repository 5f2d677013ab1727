#pragma once

// Data-parallel inner loops. Each kernel has a plain serial reference and an
// OpenMP version; the OpenMP versions reduce per-row partials in a fixed
// order, so both return bit-identical results for any thread count.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gbi::kernels {

enum class Exec { Serial, Parallel };

// sum_i sum_j exp(-(a_i - b_j)^2 / (2 gamma^2)), brute force.
double gaussian_cross_sum(std::span<const double> a, std::span<const double> b, double gamma,
                          Exec exec = Exec::Parallel);

// sum_i sum_j exp(-(a_i - a_j)^2 / (2 gamma^2)) over all ordered pairs,
// including the diagonal.
double gaussian_self_sum(std::span<const double> a, double gamma, Exec exec = Exec::Parallel);

// Pseudo-marginal likelihood terms: for each observation i,
//   out[i] = log( (1/M) sum_m N(y_i; x_{m,i}, error_var) )
// where particles holds M datasets of size |y| row-major.
void loglik_terms(std::span<const double> y, std::span<const double> particles, std::size_t M,
                  double error_var, std::span<double> out, Exec exec = Exec::Parallel);

// Median of |a_i - a_j| over i < j.
double median_pairwise_distance(std::span<const double> a, Exec exec = Exec::Parallel);

// Truncated Taylor representation of a point set under the Gaussian kernel.
//
// With s = 1 / (sqrt(2) gamma) and alpha = s (a - c),
//   k(a, b) = exp(-(alpha - beta)^2) = sum_k P_k(a) P_k(b),
//   P_k(a) = exp(-alpha^2) (sqrt(2) alpha)^k / sqrt(k!),
// so kernel sums over two point sets sharing the centre c reduce to dot
// products of the moment vectors A_k = sum_i P_k(a_i). Every P_k is bounded by
// one, which keeps cancellation harmless, and the truncation error is bounded
// rigorously from the absolute moments. Sums that would need more than
// kMaxOrder terms are reported as unavailable so callers fall back to the
// brute-force kernels.
class KernelMoments {
public:
    static constexpr std::size_t kMaxOrder = 160;

    KernelMoments() = default;
    KernelMoments(std::span<const double> points, double center, double gamma,
                  std::size_t max_order = kMaxOrder);

    // Centre halfway between the extremes, which minimises the radius.
    static double midrange(std::span<const double> points);

    double center() const { return center_; }
    double gamma() const { return gamma_; }
    // max |sqrt(2) alpha_i|
    double radius() const { return radius_; }
    std::size_t size() const { return size_; }

    // sum over a in this, b in other of k(a, b); requires equal centre and
    // gamma. abs_tol bounds the discarded tail.
    std::optional<double> cross_sum(const KernelMoments& other, double abs_tol) const;
    std::optional<double> self_sum(double abs_tol) const;

    // Lazily extends x's moments only as far as needed against this set.
    std::optional<double> cross_sum_with(std::span<const double> x, double abs_tol) const;

private:
    double center_ = 0.0;
    double gamma_ = 1.0;
    double radius_ = 0.0;
    std::size_t size_ = 0;
    std::vector<double> moments_;
    std::vector<double> abs_moments_;
};

// Self kernel sum of x through its own moment expansion, falling back to the
// brute-force kernel when the expansion would be too long.
double gaussian_self_sum_fast(std::span<const double> x, double gamma, double abs_tol);

}  // namespace gbi::kernels
