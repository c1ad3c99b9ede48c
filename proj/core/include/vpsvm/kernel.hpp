/**
 * @file
 * @brief Gaussian kernel evaluation and the squared-distance ("pre-kernel")
 *        cache from which kernel matrices for many bandwidths are derived.
 *
 * The kernel is k_gamma(x, y) = exp(-||x - y||^2 / gamma^2). Squared distances
 * are always computed by direct subtraction, never via the
 * ||x||^2 + ||y||^2 - 2<x, y> expansion, so near-duplicate points keep
 * full relative precision.
 *
 * The module keeps process-wide evaluation counters. They are exact and are
 * what the cost-accounting tests assert against.
 */

#pragma once

#include "vpsvm/data.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vpsvm {

[[nodiscard]] inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        sum += diff * diff;
    }
    return sum;
}

/// exp(-d2 / gamma^2); the single place where squared distances become kernel values.
[[nodiscard]] double gaussian_from_squared_distance(double d2, double gamma) noexcept;

/// Gaussian kernel value. Throws parameter_error if gamma <= 0.
/// Does not touch the counters; use kernel_row for counted evaluations.
[[nodiscard]] double gaussian(std::span<const double> x, std::span<const double> y, double gamma);

/// Snapshot of the process-wide counters.
struct KernelCounts {
    std::uint64_t prekernel_builds{ 0 };
    /// Stored pre-kernel entries, n(n+1)/2 per n-point build.
    std::uint64_t prekernel_entries{ 0 };
    /// Kernel matrix entries derived from a pre-kernel, n(n+1)/2 per matrix.
    std::uint64_t kernel_matrix_entries{ 0 };
    /// Squared distances between held-out and training points during validation.
    std::uint64_t validation_entries{ 0 };
    /// Individual kernel evaluations against support vectors (prediction).
    std::uint64_t kernel_evaluations{ 0 };

    friend KernelCounts operator-(const KernelCounts &a, const KernelCounts &b) noexcept {
        return { a.prekernel_builds - b.prekernel_builds, a.prekernel_entries - b.prekernel_entries,
                 a.kernel_matrix_entries - b.kernel_matrix_entries, a.validation_entries - b.validation_entries,
                 a.kernel_evaluations - b.kernel_evaluations };
    }
    friend bool operator==(const KernelCounts &, const KernelCounts &) = default;
};

[[nodiscard]] KernelCounts kernel_counts() noexcept;
void reset_kernel_counts() noexcept;
void count_kernel_evaluations(std::uint64_t n) noexcept;

/**
 * Symmetric matrix of squared Euclidean distances, lower triangle packed.
 */
class PreKernelMatrix {
  public:
    PreKernelMatrix() = default;

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
        return i >= j ? packed_[i * (i + 1) / 2 + j] : packed_[j * (j + 1) / 2 + i];
    }
    [[nodiscard]] std::span<const double> packed() const noexcept { return packed_; }

  private:
    friend PreKernelMatrix prekernel(PointsView points, std::span<const std::size_t> indices, unsigned workers);
    std::size_t n_{ 0 };
    std::vector<double> packed_;
};

/// Pre-kernel over all points.
[[nodiscard]] PreKernelMatrix prekernel(PointsView points, unsigned workers = 1);
/// Pre-kernel over the given rows of `points`, in that order.
[[nodiscard]] PreKernelMatrix prekernel(PointsView points, std::span<const std::size_t> indices, unsigned workers = 1);

/**
 * Dense n x n Gaussian kernel matrix. Stored in full (not packed) so the
 * solver can stream contiguous rows.
 */
class KernelMatrix {
  public:
    KernelMatrix() = default;
    /// Wraps an explicit symmetric matrix; used by tests and benchmarks.
    KernelMatrix(std::size_t n, std::vector<double> entries, double gamma = 0.0);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * n_ + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>{ entries_ }.subspan(i * n_, n_);
    }
    /// Whether every entry is finite; checked once at construction.
    [[nodiscard]] bool finite() const noexcept { return finite_; }

  private:
    friend KernelMatrix kernel_from_prekernel(const PreKernelMatrix &pre, double gamma);
    std::size_t n_{ 0 };
    double gamma_{ 0.0 };
    bool finite_{ true };
    std::vector<double> entries_;
};

/// Elementwise exp(-entry / gamma^2); diagonal exactly 1.
[[nodiscard]] KernelMatrix kernel_from_prekernel(const PreKernelMatrix &pre, double gamma);

/**
 * Rectangular matrix of squared distances between a set of query rows and a
 * set of training rows (validation: held-out fold vs. fold complement).
 */
class CrossDistanceMatrix {
  public:
    CrossDistanceMatrix() = default;
    CrossDistanceMatrix(PointsView points, std::span<const std::size_t> rows, std::span<const std::size_t> cols);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>{ entries_ }.subspan(i * cols_, cols_);
    }

  private:
    std::size_t rows_{ 0 };
    std::size_t cols_{ 0 };
    std::vector<double> entries_;
};

/// Kernel values between points[i] and each query; counted as |queries| evaluations.
[[nodiscard]] std::vector<double> kernel_row(PointsView points, std::size_t i, PointsView queries, double gamma);

}  // namespace vpsvm
