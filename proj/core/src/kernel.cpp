#include "vpsvm/kernel.hpp"

#include "vpsvm/errors.hpp"
#include "vpsvm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

namespace vpsvm {

namespace {

struct Counters {
    std::atomic<std::uint64_t> prekernel_builds{ 0 };
    std::atomic<std::uint64_t> prekernel_entries{ 0 };
    std::atomic<std::uint64_t> kernel_matrix_entries{ 0 };
    std::atomic<std::uint64_t> validation_entries{ 0 };
    std::atomic<std::uint64_t> kernel_evaluations{ 0 };
};

Counters &counters() noexcept {
    static Counters c;
    return c;
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw parameter_error("kernel width gamma must be positive and finite, got " + std::to_string(gamma));
    }
}

}  // namespace

double gaussian_from_squared_distance(double d2, double gamma) noexcept {
    return std::exp(-d2 / (gamma * gamma));
}

double gaussian(std::span<const double> x, std::span<const double> y, double gamma) {
    check_gamma(gamma);
    return gaussian_from_squared_distance(squared_distance(x, y), gamma);
}

KernelCounts kernel_counts() noexcept {
    const Counters &c = counters();
    return { c.prekernel_builds.load(), c.prekernel_entries.load(), c.kernel_matrix_entries.load(),
             c.validation_entries.load(), c.kernel_evaluations.load() };
}

void reset_kernel_counts() noexcept {
    Counters &c = counters();
    c.prekernel_builds = 0;
    c.prekernel_entries = 0;
    c.kernel_matrix_entries = 0;
    c.validation_entries = 0;
    c.kernel_evaluations = 0;
}

void count_kernel_evaluations(std::uint64_t n) noexcept {
    counters().kernel_evaluations.fetch_add(n, std::memory_order_relaxed);
}

PreKernelMatrix prekernel(PointsView points, unsigned workers) {
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), std::size_t{ 0 });
    return prekernel(points, all, workers);
}

PreKernelMatrix prekernel(PointsView points, std::span<const std::size_t> indices, unsigned workers) {
    PreKernelMatrix pre;
    const std::size_t n = indices.size();
    pre.n_ = n;
    pre.packed_.assign(n * (n + 1) / 2, 0.0);
    parallel_for(n, workers, [&](std::size_t i) {
        const auto xi = points[indices[i]];
        double *row = pre.packed_.data() + i * (i + 1) / 2;
        for (std::size_t j = 0; j < i; ++j) {
            row[j] = squared_distance(xi, points[indices[j]]);
        }
        row[i] = 0.0;
    });
    Counters &c = counters();
    c.prekernel_builds.fetch_add(1, std::memory_order_relaxed);
    c.prekernel_entries.fetch_add(pre.packed_.size(), std::memory_order_relaxed);
    return pre;
}

KernelMatrix::KernelMatrix(std::size_t n, std::vector<double> entries, double gamma)
    : n_{ n }, gamma_{ gamma }, entries_{ std::move(entries) } {
    if (entries_.size() != n * n) {
        throw parameter_error("kernel matrix needs n*n entries");
    }
    finite_ = std::all_of(entries_.begin(), entries_.end(), [](double v) { return std::isfinite(v); });
}

KernelMatrix kernel_from_prekernel(const PreKernelMatrix &pre, double gamma) {
    check_gamma(gamma);
    KernelMatrix k;
    const std::size_t n = pre.size();
    k.n_ = n;
    k.gamma_ = gamma;
    k.entries_.resize(n * n);
    const double *packed = pre.packed().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double *src = packed + i * (i + 1) / 2;
        double *dst = k.entries_.data() + i * n;
        for (std::size_t j = 0; j < i; ++j) {
            const double v = gaussian_from_squared_distance(src[j], gamma);
            k.finite_ = k.finite_ && std::isfinite(v);
            dst[j] = v;
            k.entries_[j * n + i] = v;
        }
        dst[i] = 1.0;
    }
    counters().kernel_matrix_entries.fetch_add(n * (n + 1) / 2, std::memory_order_relaxed);
    return k;
}

CrossDistanceMatrix::CrossDistanceMatrix(PointsView points, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> cols)
    : rows_{ rows.size() }, cols_{ cols.size() }, entries_(rows.size() * cols.size()) {
    for (std::size_t i = 0; i < rows_; ++i) {
        const auto xi = points[rows[i]];
        double *dst = entries_.data() + i * cols_;
        for (std::size_t j = 0; j < cols_; ++j) {
            dst[j] = squared_distance(xi, points[cols[j]]);
        }
    }
    counters().validation_entries.fetch_add(entries_.size(), std::memory_order_relaxed);
}

std::vector<double> kernel_row(PointsView points, std::size_t i, PointsView queries, double gamma) {
    check_gamma(gamma);
    std::vector<double> out(queries.size());
    const auto xi = points[i];
    for (std::size_t q = 0; q < queries.size(); ++q) {
        out[q] = gaussian_from_squared_distance(squared_distance(xi, queries[q]), gamma);
    }
    count_kernel_evaluations(queries.size());
    return out;
}

}  // namespace vpsvm
