/**
 * @file
 * @brief SMO-type solver for the offset-free hinge-loss SVM dual on one cell.
 *
 * Per cell the primal problem is
 *
 *     min_f  lambda ||f||_H^2 + (1/n) sum_i w_{y_i} max(0, 1 - y_i f(x_i))
 *
 * without an offset term. Its dual is the box-constrained quadratic program
 *
 *     max_alpha  D(alpha) = sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
 *     s.t.       0 <= alpha_i <= C_i = w_{y_i} / (2 lambda n)
 *
 * and the solution is f = sum_i alpha_i y_i k(x_i, .). Because there is no
 * equality constraint, single coordinates can be optimized exactly: the solver
 * repeatedly picks the coordinate with the largest KKT violation and moves it
 * to the clipped 1-D optimum.
 */

#pragma once

#include "vpsvm/data.hpp"
#include "vpsvm/kernel.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vpsvm {

struct SolverOptions {
    /// Stop once every coordinate's KKT violation is at most this.
    double tolerance{ 1e-3 };
    /// Iteration cap; 0 means 100000 * n.
    std::uint64_t max_iterations{ 0 };
    /// Temporarily drop coordinates stuck at a bound; the result is unaffected.
    bool shrinking{ true };
};

/// Per-class loss weights (w_{-1}, w_{+1}).
struct ClassWeights {
    double negative{ 1.0 };
    double positive{ 1.0 };

    [[nodiscard]] double of(int label) const noexcept { return label > 0 ? positive : negative; }
    friend bool operator==(const ClassWeights &, const ClassWeights &) = default;
};

/// Box bounds C_i = w_{y_i} / (2 lambda n).
[[nodiscard]] std::vector<double> box_bounds(std::span<const int> labels, double lambda, const ClassWeights &weights = {});

struct DualProblem {
    const KernelMatrix *kernel{ nullptr };
    std::span<const int> labels;
    std::vector<double> box;
    SolverOptions options{};

    DualProblem(const KernelMatrix &k, std::span<const int> y, std::vector<double> upper, SolverOptions opts = {});
};

struct DualSolution {
    std::vector<double> alpha;
    /// g_i = 1 - y_i f(x_i), the dual gradient at alpha.
    std::vector<double> gradient;
    double dual_objective{ 0.0 };
    double max_kkt_violation{ 0.0 };
    std::uint64_t iterations{ 0 };
    /// False if the iteration cap was hit before reaching the tolerance.
    bool converged{ true };
};

/**
 * Solves the dual. A warm start is clamped entrywise into the box first.
 * Throws parameter_error on non-finite kernel entries or inconsistent sizes.
 * Deterministic and single-threaded.
 */
[[nodiscard]] DualSolution solve(const DualProblem &problem, std::optional<std::span<const double>> warm_start = std::nullopt);

/// KKT violation of coordinate i given its gradient.
[[nodiscard]] double kkt_violation(double alpha, double gradient, double upper) noexcept;

/// Dual objective recomputed from scratch, O(n^2).
[[nodiscard]] double dual_objective(const DualProblem &problem, std::span<const double> alpha);
/// Primal objective of the scaled problem 1/2 ||f||^2 + sum_i C_i hinge(y_i, f(x_i)), O(n^2).
[[nodiscard]] double primal_objective(const DualProblem &problem, std::span<const double> alpha);

/// Decision values f(x_i) at the training points, read off the gradient.
[[nodiscard]] std::vector<double> training_decision_values(std::span<const int> labels, const DualSolution &solution);

/**
 * f(x) = constant + sum_i coefficient_i * k_gamma(sv_i, x).
 *
 * For a single solve, coefficient_i = alpha_i y_i and constant = 0. A nonzero
 * constant with no support vectors is the single-class shortcut. Combined
 * fold functions keep one expansion over the union of their support sets.
 */
struct CellDecisionFunction {
    double gamma{ 1.0 };
    std::size_t dim{ 0 };
    std::vector<double> support_vectors;
    std::vector<double> coefficients;
    double constant{ 0.0 };

    [[nodiscard]] std::size_t support_count() const noexcept { return coefficients.size(); }
    [[nodiscard]] PointsView support_points() const noexcept { return { support_vectors, dim }; }

    friend bool operator==(const CellDecisionFunction &, const CellDecisionFunction &) = default;
};

/// Builds the function from a dual solution over `points` (only alpha_i > 0 kept).
[[nodiscard]] CellDecisionFunction make_decision_function(PointsView points, std::span<const int> labels,
                                                          std::span<const double> alpha, double gamma);

/// Evaluates f(x); counts support_count() kernel evaluations.
[[nodiscard]] double decision_value(const CellDecisionFunction &fn, std::span<const double> x);

/// Constant function +-1 when all labels agree, otherwise nothing.
[[nodiscard]] std::optional<CellDecisionFunction> single_class_shortcut(std::span<const int> labels, std::size_t dim = 0);

}  // namespace vpsvm
