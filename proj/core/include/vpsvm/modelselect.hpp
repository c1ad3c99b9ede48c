/**
 * @file
 * @brief Per-cell hyper-parameter search: grid construction, k-fold
 *        cross-validation with pre-kernel caching, exponential fold weights and
 *        (gamma, lambda) selection.
 *
 * For every fold the squared distances of the fold complement are computed
 * once. Each gamma then derives one kernel matrix from them, and the lambda
 * values are solved in decreasing-C order with warm starts. Validation risk is
 * the mean hinge loss of the clipped decision values.
 */

#pragma once

#include "vpsvm/data.hpp"
#include "vpsvm/solver.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace vpsvm {

/// Both sequences are geometric and strictly decreasing.
struct HyperGrid {
    std::vector<double> lambdas;
    std::vector<double> gammas;

    [[nodiscard]] std::size_t size() const noexcept { return lambdas.size() * gammas.size(); }
    friend bool operator==(const HyperGrid &, const HyperGrid &) = default;
};

/// `count` values from `first` to `last`, geometrically spaced, endpoints exact.
[[nodiscard]] std::vector<double> geometric_sequence(double first, double last, std::size_t count);

/**
 * lambda from 0.01/n_tilde down to 0.001/n_tilde and gamma from 5r down to
 * 0.2 r n_tilde^(-1/d). A zero radius (all-duplicate cell) is replaced by a
 * tiny positive value and a warning is issued.
 */
[[nodiscard]] HyperGrid default_grid(std::size_t n_tilde, double r, std::size_t d, std::size_t n_lambda = 10,
                                     std::size_t n_gamma = 10);

/// Throws parameter_error unless the grid is nonempty, positive and strictly monotone.
void validate_grid(const HyperGrid &grid);

struct FoldSplit {
    /// folds[l] lists the held-out sample indices of fold l, ascending.
    std::vector<std::vector<std::size_t>> folds;

    [[nodiscard]] std::size_t size() const noexcept { return folds.size(); }
    /// Indices of every sample not in fold l, ascending.
    [[nodiscard]] std::vector<std::size_t> complement(std::size_t l) const;
};

/// Random split of n samples into k folds whose sizes differ by at most 1.
[[nodiscard]] FoldSplit make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

/**
 * What the combined risk of a grid point measures.
 * cell: the combined function on the whole cell, including each fold
 * function's own training samples (literal reading of the algorithm; biased
 * toward weak regularization). held_out: sum_l w_l R_l, the fold-weighted
 * held-out risks.
 */
enum class selection_scope : std::uint8_t { cell = 0, held_out = 1 };

struct CrossValidationOptions {
    std::size_t folds{ 5 };
    selection_scope scope{ selection_scope::cell };
    std::uint64_t seed{ 0 };
    ClassWeights weights{};
    SolverOptions solver{};
    /// Folds run in parallel on at most this many threads (0 = all cores).
    unsigned workers{ 1 };
};

/**
 * Everything cross_validate learned about one cell. Index order is
 * (gamma, lambda, fold) with the fold varying fastest.
 */
struct ValidationTable {
    HyperGrid grid;
    FoldSplit split;
    Dataset cell;

    std::vector<double> fold_risks;
    std::vector<double> combined_risks;
    /// Dual coefficients on the fold complement, per (gamma, lambda, fold).
    std::vector<std::vector<double>> alphas;
    /// Whether the fold complement had a single class; its function is then constant.
    std::vector<bool> constant_fold;

    std::uint64_t solver_calls{ 0 };
    std::uint64_t prekernel_builds{ 0 };
    std::uint64_t shortcut_skips{ 0 };
    std::uint64_t unconverged_solves{ 0 };

    /// Accumulated seconds per activity, summed over folds.
    double kernel_seconds{ 0.0 };
    double solver_seconds{ 0.0 };
    double validation_seconds{ 0.0 };

    [[nodiscard]] std::size_t folds() const noexcept { return split.size(); }
    [[nodiscard]] std::size_t slot(std::size_t g, std::size_t l, std::size_t f) const noexcept {
        return (g * grid.lambdas.size() + l) * folds() + f;
    }
    [[nodiscard]] double fold_risk(std::size_t g, std::size_t l, std::size_t f) const noexcept {
        return fold_risks[slot(g, l, f)];
    }
    [[nodiscard]] double combined_risk(std::size_t g, std::size_t l) const noexcept {
        return combined_risks[g * grid.lambdas.size() + l];
    }
    /// Decision function trained on the complement of fold f at grid point (g, l).
    [[nodiscard]] CellDecisionFunction fold_function(std::size_t g, std::size_t l, std::size_t f) const;
};

/**
 * k-fold cross-validation of one cell over the whole grid. Fold complements
 * with a single class are replaced by the constant function and counted in
 * shortcut_skips instead of solver_calls. Throws config_error if a fold
 * complement is empty (k < 2 or k > n).
 */
[[nodiscard]] ValidationTable cross_validate(const Dataset &cell, const HyperGrid &grid,
                                             const CrossValidationOptions &options);

/// w_l proportional to exp(-R_l / T), T the mean risk (1 if it is 0); sums to 1.
[[nodiscard]] std::vector<double> fold_weights(std::span<const double> risks);

/**
 * Weighted sum of fold functions sharing one gamma. Support vectors that
 * occur in several folds are merged into one term, so the result evaluates
 * to sum_l w_l f_l(x) with as few kernel evaluations as possible.
 */
[[nodiscard]] CellDecisionFunction combine_folds(std::span<const CellDecisionFunction> functions,
                                                 std::span<const double> risks);

struct Selection {
    std::size_t gamma_index{ 0 };
    std::size_t lambda_index{ 0 };
    double gamma{ 0.0 };
    double lambda{ 0.0 };
    double combined_risk{ 0.0 };
    CellDecisionFunction function;
};

/// Argmin of the combined risk; ties go to larger lambda, then larger gamma.
[[nodiscard]] Selection select(const ValidationTable &table);

/// Rows `cell,gamma,lambda,fold,risk`; combined risks use fold "combined".
void write_validation_rows(std::ostream &out, std::size_t cell_id, const ValidationTable &table);

}  // namespace vpsvm
