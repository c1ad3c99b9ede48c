/**
 * @file
 * @brief Local SVM training and prediction: partition the data, fit one SVM
 *        per cell, and predict with the SVM of the cell a point falls into.
 *
 * The spatial model's decision function at x is clip(f_j(x)) where j is the
 * Voronoi cell of x. The random-chunks baseline instead averages the decision
 * values of every chunk's SVM and clips the mean, so each prediction touches
 * every support vector of the ensemble.
 *
 * Regularization is parameterized per cell: a cell with n_j samples solves
 * lambda_j ||f||^2 + (1/n_j) sum w_y hinge. A global lambda (normalized by the
 * full training size n) corresponds to lambda_j = lambda n / n_j.
 */

#pragma once

#include "vpsvm/data.hpp"
#include "vpsvm/loss.hpp"
#include "vpsvm/modelselect.hpp"
#include "vpsvm/partition.hpp"
#include "vpsvm/solver.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vpsvm {

enum class strategy : std::uint8_t { spatial = 0, chunks = 1 };

/// (gamma, lambda) used for every cell instead of cross-validation.
/// lambda uses the global normalization (divided by the full training size).
struct FixedParameters {
    double gamma{ 1.0 };
    double lambda{ 1.0 };
    friend bool operator==(const FixedParameters &, const FixedParameters &) = default;
};

struct TrainConfig {
    strategy method{ strategy::spatial };
    /// Cell size or radius for spatial models; chunk size (CellSizeTarget) for chunks.
    PartitionTarget target{ CellSizeTarget{ 2000 } };
    std::optional<FixedParameters> fixed{};
    std::size_t folds{ 5 };
    std::size_t n_lambda{ 10 };
    std::size_t n_gamma{ 10 };
    selection_scope scope{ selection_scope::cell };
    ClassWeights weights{};
    SolverOptions solver{};
    std::uint64_t seed{ 0 };
    /// Cells train in parallel on at most this many threads (0 = all cores).
    unsigned workers{ 0 };
    std::size_t subsample_threshold{ 50000 };
    /// Called once per cross-validated cell, possibly concurrently from workers.
    std::function<void(std::size_t cell, const ValidationTable &table)> on_validation{};
};

/// Throws config_error naming the offending field.
void validate_config(const TrainConfig &config);

struct CellModel {
    CellDecisionFunction function;
    /// Selected or fixed parameters in the per-cell normalization.
    double gamma{ 0.0 };
    double lambda{ 0.0 };
    std::size_t train_size{ 0 };
    double radius{ 0.0 };
    /// The cell held a single class and its model is that constant.
    bool constant{ false };
    /// Combined validation risk of the selection; 0 without cross-validation.
    double validation_risk{ 0.0 };
    std::uint64_t solver_calls{ 0 };
    std::uint64_t prekernel_builds{ 0 };
    std::uint64_t shortcut_skips{ 0 };

    friend bool operator==(const CellModel &, const CellModel &) = default;
};

/// Seconds per phase. Phases of parallel cells are summed, so with several
/// workers they may exceed the wall time.
struct TimingReport {
    double partition{ 0.0 };
    double kernel_calc{ 0.0 };
    double solver{ 0.0 };
    double validation{ 0.0 };
    double selection{ 0.0 };
    double test{ 0.0 };
    double wall{ 0.0 };
    std::uint64_t peak_memory_bytes{ 0 };

    [[nodiscard]] double phase_total() const noexcept {
        return partition + kernel_calc + solver + validation + selection + test;
    }
};

/// CSV header and row in the column order partition,kernel_calc,solver,validation,selection,test,wall,peak_memory_bytes.
[[nodiscard]] std::string timing_csv_header();
[[nodiscard]] std::string timing_csv_row(const TimingReport &timings);

struct LocalModel {
    strategy method{ strategy::spatial };
    Partition partition;
    std::vector<CellModel> cells;
    /// Applied to inputs before routing when present.
    std::optional<MinMaxScaler> scaler{};

    std::size_t dim{ 0 };
    std::size_t train_size{ 0 };
    std::uint64_t seed{ 0 };
    std::size_t folds{ 0 };
    std::size_t n_lambda{ 0 };
    std::size_t n_gamma{ 0 };
    selection_scope scope{ selection_scope::cell };
    std::optional<FixedParameters> fixed{};
    ClassWeights weights{};

    /// Not serialized.
    TimingReport timings{};

    [[nodiscard]] std::size_t total_support() const noexcept;

    friend bool operator==(const LocalModel &a, const LocalModel &b) {
        return a.method == b.method && a.partition == b.partition && a.cells == b.cells && a.scaler == b.scaler &&
               a.dim == b.dim && a.train_size == b.train_size && a.seed == b.seed && a.folds == b.folds &&
               a.n_lambda == b.n_lambda && a.n_gamma == b.n_gamma && a.scope == b.scope && a.fixed == b.fixed && a.weights == b.weights;
    }
};

/// Per-cell timings gathered by train_cell.
struct CellTimings {
    double kernel_calc{ 0.0 };
    double solver{ 0.0 };
    double validation{ 0.0 };
    double selection{ 0.0 };
};

/**
 * Trains the model of a single cell. `radius` scales the gamma grid,
 * `global_size` converts a fixed global lambda to the cell normalization and
 * `cell_seed` drives the fold split. Used by train() for every cell; calling
 * it on a whole dataset gives a plain global SVM.
 */
[[nodiscard]] CellModel train_cell(const Dataset &cell, double radius, std::size_t global_size, const TrainConfig &config,
                                   std::uint64_t cell_seed, std::size_t cell_id = 0, CellTimings *timings = nullptr);

/// Fold seed of cell j; depends only on (seed, j).
[[nodiscard]] std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell_id) noexcept;

/// Radius of a training cell: distance to the center for Voronoi cells, to the first member for chunks.
[[nodiscard]] double training_radius(const Partition &partition, std::size_t j, const Dataset &data);

/// Partitions per config.method / config.target, then trains every cell.
[[nodiscard]] LocalModel train(const Dataset &data, const TrainConfig &config);

/// Trains every cell of an existing partition of `data`.
[[nodiscard]] LocalModel train_on_partition(const Dataset &data, Partition partition, const TrainConfig &config);

struct Prediction {
    double value{ 0.0 };
    int label{ 1 };
    /// Routed cell, or -1 for chunk ensembles.
    std::int64_t cell{ -1 };
    std::uint64_t kernel_evals{ 0 };
};

/// Prediction at x. Throws config_error if x has the wrong dimension, parameter_error if not finite.
[[nodiscard]] Prediction predict(const LocalModel &model, std::span<const double> x);
[[nodiscard]] std::vector<Prediction> predict(const LocalModel &model, const Dataset &data, unsigned workers = 1);

struct RiskEstimate {
    std::size_t count{ 0 };
    std::size_t errors{ 0 };
    double hinge_sum{ 0.0 };

    [[nodiscard]] double error() const noexcept { return count == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(count); }
    [[nodiscard]] double hinge() const noexcept { return count == 0 ? 0.0 : hinge_sum / static_cast<double>(count); }
};

struct TestReport {
    RiskEstimate global;
    /// One entry per cell (spatial) or a single entry (chunks).
    std::vector<RiskEstimate> per_cell;
    std::uint64_t kernel_evals{ 0 };
    double seconds{ 0.0 };
};

/// Error and hinge risk of the clipped predictions. Throws config_error on an empty test set.
[[nodiscard]] TestReport test_risk(const LocalModel &model, const Dataset &test, unsigned workers = 1);

/// Versioned binary model encoding without timings; identical models give identical bytes.
[[nodiscard]] std::string serialize_model(const LocalModel &model);
[[nodiscard]] LocalModel deserialize_model(std::string_view bytes);
void save_model(const std::filesystem::path &path, const LocalModel &model);
[[nodiscard]] LocalModel load_model(const std::filesystem::path &path);

/// Peak resident set size of this process in bytes, 0 if unavailable.
[[nodiscard]] std::uint64_t peak_memory_bytes();

}  // namespace vpsvm
