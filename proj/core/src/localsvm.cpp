#include "vpsvm/localsvm.hpp"

#include "vpsvm/errors.hpp"
#include "vpsvm/kernel.hpp"
#include "vpsvm/parallel.hpp"
#include "vpsvm/random.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace vpsvm {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return { buf, res.ptr };
}

}  // namespace

std::string timing_csv_header() {
    return "partition,kernel_calc,solver,validation,selection,test,wall,peak_memory_bytes";
}

std::string timing_csv_row(const TimingReport &t) {
    return shortest(t.partition) + ',' + shortest(t.kernel_calc) + ',' + shortest(t.solver) + ',' +
           shortest(t.validation) + ',' + shortest(t.selection) + ',' + shortest(t.test) + ',' + shortest(t.wall) +
           ',' + std::to_string(t.peak_memory_bytes);
}

void validate_config(const TrainConfig &config) {
    if (const auto *size = std::get_if<CellSizeTarget>(&config.target)) {
        if (size->max_cell_size == 0) {
            throw parameter_error(config.method == strategy::chunks ? "chunk size must be positive"
                                                                    : "cell-size must be positive");
        }
    } else {
        const double r = std::get<RadiusTarget>(config.target).max_radius;
        if (config.method == strategy::chunks) {
            throw config_error("max-radius applies to spatial partitions only; chunks need a cell-size");
        }
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw parameter_error("max-radius must be positive and finite");
        }
    }
    if (config.fixed) {
        if (!(config.fixed->gamma > 0.0) || !std::isfinite(config.fixed->gamma)) {
            throw parameter_error("fixed-gamma must be positive and finite");
        }
        if (!(config.fixed->lambda > 0.0) || !std::isfinite(config.fixed->lambda)) {
            throw parameter_error("fixed-lambda must be positive and finite");
        }
    } else {
        if (config.folds < 2) {
            throw parameter_error("folds must be at least 2 for cross-validation");
        }
        if (config.n_lambda == 0 || config.n_gamma == 0) {
            throw parameter_error("grid-lambdas and grid-gammas must be at least 1");
        }
    }
    if (!(config.weights.negative > 0.0) || !(config.weights.positive > 0.0)) {
        throw parameter_error("class weights must be positive");
    }
    if (!(config.solver.tolerance > 0.0)) {
        throw parameter_error("tolerance must be positive");
    }
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell_id) noexcept {
    return derive_seed(seed, stream::folds, { cell_id });
}

double training_radius(const Partition &partition, std::size_t j, const Dataset &data) {
    if (partition.kind == partition_kind::voronoi) {
        return cell_radius(partition, j, data);
    }
    const auto &members = partition.cells[j];
    double r2 = 0.0;
    if (!members.empty()) {
        const auto first = data.features(members.front());
        for (const std::size_t i : members) {
            r2 = std::max(r2, squared_distance(first, data.features(i)));
        }
    }
    return std::sqrt(r2);
}

CellModel train_cell(const Dataset &cell, double radius, std::size_t global_size, const TrainConfig &config,
                     std::uint64_t seed, std::size_t cell_id, CellTimings *timings) {
    CellTimings local;
    CellTimings &t = timings != nullptr ? *timings : local;
    const std::size_t n = cell.size();
    if (n == 0) {
        throw config_error("cannot train on an empty cell");
    }
    CellModel model;
    model.train_size = n;
    model.radius = radius;

    if (auto shortcut = single_class_shortcut(cell.labels(), cell.dim())) {
        model.function = std::move(*shortcut);
        model.constant = true;
        return model;
    }

    if (config.fixed) {
        const double gamma = config.fixed->gamma;
        const double lambda = config.fixed->lambda * static_cast<double>(global_size) / static_cast<double>(n);
        auto start = clock_type::now();
        const KernelMatrix K = kernel_from_prekernel(prekernel(cell.points()), gamma);
        t.kernel_calc += seconds_since(start);
        start = clock_type::now();
        const DualProblem problem(K, cell.labels(), box_bounds(cell.labels(), lambda, config.weights), config.solver);
        const DualSolution sol = solve(problem);
        t.solver += seconds_since(start);
        model.function = make_decision_function(cell.points(), cell.labels(), sol.alpha, gamma);
        model.gamma = gamma;
        model.lambda = lambda;
        model.solver_calls = 1;
        model.prekernel_builds = 1;
        return model;
    }

    const std::size_t k = std::min(config.folds, n);
    const std::size_t largest_fold = (n + k - 1) / k;
    const std::size_t n_tilde = std::max<std::size_t>(2, n - largest_fold);
    const HyperGrid grid = default_grid(n_tilde, radius, cell.dim(), config.n_lambda, config.n_gamma);
    CrossValidationOptions cv;
    cv.folds = k;
    cv.scope = config.scope;
    cv.seed = seed;
    cv.weights = config.weights;
    cv.solver = config.solver;
    cv.workers = 1;
    const ValidationTable table = cross_validate(cell, grid, cv);
    t.kernel_calc += table.kernel_seconds;
    t.solver += table.solver_seconds;
    t.validation += table.validation_seconds;
    if (config.on_validation) {
        config.on_validation(cell_id, table);
    }

    const auto start = clock_type::now();
    Selection sel = select(table);
    t.selection += seconds_since(start);
    model.function = std::move(sel.function);
    model.gamma = sel.gamma;
    model.lambda = sel.lambda;
    model.validation_risk = sel.combined_risk;
    model.solver_calls = table.solver_calls;
    model.prekernel_builds = table.prekernel_builds;
    model.shortcut_skips = table.shortcut_skips;
    return model;
}

LocalModel train_on_partition(const Dataset &data, Partition partition, const TrainConfig &config) {
    validate_config(config);
    const auto wall_start = clock_type::now();
    if (partition.dim != data.dim()) {
        throw config_error("partition dimension " + std::to_string(partition.dim) + " does not match data dimension " +
                           std::to_string(data.dim()));
    }
    const bool chunks = partition.kind == partition_kind::random_chunks;
    if (chunks != (config.method == strategy::chunks)) {
        throw config_error("partition kind does not match the requested strategy");
    }
    for (const auto &cell : partition.cells) {
        for (const std::size_t i : cell) {
            if (i >= data.size()) {
                throw config_error("partition refers to sample " + std::to_string(i) + " but the data has " +
                                   std::to_string(data.size()));
            }
        }
    }

    const std::size_t m = partition.num_cells();
    LocalModel model;
    model.cells.resize(m);
    std::vector<CellTimings> timings(m);
    parallel_for(m, config.workers, [&](std::size_t j) {
        const Dataset cell = data.subset(partition.cells[j]);
        const double r = training_radius(partition, j, data);
        model.cells[j] = train_cell(cell, r, data.size(), config, cell_seed(config.seed, j), j, &timings[j]);
    });

    model.method = config.method;
    model.partition = std::move(partition);
    model.dim = data.dim();
    model.train_size = data.size();
    model.seed = config.seed;
    model.fixed = config.fixed;
    model.folds = config.fixed ? 0 : config.folds;
    model.n_lambda = config.fixed ? 0 : config.n_lambda;
    model.n_gamma = config.fixed ? 0 : config.n_gamma;
    model.scope = config.scope;
    model.weights = config.weights;
    for (const CellTimings &t : timings) {
        model.timings.kernel_calc += t.kernel_calc;
        model.timings.solver += t.solver;
        model.timings.validation += t.validation;
        model.timings.selection += t.selection;
    }
    model.timings.wall = seconds_since(wall_start);
    model.timings.peak_memory_bytes = peak_memory_bytes();
    return model;
}

LocalModel train(const Dataset &data, const TrainConfig &config) {
    validate_config(config);
    if (data.size() < 2) {
        throw config_error("training needs at least 2 samples");
    }
    const auto start = clock_type::now();
    Partition partition;
    if (config.method == strategy::chunks) {
        partition = partition_random_chunks(data, std::get<CellSizeTarget>(config.target).max_cell_size, config.seed);
    } else if (const auto *size = std::get_if<CellSizeTarget>(&config.target)) {
        partition = partition_voronoi_by_size(data, size->max_cell_size, config.seed,
                                              VoronoiOptions{ config.subsample_threshold });
    } else {
        partition = partition_voronoi_by_radius(data, std::get<RadiusTarget>(config.target).max_radius, config.seed);
    }
    const double partition_seconds = seconds_since(start);
    LocalModel model = train_on_partition(data, std::move(partition), config);
    model.timings.partition = partition_seconds;
    model.timings.wall += partition_seconds;
    return model;
}

std::size_t LocalModel::total_support() const noexcept {
    std::size_t total = 0;
    for (const CellModel &c : cells) {
        total += c.function.support_count();
    }
    return total;
}

Prediction predict(const LocalModel &model, std::span<const double> x) {
    if (x.size() != model.dim) {
        throw config_error("input has dimension " + std::to_string(x.size()) + " but the model expects " +
                           std::to_string(model.dim));
    }
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
        throw parameter_error("cannot predict at a non-finite point");
    }
    std::vector<double> scaled;
    if (model.scaler) {
        scaled.assign(x.begin(), x.end());
        model.scaler->transform(scaled);
        x = scaled;
    }
    if (model.cells.empty()) {
        throw usage_error("model has no cells");
    }

    Prediction p;
    if (model.method == strategy::spatial) {
        const std::size_t j = route(model.partition, x);
        const CellDecisionFunction &fn = model.cells[j].function;
        p.value = clip(decision_value(fn, x));
        p.cell = static_cast<std::int64_t>(j);
        p.kernel_evals = fn.support_count();
    } else {
        double sum = 0.0;
        for (const CellModel &c : model.cells) {
            sum += decision_value(c.function, x);
            p.kernel_evals += c.function.support_count();
        }
        p.value = clip(sum / static_cast<double>(model.cells.size()));
    }
    p.label = classify(p.value);
    return p;
}

std::vector<Prediction> predict(const LocalModel &model, const Dataset &data, unsigned workers) {
    std::vector<Prediction> out(data.size());
    constexpr std::size_t block = 256;
    const std::size_t blocks = (data.size() + block - 1) / block;
    parallel_for(blocks, workers, [&](std::size_t b) {
        const std::size_t end = std::min(data.size(), (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            out[i] = predict(model, data.features(i));
        }
    });
    return out;
}

TestReport test_risk(const LocalModel &model, const Dataset &test, unsigned workers) {
    if (test.empty()) {
        throw config_error("test set is empty");
    }
    const auto start = clock_type::now();
    const std::vector<Prediction> preds = predict(model, test, workers);
    TestReport report;
    report.per_cell.resize(model.method == strategy::spatial ? model.cells.size() : 1);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Prediction &p = preds[i];
        const int y = test.label(i);
        RiskEstimate &cell = report.per_cell[p.cell < 0 ? 0 : static_cast<std::size_t>(p.cell)];
        const bool wrong = p.label != y;
        const double h = hinge_loss(y, p.value);
        for (RiskEstimate *r : { &cell, &report.global }) {
            ++r->count;
            r->errors += wrong ? 1 : 0;
            r->hinge_sum += h;
        }
        report.kernel_evals += p.kernel_evals;
    }
    report.seconds = seconds_since(start);
    return report;
}

std::uint64_t peak_memory_bytes() {
    std::ifstream status{ "/proc/self/status" };
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream fields{ line.substr(6) };
            std::uint64_t kb = 0;
            fields >> kb;
            return kb * 1024;
        }
    }
    return 0;
}

}  // namespace vpsvm
