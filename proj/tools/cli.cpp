#include "cli.hpp"

#include "vpsvm/data.hpp"
#include "vpsvm/errors.hpp"
#include "vpsvm/kernel.hpp"
#include "vpsvm/localsvm.hpp"
#include "vpsvm/log.hpp"
#include "vpsvm/partition.hpp"
#include "vpsvm/random.hpp"
#include "vpsvm/toy.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>

namespace vpsvm::cli {

namespace {

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return { buf, res.ptr };
}

std::ofstream open_output(const std::string &path) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw io_error("cannot open " + path + " for writing");
    }
    return out;
}

/// One comment line holding every option of the subcommand, defaults included.
std::string config_comment(const CLI::App &sub) {
    std::string flat = sub.config_to_str(true, false);
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    while (!flat.empty() && flat.back() == ' ') {
        flat.pop_back();
    }
    return "# vpsvm " + sub.get_name() + ' ' + flat;
}

struct DataFlags {
    std::string format{ "libsvm" };
    std::string label_col{ "first" };
    bool remap_01{ false };

    void add_to(CLI::App &app) {
        app.add_option("--format", format, "Input format")
            ->check(CLI::IsMember({ "libsvm", "csv" }))
            ->capture_default_str();
        app.add_option("--label-column", label_col, "CSV label position")
            ->check(CLI::IsMember({ "first", "last" }))
            ->capture_default_str();
        app.add_flag("--remap-01", remap_01, "Accept labels {0,1} and map 0 to -1");
    }

    [[nodiscard]] file_format file() const { return format == "csv" ? file_format::csv : file_format::libsvm; }
    [[nodiscard]] label_column column() const { return label_col == "last" ? label_column::last : label_column::first; }

    [[nodiscard]] Dataset read(const std::string &path, std::optional<std::size_t> dim = {}) const {
        ParseOptions options;
        options.remap_01 = remap_01;
        options.dim = dim;
        options.label_col = column();
        return read_dataset(path, file(), options);
    }
};

/// Options shared by commands that partition or train.
struct PartitionFlags {
    std::string method{ "spatial" };
    std::optional<std::size_t> cell_size{};
    std::optional<double> max_radius{};
    std::uint64_t seed{ 0 };
    bool scale{ false };

    void add_to(CLI::App &app) {
        app.add_option("--strategy", method, "spatial (Voronoi cells) or chunks (random equal-size chunks)")
            ->check(CLI::IsMember({ "spatial", "chunks" }))
            ->capture_default_str();
        auto *size = app.add_option("--cell-size", cell_size, "Maximum cell or chunk size (default 2000)");
        auto *radius = app.add_option("--max-radius", max_radius, "Maximum Voronoi cell radius");
        size->excludes(radius);
        app.add_option("--seed", seed, "Base seed for every random choice")->capture_default_str();
        app.add_flag("--scale", scale, "Min-max scale each feature to [-1, 1] before partitioning");
    }

    [[nodiscard]] strategy kind() const { return method == "chunks" ? strategy::chunks : strategy::spatial; }

    [[nodiscard]] PartitionTarget target() const {
        if (max_radius) {
            return RadiusTarget{ *max_radius };
        }
        return CellSizeTarget{ cell_size.value_or(2000) };
    }
};

struct TrainFlags {
    std::string input;
    std::string model;
    std::string timings;
    std::string cell_report;
    std::string dump_validation;
    std::string from_partition;
    DataFlags data;
    PartitionFlags part;
    std::optional<double> fixed_gamma{};
    std::optional<double> fixed_lambda{};
    std::size_t folds{ 5 };
    std::size_t grid_lambdas{ 10 };
    std::size_t grid_gammas{ 10 };
    std::string scope{ "cell" };
    std::optional<double> weight_neg{};
    double tolerance{ 1e-3 };
    std::uint64_t max_iter{ 0 };
    unsigned workers{ 0 };
};

void add_train_options(CLI::App &app, TrainFlags &f) {
    f.part.add_to(app);
    auto *gamma = app.add_option("--fixed-gamma", f.fixed_gamma, "Use this kernel width in every cell, no cross-validation");
    auto *lambda = app.add_option("--fixed-lambda", f.fixed_lambda,
                                  "Regularization for every cell, normalized by the full training size");
    gamma->needs(lambda);
    lambda->needs(gamma);
    app.add_option("--folds", f.folds, "Cross-validation folds")->capture_default_str();
    app.add_option("--grid-lambdas", f.grid_lambdas, "Number of lambda grid values")->capture_default_str();
    app.add_option("--grid-gammas", f.grid_gammas, "Number of gamma grid values")->capture_default_str();
    app.add_option("--selection-scope", f.scope,
                   "Risk minimized by selection: cell (combined function on the whole cell) or held-out "
                   "(fold-weighted held-out risks)")
        ->check(CLI::IsMember({ "cell", "held-out" }))
        ->capture_default_str();
    app.add_option("--weight-neg", f.weight_neg,
                   "Class weighting w: negatives get w, positives 1 - w (default: both 1)")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--tolerance", f.tolerance, "Solver KKT tolerance")->capture_default_str();
    app.add_option("--max-iter", f.max_iter, "Solver iteration cap (0: 100000 per cell sample)")->capture_default_str();
    app.add_option("--workers", f.workers, "Worker threads (0: all cores)")->capture_default_str();
}

TrainConfig make_train_config(const TrainFlags &f) {
    TrainConfig config;
    config.method = f.part.kind();
    config.target = f.part.target();
    if (f.fixed_gamma) {
        config.fixed = FixedParameters{ *f.fixed_gamma, *f.fixed_lambda };
    }
    config.folds = f.folds;
    config.n_lambda = f.grid_lambdas;
    config.n_gamma = f.grid_gammas;
    config.scope = f.scope == "held-out" ? selection_scope::held_out : selection_scope::cell;
    if (f.weight_neg) {
        config.weights = ClassWeights{ *f.weight_neg, 1.0 - *f.weight_neg };
    }
    config.solver.tolerance = f.tolerance;
    config.solver.max_iterations = f.max_iter;
    config.seed = f.part.seed;
    config.workers = f.workers;
    return config;
}

/// Applies --scale, returning the scaler used.
std::optional<MinMaxScaler> maybe_scale(Dataset &data, bool scale) {
    if (!scale) {
        return std::nullopt;
    }
    MinMaxScaler scaler = MinMaxScaler::fit(data);
    data = scaler.transform(data);
    return scaler;
}

int cmd_train(const CLI::App &sub, const TrainFlags &f, std::ostream &out) {
    Dataset data = f.data.read(f.input);
    TrainConfig config = make_train_config(f);
    const std::optional<MinMaxScaler> scaler = maybe_scale(data, f.part.scale);

    std::mutex dump_mutex;
    std::map<std::size_t, std::string> dumps;
    if (!f.dump_validation.empty()) {
        config.on_validation = [&](std::size_t cell, const ValidationTable &table) {
            std::ostringstream rows;
            write_validation_rows(rows, cell, table);
            const std::lock_guard lock{ dump_mutex };
            dumps[cell] = rows.str();
        };
    }

    LocalModel model;
    if (!f.from_partition.empty()) {
        if (f.part.cell_size || f.part.max_radius) {
            throw config_error("--from-partition already fixes the cells; drop --cell-size/--max-radius");
        }
        model = train_on_partition(data, load_partition(f.from_partition), config);
    } else {
        model = train(data, config);
    }
    model.scaler = scaler;
    save_model(f.model, model);

    const std::string comment = config_comment(sub);
    if (!f.timings.empty()) {
        std::ofstream t = open_output(f.timings);
        t << comment << '\n' << timing_csv_header() << '\n' << timing_csv_row(model.timings) << '\n';
    }
    if (!f.dump_validation.empty()) {
        std::ofstream v = open_output(f.dump_validation);
        v << comment << "\ncell,gamma,lambda,fold,risk\n";
        for (const auto &[cell, rows] : dumps) {
            v << rows;
        }
    }
    if (!f.cell_report.empty()) {
        std::ofstream c = open_output(f.cell_report);
        c << comment << "\ncell,size,radius,gamma,lambda_cell,lambda_global,support,constant,validation_risk\n";
        for (std::size_t j = 0; j < model.cells.size(); ++j) {
            const CellModel &m = model.cells[j];
            const double global = m.lambda * static_cast<double>(m.train_size) / static_cast<double>(model.train_size);
            c << j << ',' << m.train_size << ',' << num(m.radius) << ',' << num(m.gamma) << ',' << num(m.lambda) << ','
              << num(global) << ',' << m.function.support_count() << ',' << (m.constant ? 1 : 0) << ','
              << num(m.validation_risk) << '\n';
        }
    }

    // The model scales raw inputs itself, so evaluate on unscaled rows.
    const Dataset raw = scaler ? f.data.read(f.input) : std::move(data);
    const TestReport train_report = test_risk(model, raw, config.workers);
    out << "cells=" << model.cells.size() << '\n'
        << "support=" << model.total_support() << '\n'
        << "train_samples=" << raw.size() << '\n'
        << "train_error=" << num(train_report.global.error()) << '\n'
        << "train_hinge=" << num(train_report.global.hinge()) << '\n'
        << "wall_seconds=" << num(model.timings.wall) << '\n';
    return ok;
}

struct PredictFlags {
    std::string model;
    std::string input;
    std::string output;
    DataFlags data;
    unsigned workers{ 0 };
};

int cmd_predict(const CLI::App &sub, const PredictFlags &f, std::ostream &out) {
    const LocalModel model = load_model(f.model);
    const Dataset test = f.data.read(f.input, f.data.file() == file_format::libsvm ? std::optional{ model.dim } : std::nullopt);
    if (test.empty()) {
        throw config_error("test file " + f.input + " holds no samples");
    }
    if (test.dim() != model.dim) {
        throw config_error("test data has dimension " + std::to_string(test.dim()) + " but the model expects " +
                           std::to_string(model.dim));
    }
    const auto before = kernel_counts();
    const auto start = std::chrono::steady_clock::now();
    const std::vector<Prediction> preds = predict(model, test, f.workers);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::uint64_t counted = (kernel_counts() - before).kernel_evaluations;

    std::uint64_t evals = 0;
    std::size_t errors = 0;
    double hinge = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        evals += preds[i].kernel_evals;
        errors += preds[i].label != test.label(i) ? 1 : 0;
        hinge += hinge_loss(test.label(i), preds[i].value);
    }
    if (!f.output.empty()) {
        std::ofstream o = open_output(f.output);
        o << config_comment(sub) << "\nvalue,label,cell\n";
        for (const Prediction &p : preds) {
            o << num(p.value) << ',' << p.label << ',' << p.cell << '\n';
        }
    }
    const auto n = static_cast<double>(test.size());
    out << "samples=" << test.size() << '\n'
        << "test_error=" << num(static_cast<double>(errors) / n) << '\n'
        << "test_hinge=" << num(hinge / n) << '\n'
        << "kernel_evaluations=" << evals << '\n'
        << "counted_kernel_evaluations=" << counted << '\n'
        << "kernel_evaluations_per_sample=" << num(static_cast<double>(evals) / n) << '\n'
        << "seconds=" << num(seconds) << '\n';
    return ok;
}

struct PartitionCmdFlags {
    std::string input;
    std::string output;
    std::string stats;
    DataFlags data;
    PartitionFlags part;
};

int cmd_partition(const CLI::App &sub, const PartitionCmdFlags &f, std::ostream &out) {
    Dataset data = f.data.read(f.input);
    maybe_scale(data, f.part.scale);
    Partition partition;
    const PartitionTarget target = f.part.target();
    if (f.part.kind() == strategy::chunks) {
        if (f.part.max_radius) {
            throw config_error("max-radius applies to spatial partitions only; chunks need a cell-size");
        }
        partition = partition_random_chunks(data, std::get<CellSizeTarget>(target).max_cell_size, f.part.seed);
    } else if (const auto *size = std::get_if<CellSizeTarget>(&target)) {
        partition = partition_voronoi_by_size(data, size->max_cell_size, f.part.seed);
    } else {
        partition = partition_voronoi_by_radius(data, std::get<RadiusTarget>(target).max_radius, f.part.seed);
    }
    save_partition(f.output, partition);

    const PartitionStats stats = partition_stats(partition, data);
    std::size_t total = 0;
    for (const CellStats &c : stats.cells) {
        total += c.size;
    }
    if (!f.stats.empty()) {
        std::ofstream s = open_output(f.stats);
        s << config_comment(sub) << "\ncell,size,radius,positives,negatives\n";
        for (std::size_t j = 0; j < stats.cells.size(); ++j) {
            const CellStats &c = stats.cells[j];
            s << j << ',' << c.size << ',' << num(c.radius) << ',' << c.positives << ',' << c.negatives << '\n';
        }
    }
    out << "cells=" << partition.num_cells() << '\n'
        << "samples=" << total << '\n'
        << "max_radius=" << num(stats.max_radius) << '\n'
        << "covering_bound=" << num(stats.covering_bound) << '\n'
        << "covering_condition=" << (stats.covering_condition ? "true" : "false") << '\n';
    return ok;
}

struct ToyRateFlags {
    std::vector<std::size_t> dims{ 4 };
    std::vector<std::size_t> sizes{ 1024, 2048, 4096, 8192, 16384 };
    std::size_t runs{ 5 };
    std::uint64_t seed{ 0 };
    std::size_t n_mc{ 100000 };
    std::optional<double> c1{};
    std::optional<double> c2{};
    std::optional<double> c3{};
    double tolerance{ 1e-3 };
    unsigned workers{ 0 };
    std::string output;
};

int cmd_toy_rate(const CLI::App &sub, const ToyRateFlags &f, std::ostream &out) {
    RateOptions options;
    options.dims = f.dims;
    options.sizes = f.sizes;
    options.runs = f.runs;
    options.seed = f.seed;
    options.n_mc = f.n_mc;
    if (f.c1) {
        options.constants = RateConstants{ *f.c1, *f.c2, *f.c3 };
    }
    options.solver_tolerance = f.tolerance;
    options.workers = f.workers;
    const RateExperiment result = rate_experiment(options);
    if (!f.output.empty()) {
        std::ofstream o = open_output(f.output);
        o << config_comment(sub) << '\n';
        write_rate_csv(o, result);
    }
    for (std::size_t i = 0; i < result.slopes.size(); ++i) {
        const RateSlope &s = result.slopes[i];
        const RateConstants &c = result.constants[i];
        out << "d=" << s.d << " fitted_slope=" << num(s.fitted) << " theoretical_slope=" << num(s.theoretical)
            << " decreasing=" << (s.decreasing ? "true" : "false") << " c1=" << num(c.c1) << " c2=" << num(c.c2)
            << " c3=" << num(c.c3) << '\n';
    }
    return ok;
}

struct ToySampleFlags {
    std::size_t dim{ 4 };
    std::size_t n{ 1000 };
    std::uint64_t seed{ 0 };
    std::string output;
    DataFlags data;
};

int cmd_toy_sample(const ToySampleFlags &f, std::ostream &out) {
    const ToyDistribution dist{ f.dim };
    const Dataset data = dist.sample(f.n, f.seed);
    write_dataset(f.output, data, f.data.file(), f.data.column());
    out << "samples=" << data.size() << '\n' << "positives=" << data.positives() << '\n';
    return ok;
}

struct BenchFlags {
    TrainFlags train;
    std::size_t dim{ 4 };
    std::size_t n{ 20000 };
    std::size_t test_n{ 1000 };
    std::string output;
};

int cmd_bench(const CLI::App &sub, BenchFlags &f, std::ostream &out) {
    Dataset data;
    Dataset test;
    if (!f.train.input.empty()) {
        data = f.train.data.read(f.train.input);
        auto split = train_test_split(data, 0.1, derive_seed(f.train.part.seed, stream::misc));
        data = std::move(split.first);
        test = std::move(split.second);
    } else {
        const ToyDistribution dist{ f.dim };
        data = dist.sample(f.n, derive_seed(f.train.part.seed, stream::toy_train));
        test = dist.sample(f.test_n, derive_seed(f.train.part.seed, stream::toy_eval));
    }
    if (f.train.part.max_radius) {
        throw config_error("bench compares spatial cells with chunks and needs --cell-size");
    }
    std::ostringstream csv;
    csv << config_comment(sub) << '\n'
        << "strategy,n,cells,support,prekernel_builds,kernel_matrix_entries,solver_calls,test_samples,"
           "kernel_evaluations,evaluations_per_sample,test_error,"
        << timing_csv_header() << '\n';
    for (const strategy s : { strategy::spatial, strategy::chunks }) {
        f.train.part.method = s == strategy::chunks ? "chunks" : "spatial";
        const TrainConfig config = make_train_config(f.train);
        const KernelCounts before = kernel_counts();
        LocalModel model = train(data, config);
        const KernelCounts trained = kernel_counts() - before;
        const TestReport report = test_risk(model, test, config.workers);
        model.timings.test = report.seconds;
        std::uint64_t solver_calls = 0;
        for (const CellModel &c : model.cells) {
            solver_calls += c.solver_calls;
        }
        csv << f.train.part.method << ',' << data.size() << ',' << model.cells.size() << ',' << model.total_support()
            << ',' << trained.prekernel_builds << ',' << trained.kernel_matrix_entries << ',' << solver_calls << ','
            << test.size() << ',' << report.kernel_evals << ','
            << num(static_cast<double>(report.kernel_evals) / static_cast<double>(test.size())) << ','
            << num(report.global.error()) << ',' << timing_csv_row(model.timings) << '\n';
    }
    if (f.output.empty()) {
        out << csv.str();
    } else {
        open_output(f.output) << csv.str();
    }
    return ok;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{ "Spatially decomposed SVMs: Voronoi-partition training, prediction and experiments", "vpsvm" };
    app.require_subcommand(1);

    TrainFlags train_flags;
    CLI::App *train_cmd = app.add_subcommand("train", "Partition the data and train one SVM per cell");
    train_cmd->add_option("-i,--input", train_flags.input, "Training data file")->required();
    train_cmd->add_option("-o,--model", train_flags.model, "Model file to write")->required();
    train_cmd->add_option("--timings", train_flags.timings, "Phase timing CSV");
    train_cmd->add_option("--cell-report", train_flags.cell_report, "Per-cell parameter CSV");
    train_cmd->add_option("--dump-validation", train_flags.dump_validation, "Per-fold validation risk CSV");
    auto *from = train_cmd->add_option("--from-partition", train_flags.from_partition, "Reuse a saved partition");
    train_flags.data.add_to(*train_cmd);
    add_train_options(*train_cmd, train_flags);
    from->excludes("--cell-size")->excludes("--max-radius");

    PredictFlags predict_flags;
    CLI::App *predict_cmd = app.add_subcommand("predict", "Predict labels and report test error and kernel counts");
    predict_cmd->add_option("-m,--model", predict_flags.model, "Model file")->required();
    predict_cmd->add_option("-i,--input", predict_flags.input, "Labeled test data file")->required();
    predict_cmd->add_option("-o,--output", predict_flags.output, "Prediction CSV (value,label,cell)");
    predict_cmd->add_option("--workers", predict_flags.workers, "Worker threads (0: all cores)")->capture_default_str();
    predict_flags.data.add_to(*predict_cmd);

    PartitionCmdFlags partition_flags;
    CLI::App *partition_cmd = app.add_subcommand("partition", "Partition the data only and report cell statistics");
    partition_cmd->add_option("-i,--input", partition_flags.input, "Data file")->required();
    partition_cmd->add_option("-o,--output", partition_flags.output, "Partition file to write")->required();
    partition_cmd->add_option("--stats", partition_flags.stats, "Per-cell statistics CSV");
    partition_flags.data.add_to(*partition_cmd);
    partition_flags.part.add_to(*partition_cmd);

    ToyRateFlags rate_flags;
    CLI::App *rate_cmd = app.add_subcommand("toy-rate", "Learning-rate experiment on the synthetic distribution");
    rate_cmd->add_option("--dims", rate_flags.dims, "Input dimensions")->capture_default_str();
    rate_cmd->add_option("--sizes", rate_flags.sizes, "Training sizes")->capture_default_str();
    rate_cmd->add_option("--runs", rate_flags.runs, "Runs per size")->capture_default_str();
    rate_cmd->add_option("--seed", rate_flags.seed, "Base seed")->capture_default_str();
    rate_cmd->add_option("--n-mc", rate_flags.n_mc, "Monte-Carlo samples per excess-risk estimate")->capture_default_str();
    auto *c1 = rate_cmd->add_option("--c1", rate_flags.c1, "Radius constant (skips calibration)");
    auto *c2 = rate_cmd->add_option("--c2", rate_flags.c2, "Lambda constant");
    auto *c3 = rate_cmd->add_option("--c3", rate_flags.c3, "Gamma constant");
    c1->needs(c2)->needs(c3);
    c2->needs(c1);
    c3->needs(c1);
    rate_cmd->add_option("--tolerance", rate_flags.tolerance, "Solver KKT tolerance")->capture_default_str();
    rate_cmd->add_option("--workers", rate_flags.workers, "Worker threads (0: all cores)")->capture_default_str();
    rate_cmd->add_option("-o,--output", rate_flags.output, "Results CSV");

    ToySampleFlags sample_flags;
    CLI::App *sample_cmd = app.add_subcommand("toy-sample", "Write a labeled sample of the synthetic distribution");
    sample_cmd->add_option("--dim", sample_flags.dim, "Input dimension")->capture_default_str();
    sample_cmd->add_option("-n,--samples", sample_flags.n, "Number of samples")->capture_default_str();
    sample_cmd->add_option("--seed", sample_flags.seed, "Seed")->capture_default_str();
    sample_cmd->add_option("-o,--output", sample_flags.output, "Output file")->required();
    sample_flags.data.add_to(*sample_cmd);

    BenchFlags bench_flags;
    CLI::App *bench_cmd = app.add_subcommand("bench", "Train spatial and chunk models and report counters and timings");
    bench_cmd->add_option("-i,--input", bench_flags.train.input, "Data file (default: synthetic sample)");
    bench_cmd->add_option("--dim", bench_flags.dim, "Synthetic input dimension")->capture_default_str();
    bench_cmd->add_option("-n,--samples", bench_flags.n, "Synthetic training size")->capture_default_str();
    bench_cmd->add_option("--test-samples", bench_flags.test_n, "Synthetic test size")->capture_default_str();
    bench_cmd->add_option("-o,--output", bench_flags.output, "Results CSV (default: stdout)");
    bench_flags.train.data.add_to(*bench_cmd);
    add_train_options(*bench_cmd, bench_flags.train);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return config_failure;
    }

    const auto previous = set_warning_sink([&err](std::string_view msg) { err << "warning: " << msg << '\n'; });
    int code = ok;
    try {
        if (*train_cmd) {
            code = cmd_train(*train_cmd, train_flags, out);
        } else if (*predict_cmd) {
            code = cmd_predict(*predict_cmd, predict_flags, out);
        } else if (*partition_cmd) {
            code = cmd_partition(*partition_cmd, partition_flags, out);
        } else if (*rate_cmd) {
            code = cmd_toy_rate(*rate_cmd, rate_flags, out);
        } else if (*sample_cmd) {
            code = cmd_toy_sample(sample_flags, out);
        } else if (*bench_cmd) {
            code = cmd_bench(*bench_cmd, bench_flags, out);
        }
    } catch (const parse_error &e) {
        err << "parse error: " << e.what() << '\n';
        code = parse_failure;
    } catch (const config_error &e) {
        err << "config error: " << e.what() << '\n';
        code = config_failure;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        code = runtime_failure;
    }
    set_warning_sink(previous);
    return code;
}

}  // namespace vpsvm::cli
