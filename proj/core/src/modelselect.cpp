#include "vpsvm/modelselect.hpp"

#include "vpsvm/errors.hpp"
#include "vpsvm/kernel.hpp"
#include "vpsvm/log.hpp"
#include "vpsvm/loss.hpp"
#include "vpsvm/parallel.hpp"
#include "vpsvm/random.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
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

double root(double x, std::size_t d) {
    switch (d) {
    case 1: return x;
    case 2: return std::sqrt(x);
    case 3: return std::cbrt(x);
    default: return std::pow(x, 1.0 / static_cast<double>(d));
    }
}

template <typename Values>
double mean_clipped_hinge(std::span<const int> labels, const Values &values, std::span<const std::size_t> rows) {
    if (rows.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const std::size_t i : rows) {
        sum += hinge_loss(labels[i], clip(values[i]));
    }
    return sum / static_cast<double>(rows.size());
}

struct FoldStats {
    std::uint64_t solver_calls{ 0 };
    std::uint64_t prekernel_builds{ 0 };
    std::uint64_t shortcut_skips{ 0 };
    std::uint64_t unconverged{ 0 };
    double kernel_seconds{ 0.0 };
    double solver_seconds{ 0.0 };
    double validation_seconds{ 0.0 };
};

}  // namespace

std::vector<double> geometric_sequence(double first, double last, std::size_t count) {
    if (count == 0) {
        throw parameter_error("a geometric sequence needs at least one value");
    }
    if (!(first > 0.0) || !(last > 0.0) || !std::isfinite(first) || !std::isfinite(last)) {
        throw parameter_error("geometric sequence endpoints must be positive and finite");
    }
    std::vector<double> out(count);
    out.front() = first;
    if (count == 1) {
        return out;
    }
    const double ratio = last / first;
    const double steps = static_cast<double>(count - 1);
    for (std::size_t i = 1; i + 1 < count; ++i) {
        out[i] = first * std::pow(ratio, static_cast<double>(i) / steps);
    }
    out.back() = last;
    return out;
}

HyperGrid default_grid(std::size_t n_tilde, double r, std::size_t d, std::size_t n_lambda, std::size_t n_gamma) {
    if (n_tilde < 2) {
        throw parameter_error("grid needs at least 2 training samples, got " + std::to_string(n_tilde));
    }
    if (d == 0) {
        throw parameter_error("grid needs dimension >= 1");
    }
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw parameter_error("cell radius must be finite and non-negative");
    }
    if (r == 0.0) {
        r = 64.0 * std::numeric_limits<double>::epsilon();
        warn("cell radius is 0 (all samples coincide); using " + shortest(r) + " for the gamma grid");
    }
    const double nt = static_cast<double>(n_tilde);
    HyperGrid grid;
    grid.lambdas = geometric_sequence(0.01 / nt, 0.001 / nt, n_lambda);
    grid.gammas = geometric_sequence(5.0 * r, 0.2 * r / root(nt, d), n_gamma);
    return grid;
}

void validate_grid(const HyperGrid &grid) {
    auto check = [](const std::vector<double> &values, const char *name) {
        if (values.empty()) {
            throw parameter_error(std::string{ name } + " grid is empty");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
                throw parameter_error(std::string{ name } + " grid values must be positive and finite");
            }
            if (i > 0 && !(values[i] < values[i - 1])) {
                throw parameter_error(std::string{ name } + " grid must be strictly decreasing");
            }
        }
    };
    check(grid.lambdas, "lambda");
    check(grid.gammas, "gamma");
}

std::vector<std::size_t> FoldSplit::complement(std::size_t l) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f != l) {
            out.insert(out.end(), folds[f].begin(), folds[f].end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

FoldSplit make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0) {
        throw parameter_error("number of folds must be positive");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
    rng_type rng{ seed };
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    }
    FoldSplit split;
    split.folds.resize(k);
    for (std::size_t pos = 0; pos < n; ++pos) {
        split.folds[pos % k].push_back(perm[pos]);
    }
    for (auto &fold : split.folds) {
        std::sort(fold.begin(), fold.end());
    }
    return split;
}

CellDecisionFunction ValidationTable::fold_function(std::size_t g, std::size_t l, std::size_t f) const {
    const std::vector<std::size_t> train = split.complement(f);
    std::vector<int> labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        labels[i] = cell.label(train[i]);
    }
    if (constant_fold[slot(g, l, f)]) {
        return *single_class_shortcut(labels, cell.dim());
    }
    const Dataset sub = cell.subset(train);
    return make_decision_function(sub.points(), sub.labels(), alphas[slot(g, l, f)], grid.gammas[g]);
}

ValidationTable cross_validate(const Dataset &cell, const HyperGrid &grid, const CrossValidationOptions &options) {
    validate_grid(grid);
    const std::size_t n = cell.size();
    const std::size_t k = options.folds;
    if (k < 2 || k > n) {
        throw config_error("cross-validation with " + std::to_string(k) + " folds on " + std::to_string(n) +
                           " samples leaves a fold with an empty complement");
    }

    ValidationTable table;
    table.grid = grid;
    table.cell = cell;
    table.split = make_folds(n, k, options.seed);
    const std::size_t n_gamma = grid.gammas.size();
    const std::size_t n_lambda = grid.lambdas.size();
    const std::size_t slots = n_gamma * n_lambda * k;
    table.fold_risks.assign(slots, 0.0);
    table.combined_risks.assign(n_gamma * n_lambda, 0.0);
    table.alphas.resize(slots);
    table.constant_fold.assign(slots, false);

    const PointsView points = cell.points();
    const std::span<const int> labels = cell.labels();
    // decision values of every fold function on every cell sample
    std::vector<std::vector<double>> values(slots);
    std::vector<FoldStats> stats(k);
    std::vector<char> constant_flags(slots, 0);

    parallel_for(k, options.workers, [&](std::size_t f) {
        FoldStats &st = stats[f];
        const std::vector<std::size_t> &held = table.split.folds[f];
        const std::vector<std::size_t> train = table.split.complement(f);
        std::vector<int> train_labels(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            train_labels[i] = labels[train[i]];
        }

        if (const auto shortcut = single_class_shortcut(train_labels, cell.dim())) {
            const auto start = clock_type::now();
            const std::vector<double> constant(n, shortcut->constant);
            const double risk = mean_clipped_hinge(labels, constant, held);
            for (std::size_t g = 0; g < n_gamma; ++g) {
                for (std::size_t l = 0; l < n_lambda; ++l) {
                    const std::size_t s = table.slot(g, l, f);
                    constant_flags[s] = 1;
                    values[s] = constant;
                    table.fold_risks[s] = risk;
                    ++st.shortcut_skips;
                }
            }
            st.validation_seconds += seconds_since(start);
            return;
        }

        auto start = clock_type::now();
        const PreKernelMatrix pre = prekernel(points, train);
        ++st.prekernel_builds;
        const CrossDistanceMatrix cross(points, held, train);
        st.kernel_seconds += seconds_since(start);

        std::vector<double> held_kernel(held.size() * train.size());
        std::vector<double> beta(train.size());
        for (std::size_t g = 0; g < n_gamma; ++g) {
            const double gamma = grid.gammas[g];
            start = clock_type::now();
            const KernelMatrix K = kernel_from_prekernel(pre, gamma);
            for (std::size_t h = 0; h < held.size(); ++h) {
                const auto src = cross.row(h);
                double *dst = held_kernel.data() + h * train.size();
                for (std::size_t j = 0; j < train.size(); ++j) {
                    dst[j] = gaussian_from_squared_distance(src[j], gamma);
                }
            }
            st.kernel_seconds += seconds_since(start);

            const std::vector<double> *warm = nullptr;
            // decreasing C: lambdas are stored descending, so walk them backwards
            for (std::size_t step = 0; step < n_lambda; ++step) {
                const std::size_t l = n_lambda - 1 - step;
                const std::size_t s = table.slot(g, l, f);
                start = clock_type::now();
                const DualProblem problem(K, train_labels, box_bounds(train_labels, grid.lambdas[l], options.weights),
                                          options.solver);
                DualSolution sol = warm != nullptr ? solve(problem, std::span<const double>{ *warm }) : solve(problem);
                ++st.solver_calls;
                if (!sol.converged) {
                    ++st.unconverged;
                }
                st.solver_seconds += seconds_since(start);

                start = clock_type::now();
                std::vector<double> v(n, 0.0);
                const std::vector<double> train_values = training_decision_values(train_labels, sol);
                for (std::size_t i = 0; i < train.size(); ++i) {
                    v[train[i]] = train_values[i];
                    beta[i] = train_labels[i] > 0 ? sol.alpha[i] : -sol.alpha[i];
                }
                for (std::size_t h = 0; h < held.size(); ++h) {
                    const double *row = held_kernel.data() + h * train.size();
                    double sum = 0.0;
                    for (std::size_t j = 0; j < train.size(); ++j) {
                        sum += beta[j] * row[j];
                    }
                    v[held[h]] = sum;
                }
                table.fold_risks[s] = mean_clipped_hinge(labels, v, held);
                values[s] = std::move(v);
                table.alphas[s] = std::move(sol.alpha);
                warm = &table.alphas[s];
                st.validation_seconds += seconds_since(start);
            }
        }
    });

    for (std::size_t s = 0; s < slots; ++s) {
        table.constant_fold[s] = constant_flags[s] != 0;
    }
    for (const FoldStats &st : stats) {
        table.solver_calls += st.solver_calls;
        table.prekernel_builds += st.prekernel_builds;
        table.shortcut_skips += st.shortcut_skips;
        table.unconverged_solves += st.unconverged;
        table.kernel_seconds += st.kernel_seconds;
        table.solver_seconds += st.solver_seconds;
        table.validation_seconds += st.validation_seconds;
    }

    // combined risk on the whole cell, as the weighted sum of the fold functions
    const auto start = clock_type::now();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{ 0 });
    std::vector<double> risks(k);
    std::vector<double> combined(n);
    for (std::size_t g = 0; g < n_gamma; ++g) {
        for (std::size_t l = 0; l < n_lambda; ++l) {
            for (std::size_t f = 0; f < k; ++f) {
                risks[f] = table.fold_risk(g, l, f);
            }
            const std::vector<double> w = fold_weights(risks);
            if (options.scope == selection_scope::held_out) {
                double r = 0.0;
                for (std::size_t f = 0; f < k; ++f) {
                    r += w[f] * risks[f];
                }
                table.combined_risks[g * n_lambda + l] = r;
                continue;
            }
            std::fill(combined.begin(), combined.end(), 0.0);
            for (std::size_t f = 0; f < k; ++f) {
                const std::vector<double> &v = values[table.slot(g, l, f)];
                for (std::size_t i = 0; i < n; ++i) {
                    combined[i] += w[f] * v[i];
                }
            }
            table.combined_risks[g * n_lambda + l] = mean_clipped_hinge(labels, combined, all);
        }
    }
    table.validation_seconds += seconds_since(start);
    return table;
}

std::vector<double> fold_weights(std::span<const double> risks) {
    if (risks.empty()) {
        throw parameter_error("fold weights need at least one risk");
    }
    double mean = 0.0;
    double lowest = risks.front();
    for (const double r : risks) {
        if (!std::isfinite(r)) {
            throw parameter_error("fold risks must be finite");
        }
        mean += r;
        lowest = std::min(lowest, r);
    }
    mean /= static_cast<double>(risks.size());
    const double temperature = mean == 0.0 ? 1.0 : mean;
    std::vector<double> w(risks.size());
    double total = 0.0;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        // shifting by the lowest risk cancels in the normalization
        w[i] = std::exp(-(risks[i] - lowest) / temperature);
        total += w[i];
    }
    for (double &x : w) {
        x /= total;
    }
    return w;
}

CellDecisionFunction combine_folds(std::span<const CellDecisionFunction> functions, std::span<const double> risks) {
    if (functions.empty() || functions.size() != risks.size()) {
        throw parameter_error("combine_folds needs one risk per fold function");
    }
    const std::vector<double> w = fold_weights(risks);

    CellDecisionFunction out;
    out.dim = functions.front().dim;
    out.gamma = functions.front().gamma;
    bool have_gamma = false;
    struct Term {
        const double *x;
        double coefficient;
    };
    std::vector<Term> terms;
    for (std::size_t f = 0; f < functions.size(); ++f) {
        const CellDecisionFunction &fn = functions[f];
        out.constant += w[f] * fn.constant;
        if (fn.support_count() == 0) {
            continue;
        }
        if (!have_gamma) {
            out.gamma = fn.gamma;
            out.dim = fn.dim;
            have_gamma = true;
        } else if (fn.gamma != out.gamma || fn.dim != out.dim) {
            throw parameter_error("fold functions to combine must share gamma and dimension");
        }
        for (std::size_t i = 0; i < fn.support_count(); ++i) {
            terms.push_back({ fn.support_vectors.data() + i * fn.dim, w[f] * fn.coefficients[i] });
        }
    }

    const std::size_t dim = out.dim;
    auto less = [dim](const Term &a, const Term &b) {
        return std::lexicographical_compare(a.x, a.x + dim, b.x, b.x + dim);
    };
    std::stable_sort(terms.begin(), terms.end(), less);
    for (std::size_t i = 0; i < terms.size();) {
        double coefficient = 0.0;
        std::size_t j = i;
        for (; j < terms.size() && std::equal(terms[i].x, terms[i].x + dim, terms[j].x); ++j) {
            coefficient += terms[j].coefficient;
        }
        if (coefficient != 0.0) {
            out.support_vectors.insert(out.support_vectors.end(), terms[i].x, terms[i].x + dim);
            out.coefficients.push_back(coefficient);
        }
        i = j;
    }
    return out;
}

Selection select(const ValidationTable &table) {
    const HyperGrid &grid = table.grid;
    if (grid.size() == 0 || table.combined_risks.size() != grid.size()) {
        throw parameter_error("cannot select from an empty validation table");
    }
    Selection best;
    bool first = true;
    for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
        for (std::size_t l = 0; l < grid.lambdas.size(); ++l) {
            const double risk = table.combined_risk(g, l);
            const double lambda = grid.lambdas[l];
            const double gamma = grid.gammas[g];
            const bool better = first || risk < best.combined_risk ||
                                (risk == best.combined_risk &&
                                 (lambda > best.lambda || (lambda == best.lambda && gamma > best.gamma)));
            if (better) {
                first = false;
                best.gamma_index = g;
                best.lambda_index = l;
                best.gamma = gamma;
                best.lambda = lambda;
                best.combined_risk = risk;
            }
        }
    }
    std::vector<CellDecisionFunction> functions;
    std::vector<double> risks;
    for (std::size_t f = 0; f < table.folds(); ++f) {
        functions.push_back(table.fold_function(best.gamma_index, best.lambda_index, f));
        risks.push_back(table.fold_risk(best.gamma_index, best.lambda_index, f));
    }
    best.function = combine_folds(functions, risks);
    return best;
}

void write_validation_rows(std::ostream &out, std::size_t cell_id, const ValidationTable &table) {
    const HyperGrid &grid = table.grid;
    for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
        for (std::size_t l = 0; l < grid.lambdas.size(); ++l) {
            const std::string prefix =
                std::to_string(cell_id) + ',' + shortest(grid.gammas[g]) + ',' + shortest(grid.lambdas[l]) + ',';
            for (std::size_t f = 0; f < table.folds(); ++f) {
                out << prefix << f << ',' << shortest(table.fold_risk(g, l, f)) << '\n';
            }
            out << prefix << "combined," << shortest(table.combined_risk(g, l)) << '\n';
        }
    }
}

}  // namespace vpsvm
