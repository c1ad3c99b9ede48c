#include "vpsvm/solver.hpp"

#include "vpsvm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <string>

namespace vpsvm {

std::vector<double> box_bounds(std::span<const int> labels, double lambda, const ClassWeights &weights) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw parameter_error("lambda must be positive and finite");
    }
    if (!(weights.negative > 0.0) || !(weights.positive > 0.0)) {
        throw parameter_error("class weights must be positive");
    }
    const double scale = 1.0 / (2.0 * lambda * static_cast<double>(labels.size()));
    std::vector<double> box(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        box[i] = weights.of(labels[i]) * scale;
    }
    return box;
}

DualProblem::DualProblem(const KernelMatrix &k, std::span<const int> y, std::vector<double> upper, SolverOptions opts)
    : kernel{ &k }, labels{ y }, box{ std::move(upper) }, options{ opts } {
    if (k.size() != y.size() || box.size() != y.size()) {
        throw parameter_error("dual problem dimensions disagree");
    }
    for (const double c : box) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw parameter_error("box bounds must be positive and finite");
        }
    }
    if (!(options.tolerance > 0.0)) {
        throw parameter_error("solver tolerance must be positive");
    }
}

double kkt_violation(double alpha, double gradient, double upper) noexcept {
    if (alpha <= 0.0) {
        return gradient > 0.0 ? gradient : 0.0;
    }
    if (alpha >= upper) {
        return gradient < 0.0 ? -gradient : 0.0;
    }
    return std::abs(gradient);
}

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

using Pair = std::pair<double, double>;

/// Exact 1-D step for coordinate i; updates alpha in place, returns the change.
double step_1d(double &alpha, double gradient, double upper, double kii) {
    const double target = kii > 0.0 ? alpha + gradient / kii : (gradient > 0.0 ? upper : 0.0);
    const double updated = std::clamp(target, 0.0, upper);
    const double delta = updated - alpha;
    alpha = updated;
    return delta;
}

/// Objective decrease model -g.d + 1/2 d'Hd of a 2-D step.
double pair_model(double gi, double gj, double a, double b, double q, double di, double dj) {
    return -(gi * di + gj * dj) + 0.5 * (a * di * di + 2.0 * q * di * dj + b * dj * dj);
}

/**
 * Exact minimizer of the 2-D model over the box. If the unconstrained optimum
 * is infeasible the minimum lies on an edge; every edge is a clipped 1-D problem.
 */
Pair step_2d(double &ai, double &aj, double gi, double gj, double ci, double cj, double a, double b, double q) {
    const double det = a * b - q * q;
    const double lo_i = -ai;
    const double hi_i = ci - ai;
    const double lo_j = -aj;
    const double hi_j = cj - aj;
    double di = 0.0;
    double dj = 0.0;
    bool done = false;
    if (det > 1e-12 * a * b) {
        di = (b * gi - q * gj) / det;
        dj = (a * gj - q * gi) / det;
        done = di >= lo_i && di <= hi_i && dj >= lo_j && dj <= hi_j;
    }
    if (!done) {
        double best = std::numeric_limits<double>::infinity();
        auto consider = [&](double x, double y) {
            const double m = pair_model(gi, gj, a, b, q, x, y);
            if (m < best) {
                best = m;
                di = x;
                dj = y;
            }
        };
        for (const double x : { lo_i, hi_i }) {
            const double y = b > 0.0 ? std::clamp((gj - q * x) / b, lo_j, hi_j) : (gj - q * x > 0.0 ? hi_j : lo_j);
            consider(x, y);
        }
        for (const double y : { lo_j, hi_j }) {
            const double x = a > 0.0 ? std::clamp((gi - q * y) / a, lo_i, hi_i) : (gi - q * y > 0.0 ? hi_i : lo_i);
            consider(x, y);
        }
    }
    const double new_i = std::clamp(ai + di, 0.0, ci);
    const double new_j = std::clamp(aj + dj, 0.0, cj);
    const Pair delta{ new_i - ai, new_j - aj };
    ai = new_i;
    aj = new_j;
    return delta;
}

/**
 * Partner for coordinate i: the j whose joint unconstrained Newton step with i
 * promises the largest decrease, skipping j whose step would leave the box at
 * an active bound. npos if no partner qualifies.
 */
std::size_t select_partner(std::size_t i, std::span<const double> row_i, std::span<const std::size_t> active,
                           const std::vector<double> &y, const std::vector<double> &alpha, const std::vector<double> &g,
                           const std::vector<double> &C, const std::vector<double> &diag) {
    const double a = diag[i];
    const double gi = g[i];
    std::size_t partner = npos;
    double best_gain = 0.0;
    for (const std::size_t t : active) {
        if (t == i) {
            continue;
        }
        const double b = diag[t];
        const double q = y[i] * y[t] * row_i[t];
        const double det = a * b - q * q;
        if (!(det > 1e-12 * a * b)) {
            continue;
        }
        const double gt = g[t];
        const double dt = (a * gt - q * gi) / det;
        if ((alpha[t] <= 0.0 && dt < 0.0) || (alpha[t] >= C[t] && dt > 0.0)) {
            continue;
        }
        const double gain = (b * gi * gi - 2.0 * q * gi * gt + a * gt * gt) / det;
        if (gain > best_gain) {
            best_gain = gain;
            partner = t;
        }
    }
    return partner;
}

/// Coordinate at a bound whose gradient pushes further out by more than `margin`.
bool shrinkable(double alpha, double gradient, double upper, double margin) noexcept {
    return (alpha <= 0.0 && gradient < -margin) || (alpha >= upper && gradient > margin);
}

}  // namespace

DualSolution solve(const DualProblem &problem, std::optional<std::span<const double>> warm_start) {
    const KernelMatrix &K = *problem.kernel;
    const std::size_t n = K.size();
    if (!K.finite()) {
        throw parameter_error("kernel matrix has non-finite entries");
    }

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = problem.labels[i] > 0 ? 1.0 : -1.0;
    }
    const std::vector<double> &C = problem.box;

    DualSolution sol;
    sol.alpha.assign(n, 0.0);
    sol.gradient.assign(n, 1.0);
    if (warm_start) {
        if (warm_start->size() != n) {
            throw parameter_error("warm start has wrong length");
        }
        for (std::size_t i = 0; i < n; ++i) {
            sol.alpha[i] = std::clamp((*warm_start)[i], 0.0, C[i]);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double a = sol.alpha[j];
            if (a == 0.0) {
                continue;
            }
            const double s = a * y[j];
            const auto row = K.row(j);
            for (std::size_t i = 0; i < n; ++i) {
                sol.gradient[i] -= s * y[i] * row[i];
            }
        }
    }

    std::vector<double> &alpha = sol.alpha;
    std::vector<double> &g = sol.gradient;
    const std::uint64_t cap = problem.options.max_iterations != 0 ? problem.options.max_iterations
                                                                   : std::uint64_t{ 100000 } * std::max<std::uint64_t>(n, 1);
    const double tol = problem.options.tolerance;
    const bool shrinking = problem.options.shrinking;

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = K(i, i);
    }

    // coordinates currently optimized; the rest sit at a bound and their gradients are stale
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{ 0 });

    std::size_t best = 0;
    double best_violation = 0.0;
    auto rescan = [&]() {
        best_violation = 0.0;
        for (const std::size_t t : active) {
            const double v = kkt_violation(alpha[t], g[t], C[t]);
            if (v > best_violation) {
                best_violation = v;
                best = t;
            }
        }
    };
    // exact gradients for the shrunk coordinates, then reactivate everything
    auto unshrink = [&]() {
        if (active.size() == n) {
            return;
        }
        std::vector<char> is_active(n, 0);
        for (const std::size_t t : active) {
            is_active[t] = 1;
        }
        std::vector<std::size_t> support;
        for (std::size_t s = 0; s < n; ++s) {
            if (alpha[s] != 0.0) {
                support.push_back(s);
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (is_active[t] != 0) {
                continue;
            }
            const auto row = K.row(t);
            double f = 0.0;
            for (const std::size_t s : support) {
                f += alpha[s] * y[s] * row[s];
            }
            g[t] = 1.0 - y[t] * f;
        }
        active.resize(n);
        std::iota(active.begin(), active.end(), std::size_t{ 0 });
    };

    const std::uint64_t shrink_interval = std::min<std::uint64_t>(n, 1000);
    std::uint64_t countdown = shrink_interval;
    bool unshrunk_near_optimum = false;
    rescan();

    std::uint64_t iter = 0;
    while (true) {
        if (best_violation <= tol) {
            if (active.size() == n) {
                break;
            }
            unshrink();
            rescan();
            countdown = shrink_interval;
            continue;
        }
        if (iter >= cap) {
            unshrink();
            rescan();
            sol.converged = best_violation <= tol;
            break;
        }
        if (shrinking) {
            if (!unshrunk_near_optimum && best_violation <= 10.0 * tol) {
                unshrunk_near_optimum = true;
                unshrink();
                rescan();
                countdown = shrink_interval;
                continue;
            }
            if (--countdown == 0) {
                countdown = shrink_interval;
                const double margin = best_violation;
                std::erase_if(active, [&](std::size_t t) { return shrinkable(alpha[t], g[t], C[t], margin); });
            }
        }
        ++iter;
        const std::size_t i = best;
        const auto row_i = K.row(i);
        const std::size_t j = select_partner(i, row_i, active, y, alpha, g, C, diag);

        double delta_i = 0.0;
        double delta_j = 0.0;
        if (j == npos) {
            delta_i = step_1d(alpha[i], g[i], C[i], diag[i]);
        } else {
            const Pair step = step_2d(alpha[i], alpha[j], g[i], g[j], C[i], C[j], diag[i], diag[j],
                                      y[i] * y[j] * row_i[j]);
            delta_i = step.first;
            delta_j = step.second;
        }

        // fused gradient update and next working-set selection
        const double si = delta_i * y[i];
        best_violation = 0.0;
        if (j == npos) {
            for (const std::size_t t : active) {
                g[t] -= y[t] * si * row_i[t];
                const double v = kkt_violation(alpha[t], g[t], C[t]);
                if (v > best_violation) {
                    best_violation = v;
                    best = t;
                }
            }
        } else {
            const double sj = delta_j * y[j];
            const auto row_j = K.row(j);
            for (const std::size_t t : active) {
                g[t] -= y[t] * (si * row_i[t] + sj * row_j[t]);
                const double v = kkt_violation(alpha[t], g[t], C[t]);
                if (v > best_violation) {
                    best_violation = v;
                    best = t;
                }
            }
        }
    }

    sol.iterations = iter;
    sol.max_kkt_violation = best_violation;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        objective += alpha[i] * (1.0 + g[i]);
    }
    sol.dual_objective = 0.5 * objective;
    return sol;
}

double dual_objective(const DualProblem &problem, std::span<const double> alpha) {
    const KernelMatrix &K = *problem.kernel;
    const std::size_t n = K.size();
    double linear = 0.0;
    double quadratic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        linear += alpha[i];
        if (alpha[i] == 0.0) {
            continue;
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += alpha[j] * problem.labels[j] * K(i, j);
        }
        quadratic += alpha[i] * problem.labels[i] * acc;
    }
    return linear - 0.5 * quadratic;
}

double primal_objective(const DualProblem &problem, std::span<const double> alpha) {
    const KernelMatrix &K = *problem.kernel;
    const std::size_t n = K.size();
    double norm = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            f += alpha[j] * problem.labels[j] * K(i, j);
        }
        norm += alpha[i] * problem.labels[i] * f;
        loss += problem.box[i] * std::max(0.0, 1.0 - problem.labels[i] * f);
    }
    return 0.5 * norm + loss;
}

std::vector<double> training_decision_values(std::span<const int> labels, const DualSolution &solution) {
    std::vector<double> f(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        f[i] = (labels[i] > 0 ? 1.0 : -1.0) * (1.0 - solution.gradient[i]);
    }
    return f;
}

CellDecisionFunction make_decision_function(PointsView points, std::span<const int> labels, std::span<const double> alpha,
                                            double gamma) {
    if (!(gamma > 0.0)) {
        throw parameter_error("gamma must be positive");
    }
    CellDecisionFunction fn;
    fn.gamma = gamma;
    fn.dim = points.dim();
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] > 0.0) {
            const auto x = points[i];
            fn.support_vectors.insert(fn.support_vectors.end(), x.begin(), x.end());
            fn.coefficients.push_back(labels[i] > 0 ? alpha[i] : -alpha[i]);
        }
    }
    return fn;
}

double decision_value(const CellDecisionFunction &fn, std::span<const double> x) {
    const PointsView sv = fn.support_points();
    double sum = fn.constant;
    for (std::size_t i = 0; i < fn.coefficients.size(); ++i) {
        sum += fn.coefficients[i] * gaussian_from_squared_distance(squared_distance(sv[i], x), fn.gamma);
    }
    count_kernel_evaluations(fn.coefficients.size());
    return sum;
}

std::optional<CellDecisionFunction> single_class_shortcut(std::span<const int> labels, std::size_t dim) {
    if (labels.empty()) {
        return std::nullopt;
    }
    const int first = labels.front();
    if (!std::all_of(labels.begin(), labels.end(), [first](int l) { return l == first; })) {
        return std::nullopt;
    }
    CellDecisionFunction fn;
    fn.dim = dim;
    fn.constant = first > 0 ? 1.0 : -1.0;
    return fn;
}

}  // namespace vpsvm
