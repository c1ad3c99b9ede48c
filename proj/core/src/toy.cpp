#include "vpsvm/toy.hpp"

#include "vpsvm/errors.hpp"
#include "vpsvm/localsvm.hpp"
#include "vpsvm/log.hpp"
#include "vpsvm/parallel.hpp"
#include "vpsvm/random.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

namespace vpsvm {

namespace {

std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return { buf, res.ptr };
}

/// log(Phi(b) - Phi(a)) for a < b.
double log_normal_mass(double a, double b) {
    const double s = std::numbers::sqrt2;
    // evaluate in the tail that keeps precision
    const double mass = a > 0.0 ? 0.5 * (std::erfc(a / s) - std::erfc(b / s)) : 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
    return std::log(mass);
}

std::vector<double> log_normalizers(const GaussianComponent &c) {
    const double sigma = std::sqrt(c.variance);
    std::vector<double> out(c.mean.size());
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
        out[k] = log_normal_mass((ToyDistribution::lower - c.mean[k]) / sigma, (ToyDistribution::upper - c.mean[k]) / sigma);
    }
    return out;
}

double log_truncated_density(const GaussianComponent &c, const std::vector<double> &log_z, std::span<const double> x) {
    const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * c.variance);
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - c.mean[k];
        sum -= 0.5 * diff * diff / c.variance + log_norm + log_z[k];
    }
    return sum;
}

/// Standard normal draws by the polar method; platform independent given the engine.
class NormalSource {
  public:
    explicit NormalSource(rng_type &rng)
        : rng_{ rng } {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform_unit(rng_) - 1.0;
            v = 2.0 * uniform_unit(rng_) - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

  private:
    rng_type &rng_;
    double spare_{ 0.0 };
    bool has_spare_{ false };
};

void draw_truncated(const GaussianComponent &c, NormalSource &normal, double *out) {
    const double sigma = std::sqrt(c.variance);
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
        double v = 0.0;
        do {
            v = c.mean[k] + sigma * normal();
        } while (v < ToyDistribution::lower || v > ToyDistribution::upper);
        out[k] = v;
    }
}

void check_component(const GaussianComponent &c, std::size_t d) {
    if (c.mean.size() != d) {
        throw parameter_error("component means must share one dimension");
    }
    if (!(c.variance > 0.0) || !std::isfinite(c.variance)) {
        throw parameter_error("component variance must be positive and finite");
    }
    for (const double m : c.mean) {
        if (!std::isfinite(m)) {
            throw parameter_error("component mean must be finite");
        }
    }
}

}  // namespace

ToyDistribution::ToyDistribution(std::size_t d)
    : ToyDistribution(0.6, GaussianComponent{ std::vector<double>(d, 0.0), 1.0 },
                      GaussianComponent{ [d] {
                                            std::vector<double> m(d, 0.0);
                                            if (d > 0) {
                                                m[0] = 1.0;
                                            }
                                            return m;
                                        }(),
                                         0.125 }) {}

ToyDistribution::ToyDistribution(double theta, GaussianComponent positive, GaussianComponent negative)
    : dim_{ positive.mean.size() }, theta_{ theta }, positive_{ std::move(positive) }, negative_{ std::move(negative) } {
    if (dim_ == 0) {
        throw parameter_error("toy distribution needs dimension >= 1");
    }
    if (!(theta > 0.0 && theta < 1.0)) {
        throw parameter_error("mixture weight must lie in (0, 1)");
    }
    check_component(positive_, dim_);
    check_component(negative_, dim_);
    log_z_positive_ = log_normalizers(positive_);
    log_z_negative_ = log_normalizers(negative_);
}

ToyDistribution ToyDistribution::swapped() const { return ToyDistribution(1.0 - theta_, negative_, positive_); }

double ToyDistribution::positive_normalizer() const noexcept {
    double s = 0.0;
    for (const double z : log_z_positive_) {
        s += z;
    }
    return std::exp(s);
}

double ToyDistribution::negative_normalizer() const noexcept {
    double s = 0.0;
    for (const double z : log_z_negative_) {
        s += z;
    }
    return std::exp(s);
}

void ToyDistribution::check_domain(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw domain_error("point has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(dim_));
    }
    for (const double v : x) {
        if (!(v >= lower && v <= upper)) {
            throw domain_error("point lies outside [-2, 2]^d");
        }
    }
}

double ToyDistribution::log_density_positive(std::span<const double> x) const {
    check_domain(x);
    return log_truncated_density(positive_, log_z_positive_, x);
}

double ToyDistribution::log_density_negative(std::span<const double> x) const {
    check_domain(x);
    return log_truncated_density(negative_, log_z_negative_, x);
}

double ToyDistribution::eta(std::span<const double> x) const {
    const double a = std::log(theta_) + log_density_positive(x);
    const double b = std::log1p(-theta_) + log_density_negative(x);
    // a / (a + b) in log space: 1 / (1 + exp(b - a))
    const double t = b - a;
    if (t > 0.0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

int ToyDistribution::bayes_classify(std::span<const double> x) const { return 2.0 * eta(x) - 1.0 >= 0.0 ? 1 : -1; }

Dataset ToyDistribution::sample(std::size_t n, std::uint64_t seed) const {
    rng_type rng{ seed };
    NormalSource normal{ rng };
    Dataset data{ dim_ };
    data.reserve(n);
    std::vector<double> x(dim_);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = uniform_unit(rng) < theta_ ? 1 : -1;
        draw_truncated(label > 0 ? positive_ : negative_, normal, x.data());
        data.add(x, label);
    }
    return data;
}

std::vector<double> ToyDistribution::sample_features(std::size_t n, std::uint64_t seed) const {
    rng_type rng{ seed };
    NormalSource normal{ rng };
    std::vector<double> out(n * dim_);
    for (std::size_t i = 0; i < n; ++i) {
        const bool positive = uniform_unit(rng) < theta_;
        draw_truncated(positive ? positive_ : negative_, normal, out.data() + i * dim_);
    }
    return out;
}

MonteCarloEstimate excess_classification_risk(const ToyDistribution &dist, const point_classifier &classify,
                                              std::size_t n_mc, std::uint64_t seed, unsigned workers) {
    if (n_mc == 0) {
        throw parameter_error("Monte-Carlo sample size must be positive");
    }
    const std::vector<double> xs = dist.sample_features(n_mc, seed);
    const PointsView points{ xs, dist.dim() };
    std::vector<double> loss(n_mc);
    constexpr std::size_t block = 1024;
    parallel_for((n_mc + block - 1) / block, workers, [&](std::size_t b) {
        const std::size_t end = std::min(n_mc, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            const auto x = points[i];
            const double eta = dist.eta(x);
            const int bayes = 2.0 * eta - 1.0 >= 0.0 ? 1 : -1;
            loss[i] = classify(x) != bayes ? std::abs(2.0 * eta - 1.0) : 0.0;
        }
    });
    double sum = 0.0;
    double sq = 0.0;
    for (const double v : loss) {
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(n_mc);
    MonteCarloEstimate est;
    est.samples = n_mc;
    est.mean = sum / n;
    if (n_mc > 1) {
        const double var = std::max(0.0, (sq - n * est.mean * est.mean) / (n - 1.0));
        est.standard_error = std::sqrt(var / n);
    }
    return est;
}

RateConstants default_rate_constants(std::size_t d) {
    const double c1 = 2.0 * std::sqrt(static_cast<double>(d));
    return { c1, 1.0, c1 / 5.0 };
}

double RateSchedule::nu() const noexcept { return 1.0 / (3.0 + static_cast<double>(d)); }

double RateSchedule::radius(std::size_t n) const { return constants.c1 * std::pow(static_cast<double>(n), -nu()); }

double RateSchedule::lambda(std::size_t n) const {
    const double dd = static_cast<double>(d);
    return constants.c2 * std::pow(static_cast<double>(n), -(2.0 + dd) / (3.0 + dd));
}

double RateSchedule::gamma(std::size_t n) const { return constants.c3 * std::pow(static_cast<double>(n), -nu()); }

double RateSchedule::theoretical_slope() const noexcept { return -2.0 / (3.0 + static_cast<double>(d)); }

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw parameter_error("slope fit needs at least two (x, y) pairs");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw parameter_error("log-log slope needs positive values");
        }
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) {
        throw parameter_error("slope fit needs distinct x values");
    }
    return sxy / sxx;
}

bool decreasing_within_std(std::span<const double> means, std::span<const double> stds) {
    for (std::size_t i = 0; i + 1 < means.size(); ++i) {
        if (!(means[i + 1] < means[i] + std::max(stds[i], stds[i + 1]))) {
            return false;
        }
    }
    return true;
}

std::vector<RateConstants> calibration_candidates(std::size_t d) {
    const RateConstants base = default_rate_constants(d);
    std::vector<RateConstants> out;
    for (const double scale : { 1.0, 1.5, 2.0 }) {
        const double c1 = base.c1 * scale;
        out.push_back({ c1, base.c2, c1 / 5.0 });
    }
    return out;
}

RateRunResult rate_run(const ToyDistribution &dist, const RateSchedule &schedule, std::size_t n, std::size_t run,
                       std::uint64_t seed, std::size_t n_mc, double tolerance) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = dist.dim();
    const Dataset data = dist.sample(n, derive_seed(seed, stream::toy_train, { d, n, run }));
    TrainConfig config;
    config.method = strategy::spatial;
    config.target = RadiusTarget{ schedule.radius(n) };
    config.fixed = FixedParameters{ schedule.gamma(n), schedule.lambda(n) };
    config.seed = derive_seed(seed, stream::partition, { d, n, run });
    config.solver.tolerance = tolerance;
    config.workers = 1;
    const LocalModel model = train(data, config);
    const MonteCarloEstimate risk = excess_classification_risk(
        dist, [&model](std::span<const double> x) { return predict(model, x).label; }, n_mc,
        derive_seed(seed, stream::toy_eval, { d, n, run }), 1);
    RateRunResult result;
    result.d = d;
    result.n = n;
    result.run = run;
    result.excess_risk = risk.mean;
    result.cells = model.cells.size();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

RateExperiment rate_experiment(const RateOptions &options) {
    if (options.sizes.size() < 2 || !std::is_sorted(options.sizes.begin(), options.sizes.end()) ||
        std::adjacent_find(options.sizes.begin(), options.sizes.end()) != options.sizes.end()) {
        throw parameter_error("rate experiment needs at least two strictly increasing sample sizes");
    }
    if (options.runs == 0) {
        throw parameter_error("rate experiment needs at least one run");
    }
    RateExperiment out;
    for (const std::size_t d : options.dims) {
        const ToyDistribution dist{ d };
        std::vector<CalibrationCandidate> tried;
        RateConstants chosen;
        if (options.constants) {
            chosen = *options.constants;
        } else {
            const std::vector<RateConstants> candidates = calibration_candidates(d);
            tried.resize(candidates.size());
            const std::size_t n0 = options.sizes.front();
            parallel_for(candidates.size(), options.workers, [&](std::size_t i) {
                const RateSchedule schedule{ d, candidates[i] };
                const RateRunResult r = rate_run(dist, schedule, n0, 0, derive_seed(options.seed, stream::calibration, { i }),
                                                 options.n_mc, options.solver_tolerance);
                tried[i] = { candidates[i], r.cells, r.excess_risk,
                             r.cells >= options.min_cells && r.cells <= options.max_cells &&
                                 schedule.gamma(n0) <= schedule.radius(n0) };
            });
            // lowest risk among admissible candidates, else the one closest to the cell range
            std::size_t best = 0;
            auto distance = [&](const CalibrationCandidate &c) -> std::size_t {
                if (c.cells < options.min_cells) {
                    return options.min_cells - c.cells;
                }
                return c.cells > options.max_cells ? c.cells - options.max_cells : 0;
            };
            for (std::size_t i = 1; i < tried.size(); ++i) {
                const bool better = tried[i].admissible != tried[best].admissible
                                        ? tried[i].admissible
                                        : (tried[i].admissible ? tried[i].excess_risk < tried[best].excess_risk
                                                               : distance(tried[i]) < distance(tried[best]));
                if (better) {
                    best = i;
                }
            }
            if (!tried[best].admissible) {
                warn("no calibration candidate gives " + std::to_string(options.min_cells) + "-" +
                     std::to_string(options.max_cells) + " cells at n=" + std::to_string(n0) + " in d=" + std::to_string(d));
            }
            chosen = tried[best].constants;
        }
        const RateSchedule schedule{ d, chosen };

        const std::size_t ns = options.sizes.size();
        std::vector<RateRunResult> results(ns * options.runs);
        parallel_for(results.size(), options.workers, [&](std::size_t t) {
            const std::size_t n = options.sizes[t / options.runs];
            results[t] = rate_run(dist, schedule, n, t % options.runs, options.seed, options.n_mc, options.solver_tolerance);
        });

        std::vector<double> xs;
        std::vector<double> means;
        std::vector<double> stds;
        for (std::size_t s = 0; s < ns; ++s) {
            RateSummary summary;
            summary.d = d;
            summary.n = options.sizes[s];
            for (std::size_t r = 0; r < options.runs; ++r) {
                summary.mean += results[s * options.runs + r].excess_risk;
            }
            summary.mean /= static_cast<double>(options.runs);
            if (options.runs > 1) {
                double ss = 0.0;
                for (std::size_t r = 0; r < options.runs; ++r) {
                    const double diff = results[s * options.runs + r].excess_risk - summary.mean;
                    ss += diff * diff;
                }
                summary.std = std::sqrt(ss / static_cast<double>(options.runs - 1));
            }
            xs.push_back(static_cast<double>(summary.n));
            means.push_back(summary.mean);
            stds.push_back(summary.std);
            out.summary.push_back(summary);
        }
        RateSlope slope;
        slope.d = d;
        slope.theoretical = schedule.theoretical_slope();
        slope.decreasing = decreasing_within_std(means, stds);
        const bool positive = std::all_of(means.begin(), means.end(), [](double m) { return m > 0.0; });
        slope.fitted = positive ? loglog_slope(xs, means) : std::nan("");
        out.slopes.push_back(slope);
        out.runs.insert(out.runs.end(), results.begin(), results.end());
        out.calibration.push_back(std::move(tried));
        out.constants.push_back(chosen);
    }
    return out;
}

void write_rate_csv(std::ostream &out, const RateExperiment &e) {
    out << "d,n,run,excess_risk,cells,elapsed\n";
    for (const RateRunResult &r : e.runs) {
        out << r.d << ',' << r.n << ',' << r.run << ',' << shortest(r.excess_risk) << ',' << r.cells << ','
            << shortest(r.seconds) << '\n';
    }
    out << "\nd,n,mean_excess_risk,std\n";
    for (const RateSummary &s : e.summary) {
        out << s.d << ',' << s.n << ',' << shortest(s.mean) << ',' << shortest(s.std) << '\n';
    }
    out << "\nd,fitted_slope,theoretical_slope,decreasing,c1,c2,c3\n";
    for (std::size_t i = 0; i < e.slopes.size(); ++i) {
        const RateSlope &s = e.slopes[i];
        const RateConstants &c = e.constants[i];
        out << s.d << ',' << shortest(s.fitted) << ',' << shortest(s.theoretical) << ',' << (s.decreasing ? 1 : 0) << ','
            << shortest(c.c1) << ',' << shortest(c.c2) << ',' << shortest(c.c3) << '\n';
    }
}

}  // namespace vpsvm
