/**
 * @file
 * @brief Synthetic two-Gaussian classification problem with a closed-form
 *        posterior, excess-risk estimation, and the learning-rate experiment
 *        that trains local SVMs with a fixed radius/lambda/gamma schedule.
 *
 * Default distribution on X = [-2, 2]^d: label +1 with probability 0.6 and
 * features from N(0, I) truncated to X; label -1 with features from
 * N(e_1, I/8) truncated to X. Each component is renormalized on X, so the
 * truncation constants enter the posterior.
 */

#pragma once

#include "vpsvm/data.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vpsvm {

/// Isotropic normal with the given mean and per-coordinate variance, truncated to X.
struct GaussianComponent {
    std::vector<double> mean;
    double variance{ 1.0 };
};

class ToyDistribution {
  public:
    static constexpr double lower = -2.0;
    static constexpr double upper = 2.0;
    /// Noise exponent and margin-noise exponent of the default distribution.
    static constexpr double noise_exponent = 1.0;
    static constexpr double margin_noise_exponent = 2.0;

    /// The default distribution in dimension d.
    explicit ToyDistribution(std::size_t d);
    /// P(y = +1) = theta; `positive` and `negative` are the class-conditional components.
    ToyDistribution(double theta, GaussianComponent positive, GaussianComponent negative);

    /// Same joint law with the labels flipped: components and weights trade places.
    [[nodiscard]] ToyDistribution swapped() const;

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] double theta() const noexcept { return theta_; }
    [[nodiscard]] const GaussianComponent &positive() const noexcept { return positive_; }
    [[nodiscard]] const GaussianComponent &negative() const noexcept { return negative_; }

    /// Mass of each component's untruncated law inside X, per coordinate product.
    [[nodiscard]] double positive_normalizer() const noexcept;
    [[nodiscard]] double negative_normalizer() const noexcept;

    /// Log densities of the truncated components. Throw domain_error outside X.
    [[nodiscard]] double log_density_positive(std::span<const double> x) const;
    [[nodiscard]] double log_density_negative(std::span<const double> x) const;

    /// P(y = +1 | x). Throws domain_error outside X.
    [[nodiscard]] double eta(std::span<const double> x) const;
    /// Sign of 2 eta(x) - 1 with sign(0) = +1.
    [[nodiscard]] int bayes_classify(std::span<const double> x) const;

    [[nodiscard]] Dataset sample(std::size_t n, std::uint64_t seed) const;
    /// n draws from the feature marginal, row-major.
    [[nodiscard]] std::vector<double> sample_features(std::size_t n, std::uint64_t seed) const;

  private:
    void check_domain(std::span<const double> x) const;

    std::size_t dim_{ 0 };
    double theta_{ 0.6 };
    GaussianComponent positive_;
    GaussianComponent negative_;
    /// Per-coordinate log normalizers.
    std::vector<double> log_z_positive_;
    std::vector<double> log_z_negative_;
};

struct MonteCarloEstimate {
    double mean{ 0.0 };
    double standard_error{ 0.0 };
    std::size_t samples{ 0 };
};

using point_classifier = std::function<int(std::span<const double>)>;

/**
 * Monte-Carlo estimate of E[|2 eta(x) - 1| 1{f(x) != bayes(x)}], the excess
 * classification risk of the classifier, from n_mc fresh feature draws.
 * The classifier is called from `workers` threads concurrently.
 */
[[nodiscard]] MonteCarloEstimate excess_classification_risk(const ToyDistribution &dist, const point_classifier &classify,
                                                            std::size_t n_mc, std::uint64_t seed, unsigned workers = 1);

struct RateConstants {
    double c1{ 1.0 };
    double c2{ 1.0 };
    double c3{ 1.0 };
    friend bool operator==(const RateConstants &, const RateConstants &) = default;
};

/// Starting constants c1 = 2 sqrt(d), c2 = 1, c3 = c1 / 5.
[[nodiscard]] RateConstants default_rate_constants(std::size_t d);

/// r_n = c1 n^-nu, lambda_n = c2 n^-((2+d)/(3+d)), gamma_n = c3 n^-nu with nu = 1/(3+d).
struct RateSchedule {
    std::size_t d{ 1 };
    RateConstants constants{};

    [[nodiscard]] double nu() const noexcept;
    [[nodiscard]] double radius(std::size_t n) const;
    [[nodiscard]] double lambda(std::size_t n) const;
    [[nodiscard]] double gamma(std::size_t n) const;
    /// Exponent of the guaranteed excess-risk rate, -2/(3+d).
    [[nodiscard]] double theoretical_slope() const noexcept;
};

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] double loglog_slope(std::span<const double> x, std::span<const double> y);

/// mean[i+1] < mean[i] + max(std[i], std[i+1]) for every i.
[[nodiscard]] bool decreasing_within_std(std::span<const double> means, std::span<const double> stds);

struct RateRunResult {
    std::size_t d{ 0 };
    std::size_t n{ 0 };
    std::size_t run{ 0 };
    double excess_risk{ 0.0 };
    std::size_t cells{ 0 };
    double seconds{ 0.0 };
};

struct RateSummary {
    std::size_t d{ 0 };
    std::size_t n{ 0 };
    double mean{ 0.0 };
    double std{ 0.0 };
};

struct RateSlope {
    std::size_t d{ 0 };
    double fitted{ 0.0 };
    double theoretical{ 0.0 };
    bool decreasing{ false };
};

struct CalibrationCandidate {
    RateConstants constants{};
    std::size_t cells{ 0 };
    double excess_risk{ 0.0 };
    bool admissible{ false };
};

struct RateOptions {
    std::vector<std::size_t> dims{ 4 };
    std::vector<std::size_t> sizes{ 1024, 2048, 4096, 8192, 16384 };
    std::size_t runs{ 5 };
    std::uint64_t seed{ 0 };
    std::size_t n_mc{ 100000 };
    /// Skip calibration and use these constants for every dimension.
    std::optional<RateConstants> constants{};
    /// Admissible number of cells at the smallest size during calibration.
    std::size_t min_cells{ 2 };
    std::size_t max_cells{ 10 };
    double solver_tolerance{ 1e-3 };
    unsigned workers{ 0 };
};

struct RateExperiment {
    std::vector<RateRunResult> runs;
    std::vector<RateSummary> summary;
    std::vector<RateSlope> slopes;
    /// Per dimension: the candidates tried (empty when constants were given) and the choice.
    std::vector<std::vector<CalibrationCandidate>> calibration;
    std::vector<RateConstants> constants;
};

/// Three candidate triples around the defaults: c1 scaled by 1, 1.5 and 2, c3 = c1 / 5.
[[nodiscard]] std::vector<RateConstants> calibration_candidates(std::size_t d);

/// Trains one fixed-schedule spatial model and returns its excess risk and cell count.
[[nodiscard]] RateRunResult rate_run(const ToyDistribution &dist, const RateSchedule &schedule, std::size_t n,
                                     std::size_t run, std::uint64_t seed, std::size_t n_mc, double tolerance);

[[nodiscard]] RateExperiment rate_experiment(const RateOptions &options);

/// CSV rows d,n,run,excess_risk,cells,elapsed followed by summary and slope rows.
void write_rate_csv(std::ostream &out, const RateExperiment &experiment);

}  // namespace vpsvm
