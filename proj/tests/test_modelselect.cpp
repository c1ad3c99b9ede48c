#include "vpsvm/errors.hpp"
#include "vpsvm/loss.hpp"
#include "vpsvm/modelselect.hpp"
#include "vpsvm/toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace vpsvm;

namespace {

Dataset toy_cell(std::size_t n, std::uint64_t seed) { return ToyDistribution{ 2 }.sample(n, seed); }

CrossValidationOptions cv_options(std::size_t k, std::uint64_t seed) {
    CrossValidationOptions o;
    o.folds = k;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_SUITE("modelselect") {

TEST_CASE("default grid endpoints") {
    const HyperGrid g = default_grid(1000, 1.0, 3);
    REQUIRE(g.lambdas.size() == 10);
    REQUIRE(g.gammas.size() == 10);
    CHECK(g.lambdas.front() == 0.01 / 1000.0);
    CHECK(g.lambdas.back() == 0.001 / 1000.0);
    CHECK(g.gammas.front() == 5.0);
    CHECK(g.gammas.back() == 0.2 / 10.0);
    CHECK(g.lambdas.front() == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(g.lambdas.back() == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(g.gammas.back() == doctest::Approx(0.02).epsilon(1e-15));
    CHECK_NOTHROW(validate_grid(g));

    const HyperGrid one = default_grid(1000, 1.0, 3, 1, 1);
    CHECK(one.lambdas == std::vector<double>{ 0.01 / 1000.0 });
    CHECK(one.gammas == std::vector<double>{ 5.0 });
}

TEST_CASE("geometric sequences have constant ratio") {
    const auto s = geometric_sequence(8.0, 1.0, 4);
    CHECK(s.front() == 8.0);
    CHECK(s.back() == 1.0);
    CHECK(s[1] == doctest::Approx(4.0));
    CHECK(s[2] == doctest::Approx(2.0));
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(validate_grid(HyperGrid{ {}, { 1.0 } }), parameter_error);
    CHECK_THROWS_AS(validate_grid(HyperGrid{ { 1.0, 2.0 }, { 1.0 } }), parameter_error);
    CHECK_THROWS_AS(validate_grid(HyperGrid{ { 1.0 }, { -1.0 } }), parameter_error);
}

TEST_CASE("folds partition the indices into near-equal sorted parts") {
    const FoldSplit s = make_folds(23, 5, 3);
    REQUIRE(s.size() == 5);
    std::vector<std::size_t> all;
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(std::is_sorted(s.folds[l].begin(), s.folds[l].end()));
        CHECK(s.folds[l].size() >= 4);
        CHECK(s.folds[l].size() <= 5);
        CHECK(s.complement(l).size() == 23 - s.folds[l].size());
        all.insert(all.end(), s.folds[l].begin(), s.folds[l].end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(23);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
    CHECK(make_folds(23, 5, 3).folds == s.folds);
}

TEST_CASE("two folds on four points: two solves, two pre-kernels") {
    Dataset d{ 1 };
    d.add(std::vector<double>{ 0.0 }, 1);
    d.add(std::vector<double>{ 1.0 }, -1);
    d.add(std::vector<double>{ 2.0 }, 1);
    d.add(std::vector<double>{ 3.0 }, -1);
    const HyperGrid grid{ { 0.1 }, { 1.0 } };
    const FoldSplit split = make_folds(4, 2, 0);
    const ValidationTable t = cross_validate(d, grid, cv_options(2, 0));
    CHECK(t.prekernel_builds == 2);
    CHECK(t.solver_calls + t.shortcut_skips == 2);
    CHECK_THROWS_AS((void)cross_validate(d, grid, cv_options(1, 0)), config_error);
    CHECK_THROWS_AS((void)cross_validate(d, grid, cv_options(5, 0)), config_error);
}

TEST_CASE("counter accounting on a real cell") {
    const Dataset d = toy_cell(150, 1);
    const HyperGrid grid = default_grid(120, 1.0, 2, 4, 3);
    const ValidationTable t = cross_validate(d, grid, cv_options(3, 2));
    CHECK(t.prekernel_builds == 3);
    CHECK(t.solver_calls + t.shortcut_skips == 3 * 4 * 3);
    CHECK(t.fold_risks.size() == 36);
    CHECK(t.combined_risks.size() == 12);
}

TEST_CASE("the hinge risk of the zero function is 1") {
    for (const int y : { -1, 1 }) {
        CHECK(hinge_loss(y, clip(0.0)) == 1.0);
    }
    // Fold risks are clipped hinge means, so they lie in [0, 2].
    const ValidationTable t = cross_validate(toy_cell(60, 4), default_grid(48, 1.0, 2, 2, 2), cv_options(5, 1));
    for (const double r : t.fold_risks) {
        CHECK(r >= 0.0);
        CHECK(r <= 2.0);
    }
}

TEST_CASE("tables are reproducible bit for bit") {
    const Dataset d = toy_cell(120, 5);
    const HyperGrid grid = default_grid(96, 1.0, 2, 3, 3);
    const ValidationTable a = cross_validate(d, grid, cv_options(5, 9));
    CrossValidationOptions parallel = cv_options(5, 9);
    parallel.workers = 3;
    const ValidationTable b = cross_validate(d, grid, parallel);
    CHECK(a.fold_risks == b.fold_risks);
    CHECK(a.combined_risks == b.combined_risks);
    CHECK(a.alphas == b.alphas);
}

TEST_CASE("fold weights") {
    const std::vector<double> equal{ 0.2, 0.2, 0.2, 0.2 };
    for (const double w : fold_weights(equal)) {
        CHECK(w == doctest::Approx(0.25));
    }
    const std::vector<double> risks{ 0.1, 0.3 };
    const auto w = fold_weights(risks);
    // T = mean risk = 0.2.
    CHECK(w[0] / w[1] == doctest::Approx(std::exp(0.2 / 0.2)));
    CHECK(w[0] + w[1] == doctest::Approx(1.0));
    const std::vector<double> zero{ 0.0, 0.0 };
    CHECK(fold_weights(zero)[0] == doctest::Approx(0.5));
}

TEST_CASE("combination is the weighted sum of fold functions") {
    const Dataset d = toy_cell(100, 6);
    const HyperGrid grid = default_grid(80, 1.0, 2, 2, 2);
    const ValidationTable t = cross_validate(d, grid, cv_options(5, 3));
    std::vector<CellDecisionFunction> fs;
    std::vector<double> rs;
    for (std::size_t f = 0; f < 5; ++f) {
        fs.push_back(t.fold_function(1, 0, f));
        rs.push_back(t.fold_risk(1, 0, f));
    }
    const CellDecisionFunction combined = combine_folds(fs, rs);
    const auto w = fold_weights(rs);
    std::size_t total_support = 0;
    for (const auto &f : fs) {
        total_support += f.support_count();
    }
    CHECK(combined.support_count() <= total_support);
    const ToyDistribution dist{ 2 };
    const std::vector<double> probes = dist.sample_features(50, 11);
    for (std::size_t i = 0; i < 50; ++i) {
        const std::span<const double> x{ probes.data() + 2 * i, 2 };
        double direct = 0.0;
        for (std::size_t f = 0; f < 5; ++f) {
            direct += w[f] * decision_value(fs[f], x);
        }
        CHECK(decision_value(combined, x) == doctest::Approx(direct).epsilon(1e-12));
    }

    const std::vector<CellDecisionFunction> single{ fs[0] };
    const std::vector<double> one{ 0.4 };
    const CellDecisionFunction same = combine_folds(single, one);
    for (std::size_t i = 0; i < 10; ++i) {
        const std::span<const double> x{ probes.data() + 2 * i, 2 };
        CHECK(decision_value(same, x) == doctest::Approx(decision_value(fs[0], x)).epsilon(1e-15));
    }
}

TEST_CASE("selection") {
    const Dataset d = toy_cell(100, 7);
    SUBCASE("a 1x1 grid selects its only point") {
        const ValidationTable t = cross_validate(d, HyperGrid{ { 0.001 }, { 0.7 } }, cv_options(4, 1));
        const Selection s = select(t);
        CHECK(s.gamma == 0.7);
        CHECK(s.lambda == 0.001);
    }
    SUBCASE("argmin, rescaling and ties") {
        ValidationTable t = cross_validate(d, default_grid(80, 1.0, 2, 3, 3), cv_options(5, 1));
        const Selection s = select(t);
        CHECK(s.combined_risk == *std::min_element(t.combined_risks.begin(), t.combined_risks.end()));
        CHECK(s.combined_risk == t.combined_risk(s.gamma_index, s.lambda_index));

        ValidationTable scaled = t;
        for (double &r : scaled.combined_risks) {
            r *= 3.7;
        }
        const Selection s2 = select(scaled);
        CHECK(s2.gamma_index == s.gamma_index);
        CHECK(s2.lambda_index == s.lambda_index);

        // A strictly dominated point is never chosen.
        ValidationTable dominated = t;
        dominated.combined_risks[0] = 10.0;
        const Selection s3 = select(dominated);
        CHECK((s3.gamma_index != 0 || s3.lambda_index != 0));

        // Ties go to the largest lambda, then the largest gamma (both index 0).
        ValidationTable tied = t;
        std::fill(tied.combined_risks.begin(), tied.combined_risks.end(), 0.5);
        const Selection s4 = select(tied);
        CHECK(s4.lambda_index == 0);
        CHECK(s4.gamma_index == 0);
    }
}

TEST_CASE("held-out scope combines fold risks by their weights") {
    const Dataset d = toy_cell(90, 8);
    CrossValidationOptions o = cv_options(3, 2);
    o.scope = selection_scope::held_out;
    const ValidationTable t = cross_validate(d, default_grid(60, 1.0, 2, 2, 2), o);
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t l = 0; l < 2; ++l) {
            std::vector<double> rs;
            for (std::size_t f = 0; f < 3; ++f) {
                rs.push_back(t.fold_risk(g, l, f));
            }
            const auto w = fold_weights(rs);
            CHECK(t.combined_risk(g, l) == doctest::Approx(w[0] * rs[0] + w[1] * rs[1] + w[2] * rs[2]));
        }
    }
}

TEST_CASE("validation rows") {
    const ValidationTable t = cross_validate(toy_cell(60, 9), default_grid(40, 1.0, 2, 2, 3), cv_options(3, 1));
    std::ostringstream out;
    write_validation_rows(out, 7, t);
    const std::string s = out.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 2 * 3 * (3 + 1));
    CHECK(s.rfind("7,", 0) == 0);
    CHECK(s.find(",combined,") != std::string::npos);
}

}
