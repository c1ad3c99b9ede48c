#include "vpsvm/errors.hpp"
#include "vpsvm/kernel.hpp"
#include "vpsvm/localsvm.hpp"
#include "vpsvm/toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace vpsvm;

namespace {

TrainConfig small_config(std::size_t cell_size, std::uint64_t seed = 1) {
    TrainConfig c;
    c.target = CellSizeTarget{ cell_size };
    c.folds = 3;
    c.n_lambda = 3;
    c.n_gamma = 3;
    c.seed = seed;
    c.workers = 1;
    return c;
}

}  // namespace

TEST_SUITE("localsvm") {

TEST_CASE("clipping, hinge loss and sign") {
    CHECK(clip(0.0) == 0.0);
    CHECK(clip(2.0) == 1.0);
    CHECK(clip(-3.0) == -1.0);
    CHECK_THROWS_AS((void)clip(NAN), parameter_error);
    CHECK(hinge_loss(1, 1.0) == 0.0);
    CHECK(hinge_loss(1, 0.5) == 0.5);
    CHECK(hinge_loss(-1, 0.5) == 1.5);
    CHECK(classify(0.0) == 1);
    CHECK(classify(-1e-12) == -1);
    std::mt19937_64 rng{ 3 };
    std::normal_distribution<double> g{ 0.0, 3.0 };
    for (int i = 0; i < 1000; ++i) {
        const double t = g(rng);
        CHECK(clip(clip(t)) == clip(t));
        CHECK(classify(clip(t)) == classify(t));
        CHECK(hinge_loss(1, clip(t)) <= hinge_loss(1, t));
        CHECK(hinge_loss(-1, clip(t)) <= hinge_loss(-1, t));
    }
}

TEST_CASE("single-class data gives constant cells and zero training error") {
    Dataset d{ 2 };
    std::mt19937_64 rng{ 1 };
    std::normal_distribution<double> g;
    for (int i = 0; i < 300; ++i) {
        d.add(std::vector<double>{ g(rng), g(rng) }, 1);
    }
    const LocalModel m = train(d, small_config(50));
    CHECK(m.cells.size() > 1);
    for (const CellModel &c : m.cells) {
        CHECK(c.constant);
        CHECK(c.solver_calls == 0);
    }
    CHECK(test_risk(m, d).global.errors == 0);
}

TEST_CASE("one cell is a plain cross-validated SVM") {
    const Dataset d = ToyDistribution{ 2 }.sample(300, 5);
    TrainConfig config = small_config(1000, 7);
    const LocalModel m = train(d, config);
    REQUIRE(m.cells.size() == 1);

    // Rebuild the same SVM directly from the model selection primitives.
    const double r = cell_radius(m.partition, 0, d);
    const std::size_t k = 3;
    const std::size_t n_tilde = 300 - 100;
    CrossValidationOptions cv;
    cv.folds = k;
    cv.seed = cell_seed(7, 0);
    const ValidationTable table = cross_validate(d, default_grid(n_tilde, r, 2, 3, 3), cv);
    const Selection direct = select(table);
    CHECK(m.cells[0].function == direct.function);
    const std::vector<double> probes = ToyDistribution{ 2 }.sample_features(200, 9);
    for (std::size_t i = 0; i < 200; ++i) {
        const std::span<const double> x{ probes.data() + 2 * i, 2 };
        CHECK(predict(m, x).value == clip(decision_value(direct.function, x)));
    }
}

TEST_CASE("cells are independent of each other's samples") {
    const Dataset d = ToyDistribution{ 2 }.sample(400, 3);
    const Partition p = partition_voronoi_by_size(d, 100, 2);
    REQUIRE(p.num_cells() >= 2);
    const TrainConfig config = small_config(100, 11);
    const LocalModel base = train_on_partition(d, p, config);

    // Add points right at the center of cell 0; they route to cell 0 only.
    Dataset more = d;
    Partition q = p;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> x(p.center(0).begin(), p.center(0).end());
        x[0] += 1e-6 * i;
        REQUIRE(route(p, x) == 0);
        q.cells[0].push_back(more.size());
        more.add(x, i % 2 == 0 ? 1 : -1);
    }
    const LocalModel grown = train_on_partition(more, q, config);
    for (std::size_t j = 1; j < p.num_cells(); ++j) {
        CHECK(grown.cells[j] == base.cells[j]);
    }
}

TEST_CASE("spatial predictions only consult the routed cell") {
    const Dataset d = ToyDistribution{ 2 }.sample(400, 4);
    LocalModel m = train(d, small_config(100, 2));
    const std::vector<double> x{ 0.3, -0.4 };
    const Prediction before = predict(m, x);
    const auto j = static_cast<std::size_t>(before.cell);
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
        if (c != j) {
            m.cells[c].function.constant += 5.0;
            m.cells[c].function.coefficients.assign(m.cells[c].function.coefficients.size(), 7.0);
        }
    }
    CHECK(predict(m, x).value == before.value);
    CHECK(before.kernel_evals == m.cells[j].function.support_count());
}

TEST_CASE("chunk ensembles average and count every support vector") {
    const Dataset d = ToyDistribution{ 2 }.sample(300, 6);
    TrainConfig config = small_config(100, 3);
    config.method = strategy::chunks;
    LocalModel m = train(d, config);
    REQUIRE(m.cells.size() == 3);
    const std::vector<double> x{ -0.1, 0.2 };
    const Prediction p = predict(m, x);
    CHECK(p.cell == -1);
    CHECK(p.kernel_evals == m.total_support());

    for (CellModel &c : m.cells) {
        c.function = m.cells[0].function;
    }
    CHECK(predict(m, x).value == doctest::Approx(clip(decision_value(m.cells[0].function, x))).epsilon(1e-15));
}

TEST_CASE("counted kernel evaluations follow the accounting formula") {
    const Dataset d = ToyDistribution{ 2 }.sample(600, 8);
    const Dataset test = ToyDistribution{ 2 }.sample(100, 9);
    TrainConfig spatial = small_config(150, 4);
    TrainConfig chunks = spatial;
    chunks.method = strategy::chunks;
    const LocalModel ms = train(d, spatial);
    const LocalModel mc = train(d, chunks);

    std::uint64_t expected_spatial = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        expected_spatial += ms.cells[route(ms.partition, test.features(i))].function.support_count();
    }
    auto before = kernel_counts();
    const TestReport rs = test_risk(ms, test);
    CHECK((kernel_counts() - before).kernel_evaluations == expected_spatial);
    CHECK(rs.kernel_evals == expected_spatial);

    before = kernel_counts();
    const TestReport rc = test_risk(mc, test);
    CHECK((kernel_counts() - before).kernel_evaluations == test.size() * mc.total_support());
    CHECK(rc.kernel_evals == test.size() * mc.total_support());
}

TEST_CASE("test risk") {
    const Dataset d = ToyDistribution{ 2 }.sample(500, 10);
    const LocalModel m = train(d, small_config(100, 5));
    const TestReport r = test_risk(m, d);
    std::size_t count = 0;
    std::size_t errors = 0;
    double hinge = 0.0;
    for (const RiskEstimate &c : r.per_cell) {
        count += c.count;
        errors += c.errors;
        hinge += c.hinge_sum;
    }
    CHECK(count == r.global.count);
    CHECK(errors == r.global.errors);
    CHECK(hinge == doctest::Approx(r.global.hinge_sum));
    CHECK_THROWS_AS((void)test_risk(m, Dataset{ 2 }), config_error);

    LocalModel constant = m;
    for (CellModel &c : constant.cells) {
        c.function = *single_class_shortcut(std::vector<int>{ 1 }, 2);
    }
    const double negatives = static_cast<double>(d.size() - d.positives()) / static_cast<double>(d.size());
    CHECK(test_risk(constant, d).global.error() == doctest::Approx(negatives));
}

TEST_CASE("separable clusters are learned without training error") {
    Dataset d{ 2 };
    std::mt19937_64 rng{ 2 };
    std::normal_distribution<double> g{ 0.0, 0.1 };
    for (int i = 0; i < 200; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        d.add(std::vector<double>{ 2.0 * y + g(rng), g(rng) }, y);
    }
    TrainConfig c = small_config(1000);
    c.fixed = FixedParameters{ 1.0, 1e-4 };
    CHECK(test_risk(train(d, c), d).global.errors == 0);
}

TEST_CASE("fixed parameters convert lambda to the cell normalization") {
    const Dataset d = ToyDistribution{ 2 }.sample(400, 12);
    TrainConfig c = small_config(100);
    c.fixed = FixedParameters{ 0.5, 1e-3 };
    const LocalModel m = train(d, c);
    for (const CellModel &cell : m.cells) {
        if (!cell.constant) {
            CHECK(cell.lambda == doctest::Approx(1e-3 * 400.0 / static_cast<double>(cell.train_size)));
            CHECK(cell.gamma == 0.5);
            CHECK(cell.solver_calls == 1);
        }
    }
}

TEST_CASE("per-cell cross-validation counters") {
    const Dataset d = ToyDistribution{ 2 }.sample(450, 13);
    TrainConfig c = small_config(150);
    c.n_lambda = 4;
    c.n_gamma = 4;
    const LocalModel m = train(d, c);
    for (const CellModel &cell : m.cells) {
        if (cell.constant) {
            continue;
        }
        const std::size_t k = std::min<std::size_t>(3, cell.train_size);
        // Folds whose complement holds one class skip both the pre-kernel and the solves.
        CHECK(cell.shortcut_skips % 16 == 0);
        CHECK(cell.prekernel_builds == k - cell.shortcut_skips / 16);
        CHECK(cell.solver_calls + cell.shortcut_skips == k * 16);
    }
}

TEST_CASE("training is deterministic and independent of the worker count") {
    const Dataset d = ToyDistribution{ 2 }.sample(500, 14);
    TrainConfig c = small_config(120, 9);
    const LocalModel a = train(d, c);
    c.workers = 4;
    const LocalModel b = train(d, c);
    CHECK(a == b);
    CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("model files round trip and reject damage") {
    const Dataset d = ToyDistribution{ 2 }.sample(300, 15);
    LocalModel m = train(d, small_config(100));
    m.scaler = MinMaxScaler::fit(d);
    const std::string bytes = serialize_model(m);
    CHECK(deserialize_model(bytes) == m);
    CHECK(serialize_model(deserialize_model(bytes)) == bytes);
    CHECK_THROWS_AS((void)deserialize_model(bytes.substr(0, bytes.size() - 3)), parse_error);
    CHECK_THROWS_AS((void)deserialize_model(bytes + "x"), parse_error);
    CHECK_THROWS_AS((void)deserialize_model("NOTMODEL" + bytes.substr(8)), parse_error);

    const auto path = std::filesystem::temp_directory_path() / "vpsvm_model_test.bin";
    save_model(path, m);
    CHECK(load_model(path) == m);
    std::filesystem::remove(path);
}

TEST_CASE("prediction input checks") {
    const Dataset d = ToyDistribution{ 2 }.sample(100, 16);
    const LocalModel m = train(d, small_config(100));
    CHECK_THROWS_AS((void)predict(m, std::vector<double>{ 1.0 }), config_error);
    CHECK_THROWS_AS((void)predict(m, std::vector<double>{ 1.0, NAN }), parameter_error);
}

TEST_CASE("configuration checks") {
    TrainConfig c;
    c.folds = 1;
    CHECK_THROWS_AS(validate_config(c), parameter_error);
    c = TrainConfig{};
    c.method = strategy::chunks;
    c.target = RadiusTarget{ 1.0 };
    CHECK_THROWS_AS(validate_config(c), config_error);
    c = TrainConfig{};
    c.fixed = FixedParameters{ -1.0, 1.0 };
    CHECK_THROWS_AS(validate_config(c), parameter_error);
    c = TrainConfig{};
    c.weights = ClassWeights{ 0.0, 1.0 };
    CHECK_THROWS_AS(validate_config(c), parameter_error);

    const Dataset d = ToyDistribution{ 2 }.sample(100, 17);
    const Partition chunks = partition_random_chunks(d, 50, 1);
    CHECK_THROWS_AS((void)train_on_partition(d, chunks, small_config(50)), config_error);
}

TEST_CASE("timing report") {
    const Dataset d = ToyDistribution{ 2 }.sample(300, 18);
    const LocalModel m = train(d, small_config(100));
    CHECK(m.timings.wall > 0.0);
    CHECK(m.timings.peak_memory_bytes > 0);
    CHECK(timing_csv_header() == "partition,kernel_calc,solver,validation,selection,test,wall,peak_memory_bytes");
    const std::string row = timing_csv_row(m.timings);
    CHECK(std::count(row.begin(), row.end(), ',') == 7);
}

}
