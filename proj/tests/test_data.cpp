#include "vpsvm/data.hpp"
#include "vpsvm/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace vpsvm;

TEST_SUITE("data") {

TEST_CASE("libsvm lines parse to dense samples") {
    const Sample s = parse_libsvm("+1 1:0.5 3:-2", 3);
    CHECK(s.label == 1);
    CHECK(s.features == std::vector<double>{ 0.5, 0.0, -2.0 });

    const Sample empty = parse_libsvm("-1", 2);
    CHECK(empty.label == -1);
    CHECK(empty.features == std::vector<double>{ 0.0, 0.0 });
}

TEST_CASE("malformed libsvm input is a parse error") {
    CHECK_THROWS_AS((void)parse_libsvm("+1 1:x"), parse_error);
    CHECK_THROWS_AS((void)parse_libsvm("2 1:1"), parse_error);
    CHECK_THROWS_AS((void)parse_libsvm("+1 0:1"), parse_error);
    CHECK_THROWS_AS((void)parse_libsvm("+1 3:1 2:1"), parse_error);
    CHECK_THROWS_AS((void)parse_libsvm("+1 4:1", 3), parse_error);
}

TEST_CASE("libsvm round trip on random samples") {
    std::mt19937_64 rng{ 17 };
    std::uniform_real_distribution<double> value{ -1e3, 1e3 };
    std::bernoulli_distribution sparse{ 0.3 };
    for (int t = 0; t < 1000; ++t) {
        Sample s;
        s.label = (t % 2 == 0) ? 1 : -1;
        s.features.resize(1 + t % 7);
        for (double &v : s.features) {
            v = sparse(rng) ? 0.0 : value(rng);
        }
        const Sample back = parse_libsvm(format_libsvm(s), s.features.size());
        CHECK(back == s);
    }
}

TEST_CASE("csv label column") {
    const Sample first = parse_csv("1,0.5,-2.0", label_column::first);
    CHECK(first.label == 1);
    CHECK(first.features == std::vector<double>{ 0.5, -2.0 });
    const Sample last = parse_csv("0.5,-2.0,-1", label_column::last);
    CHECK(last.label == -1);
    CHECK(last.features == std::vector<double>{ 0.5, -2.0 });
}

TEST_CASE("remap-01 maps 0 to -1 and is otherwise rejected") {
    CHECK(parse_csv("0,1.5", label_column::first, true).label == -1);
    CHECK_THROWS_AS((void)parse_csv("0,1.5", label_column::first, false), parse_error);
    CHECK(parse_libsvm("0 1:1", {}, true).label == -1);
}

TEST_CASE("csv and libsvm encodings of one dataset agree") {
    std::mt19937_64 rng{ 5 };
    std::normal_distribution<double> g;
    Dataset d{ 4 };
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(4);
        for (double &v : x) {
            v = (i % 5 == 0) ? 0.0 : g(rng);
        }
        d.add(x, i % 3 == 0 ? -1 : 1);
    }
    std::string libsvm;
    std::string csv;
    for (std::size_t i = 0; i < d.size(); ++i) {
        libsvm += format_libsvm(d.sample(i)) + '\n';
        csv += format_csv(d.sample(i), label_column::last) + '\n';
    }
    ParseOptions lo;
    lo.dim = 4;
    ParseOptions co;
    co.label_col = label_column::last;
    CHECK(parse_dataset(libsvm, file_format::libsvm, lo) == d);
    CHECK(parse_dataset(csv, file_format::csv, co) == d);
}

TEST_CASE("file round trip including gzip-free path and comments") {
    Dataset d{ 2 };
    d.add(std::vector<double>{ 1.0, 2.0 }, 1);
    d.add(std::vector<double>{ -0.25, 0.0 }, -1);
    const auto path = std::filesystem::temp_directory_path() / "vpsvm_data_roundtrip.libsvm";
    write_dataset(path, d, file_format::libsvm);
    ParseOptions o;
    o.dim = 2;
    CHECK(read_dataset(path, file_format::libsvm, o) == d);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_dataset("/nonexistent/vpsvm.txt", file_format::libsvm), io_error);
    CHECK(parse_dataset("# comment\n\n1,2\n", file_format::csv).size() == 1);
}

TEST_CASE("dataset rejects invalid rows") {
    Dataset d{ 2 };
    CHECK_THROWS_AS(d.add(std::vector<double>{ 1.0 }, 1), parameter_error);
    CHECK_THROWS_AS(d.add(std::vector<double>{ 1.0, NAN }, 1), parameter_error);
    CHECK_THROWS_AS(d.add(std::vector<double>{ 1.0, 2.0 }, 0), parameter_error);
}

TEST_CASE("subsample is a seeded draw without replacement") {
    Dataset d{ 1 };
    for (int i = 0; i < 50; ++i) {
        d.add(std::vector<double>{ static_cast<double>(i) }, i % 2 == 0 ? 1 : -1);
    }
    const Dataset all = subsample(d, d.size(), 3);
    std::vector<double> a(all.values().begin(), all.values().end());
    std::sort(a.begin(), a.end());
    CHECK(a == std::vector<double>(d.values().begin(), d.values().end()));
    CHECK(subsample(d, 20, 9) == subsample(d, 20, 9));
    CHECK_THROWS_AS((void)subsample(d, 51, 1), size_error);
}

TEST_CASE("single draws from ten elements are uniform within 5 sigma") {
    std::vector<int> counts(10, 0);
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        ++counts[subsample_indices(10, 1, static_cast<std::uint64_t>(s))[0]];
    }
    const double sigma = std::sqrt(draws * 0.1 * 0.9);
    for (const int c : counts) {
        CHECK(std::abs(c - draws * 0.1) < 5.0 * sigma);
    }
}

TEST_CASE("train/test split sizes and disjointness") {
    Dataset d{ 1 };
    for (int i = 0; i < 101; ++i) {
        d.add(std::vector<double>{ static_cast<double>(i) }, 1);
    }
    const auto [train, test] = train_test_split(d, 0.2, 4);
    CHECK(test.size() == 20);
    CHECK(train.size() == 81);
    std::vector<double> all(train.values().begin(), train.values().end());
    all.insert(all.end(), test.values().begin(), test.values().end());
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<double>(d.values().begin(), d.values().end()));
}

TEST_CASE("min-max scaler maps the training range to [-1, 1]") {
    Dataset d{ 2 };
    d.add(std::vector<double>{ 0.0, 5.0 }, 1);
    d.add(std::vector<double>{ 10.0, 5.0 }, -1);
    const MinMaxScaler s = MinMaxScaler::fit(d);
    const Dataset t = s.transform(d);
    CHECK(t.features(0)[0] == -1.0);
    CHECK(t.features(1)[0] == 1.0);
    // A constant feature maps to 0.
    CHECK(t.features(0)[1] == 0.0);
}

}
