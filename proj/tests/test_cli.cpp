#include "cli.hpp"

#include "vpsvm/localsvm.hpp"
#include "vpsvm/partition.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace vpsvm;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code{ 0 };
    std::string out;
    std::string err;

    [[nodiscard]] std::string value(const std::string &key) const {
        std::istringstream in{ out };
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind(key + '=', 0) == 0) {
                return line.substr(key.size() + 1);
            }
        }
        return {};
    }
};

Run run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path &p) {
    std::ifstream in{ p, std::ios::binary };
    return { std::istreambuf_iterator<char>{ in }, std::istreambuf_iterator<char>{} };
}

std::vector<std::string> lines(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in{ text };
    std::string line;
    while (std::getline(in, line)) {
        out.push_back(line);
    }
    return out;
}

/// Temporary directory with a 5000-sample synthetic training file.
struct Workspace {
    fs::path dir;
    std::string data;

    Workspace() {
        dir = fs::temp_directory_path() / "vpsvm_cli_test";
        fs::create_directories(dir);
        data = (dir / "train.libsvm").string();
        if (!fs::exists(data)) {
            REQUIRE(run({ "toy-sample", "-n", "5000", "--dim", "4", "--seed", "3", "-o", data }).code == 0);
        }
    }
    [[nodiscard]] std::string path(const std::string &name) const { return (dir / name).string(); }
};

std::vector<std::string> train_args(const Workspace &w, const std::string &model, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{ "train", "-i", w.data, "-o", w.path(model), "--cell-size", "500", "--grid-lambdas",
                                "3", "--grid-gammas", "3", "--folds", "3", "--seed", "1" };
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train produces a loadable, deterministic model") {
    const Workspace w;
    const Run a = run(train_args(w, "a.bin", { "--timings", w.path("t.csv"), "--workers", "1" }));
    REQUIRE(a.code == 0);
    const LocalModel m = load_model(w.path("a.bin"));
    CHECK(m.train_size == 5000);
    CHECK(a.value("cells") == std::to_string(m.cells.size()));

    REQUIRE(run(train_args(w, "b.bin", { "--workers", "2" })).code == 0);
    CHECK(slurp(w.path("a.bin")) == slurp(w.path("b.bin")));

    const auto t = lines(slurp(w.path("t.csv")));
    REQUIRE(t.size() == 3);
    CHECK(t[0].rfind("# vpsvm train ", 0) == 0);
    CHECK(t[0].find("cell-size=500") != std::string::npos);
    CHECK(t[1] == timing_csv_header());
}

TEST_CASE("predict on the training file reproduces the training error") {
    const Workspace w;
    const Run t = run(train_args(w, "m.bin"));
    REQUIRE(t.code == 0);
    const Run p = run({ "predict", "-m", w.path("m.bin"), "-i", w.data, "-o", w.path("p.csv") });
    REQUIRE(p.code == 0);
    CHECK(p.value("test_error") == t.value("train_error"));
    const auto rows = lines(slurp(w.path("p.csv")));
    CHECK(rows.size() == 5002);
    CHECK(rows[1] == "value,label,cell");
}

TEST_CASE("prediction counters differ by strategy as the accounting predicts") {
    const Workspace w;
    REQUIRE(run(train_args(w, "s.bin")).code == 0);
    REQUIRE(run(train_args(w, "c.bin", { "--strategy", "chunks" })).code == 0);
    const LocalModel chunks = load_model(w.path("c.bin"));
    const LocalModel spatial = load_model(w.path("s.bin"));
    const Run pc = run({ "predict", "-m", w.path("c.bin"), "-i", w.data });
    const Run ps = run({ "predict", "-m", w.path("s.bin"), "-i", w.data });
    REQUIRE(pc.code == 0);
    REQUIRE(ps.code == 0);
    CHECK(pc.value("kernel_evaluations") == std::to_string(5000 * chunks.total_support()));
    CHECK(pc.value("counted_kernel_evaluations") == pc.value("kernel_evaluations"));
    const Dataset data = read_dataset(w.data, file_format::libsvm, ParseOptions{ false, 4 });
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        expected += spatial.cells[route(spatial.partition, data.features(i))].function.support_count();
    }
    CHECK(ps.value("kernel_evaluations") == std::to_string(expected));
    CHECK(std::stoull(pc.value("kernel_evaluations")) > std::stoull(ps.value("kernel_evaluations")));
}

TEST_CASE("partition then train equals direct training") {
    const Workspace w;
    const Run p = run({ "partition", "-i", w.data, "-o", w.path("p.part"), "--cell-size", "500", "--seed", "1",
                        "--stats", w.path("stats.csv") });
    REQUIRE(p.code == 0);
    CHECK(p.value("samples") == "5000");
    REQUIRE(run(train_args(w, "direct.bin")).code == 0);
    std::vector<std::string> args{ "train", "-i", w.data, "-o", w.path("piped.bin"), "--from-partition", w.path("p.part"),
                                   "--grid-lambdas", "3", "--grid-gammas", "3", "--folds", "3", "--seed", "1" };
    REQUIRE(run(args).code == 0);
    CHECK(slurp(w.path("direct.bin")) == slurp(w.path("piped.bin")));

    std::size_t total = 0;
    const auto rows = lines(slurp(w.path("stats.csv")));
    for (std::size_t i = 2; i < rows.size(); ++i) {
        const auto a = rows[i].find(',');
        total += std::stoul(rows[i].substr(a + 1, rows[i].find(',', a + 1) - a - 1));
    }
    CHECK(total == 5000);
}

TEST_CASE("radius-target partitions pass the radius audit") {
    const Workspace w;
    const Run p = run({ "partition", "-i", w.data, "-o", w.path("r.part"), "--max-radius", "1.5" });
    REQUIRE(p.code == 0);
    CHECK(std::stod(p.value("max_radius")) < 1.5);
    const Dataset data = read_dataset(w.data, file_format::libsvm, ParseOptions{ false, 4 });
    const Partition part = load_partition(w.path("r.part"));
    for (std::size_t j = 0; j < part.num_cells(); ++j) {
        CHECK(cell_radius(part, j, data) < 1.5);
    }
}

TEST_CASE("toy-rate writes runs, summary and slopes") {
    const Workspace w;
    const std::vector<std::string> args{ "toy-rate", "--dims", "4", "--sizes", "64", "128", "--runs", "2", "--n-mc",
                                         "2000", "--c1", "8", "--c2", "1", "--c3", "1.6", "-o", w.path("rate.csv") };
    const Run r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("theoretical_slope=-0.2857142857142857") != std::string::npos);
    const auto rows = lines(slurp(w.path("rate.csv")));
    CHECK(rows[0].rfind("# vpsvm toy-rate", 0) == 0);
    CHECK(rows[1] == "d,n,run,excess_risk,cells,elapsed");
    // 4 run rows, blank, summary header + 2, blank, slope header + 1.
    CHECK(rows.size() == 2 + 4 + 1 + 3 + 1 + 2);

    const Run again = run({ "toy-rate", "--dims", "4", "--sizes", "64", "128", "--runs", "2", "--n-mc", "2000",
                            "--c1", "8", "--c2", "1", "--c3", "1.6", "-o", w.path("rate2.csv") });
    const auto rows2 = lines(slurp(w.path("rate2.csv")));
    REQUIRE(rows2.size() == rows.size());
    for (std::size_t i = 2; i < 6; ++i) {
        // Drop the elapsed column.
        CHECK(rows[i].substr(0, rows[i].rfind(',')) == rows2[i].substr(0, rows2[i].rfind(',')));
    }
}

TEST_CASE("bench reports both strategies") {
    const Run r = run({ "bench", "-n", "1500", "--test-samples", "100", "--cell-size", "500", "--grid-lambdas", "2",
                        "--grid-gammas", "2", "--folds", "3" });
    REQUIRE(r.code == 0);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[2].rfind("spatial,", 0) == 0);
    CHECK(rows[3].rfind("chunks,", 0) == 0);
}

TEST_CASE("exit codes") {
    const Workspace w;
    std::ofstream{ w.path("empty.libsvm") };
    REQUIRE(run(train_args(w, "e.bin")).code == 0);
    CHECK(run({ "predict", "-m", w.path("e.bin"), "-i", w.path("empty.libsvm") }).code == cli::config_failure);

    std::ofstream{ w.path("bad.libsvm") } << "+1 1:0.5\nfoo 1:1\n";
    const Run bad = run({ "train", "-i", w.path("bad.libsvm"), "-o", w.path("x.bin") });
    CHECK(bad.code == cli::parse_failure);
    CHECK(bad.err.find("line 2") != std::string::npos);

    CHECK(run({ "train", "-i", w.path("missing.libsvm"), "-o", w.path("x.bin") }).code == cli::runtime_failure);
    CHECK(run({ "train", "-i", w.data, "-o", w.path("x.bin"), "--cell-size", "10", "--max-radius", "1" }).code ==
          cli::config_failure);
    CHECK(run({ "train", "-i", w.data, "-o", w.path("x.bin"), "--fixed-gamma", "1" }).code == cli::config_failure);
    const Run folds = run({ "train", "-i", w.data, "-o", w.path("x.bin"), "--folds", "1" });
    CHECK(folds.code == cli::config_failure);
    CHECK(folds.err.find("folds") != std::string::npos);
    CHECK(run({ "frobnicate" }).code == cli::config_failure);
    CHECK(run({ "--help" }).code == cli::ok);
    CHECK(run({ "predict", "-m", w.path("e.bin"), "-i", w.data, "--format", "csv" }).code != cli::ok);
}

}
