#include "vpsvm/localsvm.hpp"

#include "binary_io.hpp"

#include <string_view>

namespace vpsvm {

namespace {

constexpr std::string_view model_magic = "VPSVMMDL";
constexpr std::uint32_t model_version = 1;

void write_function(detail::ByteWriter &w, const CellDecisionFunction &fn) {
    w.f64(fn.gamma);
    w.u64(fn.dim);
    w.f64(fn.constant);
    w.f64s(fn.support_vectors);
    w.f64s(fn.coefficients);
}

CellDecisionFunction read_function(detail::ByteReader &r) {
    CellDecisionFunction fn;
    fn.gamma = r.f64();
    fn.dim = static_cast<std::size_t>(r.u64());
    fn.constant = r.f64();
    fn.support_vectors = r.f64s();
    fn.coefficients = r.f64s();
    if (fn.support_vectors.size() != fn.coefficients.size() * fn.dim) {
        r.fail("support vector block does not match coefficient count");
    }
    return fn;
}

}  // namespace

std::string serialize_model(const LocalModel &model) {
    detail::ByteWriter w;
    w.raw(model_magic);
    w.u32(model_version);
    w.u8(static_cast<std::uint8_t>(model.method));
    w.u64(model.dim);
    w.u64(model.train_size);
    w.u64(model.seed);
    w.u64(model.folds);
    w.u64(model.n_lambda);
    w.u64(model.n_gamma);
    w.u8(static_cast<std::uint8_t>(model.scope));
    w.u8(model.fixed ? 1 : 0);
    if (model.fixed) {
        w.f64(model.fixed->gamma);
        w.f64(model.fixed->lambda);
    }
    w.f64(model.weights.negative);
    w.f64(model.weights.positive);
    w.u8(model.scaler ? 1 : 0);
    if (model.scaler) {
        const auto lo = model.scaler->lower();
        const auto hi = model.scaler->upper();
        w.f64s({ lo.begin(), lo.end() });
        w.f64s({ hi.begin(), hi.end() });
    }
    const std::string partition = serialize_partition(model.partition);
    w.u64(partition.size());
    w.raw(partition);
    w.u64(model.cells.size());
    for (const CellModel &c : model.cells) {
        write_function(w, c.function);
        w.f64(c.gamma);
        w.f64(c.lambda);
        w.u64(c.train_size);
        w.f64(c.radius);
        w.u8(c.constant ? 1 : 0);
        w.f64(c.validation_risk);
        w.u64(c.solver_calls);
        w.u64(c.prekernel_builds);
        w.u64(c.shortcut_skips);
    }
    return std::move(w).take();
}

LocalModel deserialize_model(std::string_view bytes) {
    detail::ByteReader r{ bytes, "model file" };
    if (r.raw(model_magic.size()) != model_magic) {
        r.fail("bad magic header");
    }
    if (const std::uint32_t version = r.u32(); version != model_version) {
        r.fail("unsupported version " + std::to_string(version));
    }
    LocalModel m;
    const std::uint8_t method = r.u8();
    if (method > 1) {
        r.fail("unknown strategy");
    }
    m.method = static_cast<strategy>(method);
    m.dim = static_cast<std::size_t>(r.u64());
    m.train_size = static_cast<std::size_t>(r.u64());
    m.seed = r.u64();
    m.folds = static_cast<std::size_t>(r.u64());
    m.n_lambda = static_cast<std::size_t>(r.u64());
    m.n_gamma = static_cast<std::size_t>(r.u64());
    const std::uint8_t scope = r.u8();
    if (scope > 1) {
        r.fail("unknown selection scope");
    }
    m.scope = static_cast<selection_scope>(scope);
    if (r.u8() != 0) {
        FixedParameters fixed;
        fixed.gamma = r.f64();
        fixed.lambda = r.f64();
        m.fixed = fixed;
    }
    m.weights.negative = r.f64();
    m.weights.positive = r.f64();
    if (r.u8() != 0) {
        std::vector<double> lo = r.f64s();
        std::vector<double> hi = r.f64s();
        if (lo.size() != m.dim || hi.size() != m.dim) {
            r.fail("scaler dimension does not match model");
        }
        m.scaler = MinMaxScaler{ std::move(lo), std::move(hi) };
    }
    const std::size_t partition_size = r.count(1);
    m.partition = deserialize_partition(r.raw(partition_size));
    const std::size_t cells = r.count(1);
    m.cells.reserve(cells);
    for (std::size_t j = 0; j < cells; ++j) {
        CellModel c;
        c.function = read_function(r);
        c.gamma = r.f64();
        c.lambda = r.f64();
        c.train_size = static_cast<std::size_t>(r.u64());
        c.radius = r.f64();
        c.constant = r.u8() != 0;
        c.validation_risk = r.f64();
        c.solver_calls = r.u64();
        c.prekernel_builds = r.u64();
        c.shortcut_skips = r.u64();
        if (c.function.support_count() != 0 && c.function.dim != m.dim) {
            r.fail("cell model dimension does not match model");
        }
        m.cells.push_back(std::move(c));
    }
    if (!r.done()) {
        r.fail("trailing bytes");
    }
    if (m.partition.dim != m.dim || m.partition.num_cells() != m.cells.size()) {
        r.fail("partition does not match cell models");
    }
    return m;
}

void save_model(const std::filesystem::path &path, const LocalModel &model) {
    detail::write_bytes(path, serialize_model(model));
}

LocalModel load_model(const std::filesystem::path &path) {
    return deserialize_model(detail::read_bytes(path));
}

}  // namespace vpsvm
