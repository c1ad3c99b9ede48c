#include "vpsvm/data.hpp"

#include "vpsvm/errors.hpp"
#include "vpsvm/random.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

namespace vpsvm {

namespace {

struct SparseRow {
    int label{ 1 };
    std::vector<std::pair<std::size_t, double>> entries;
};

[[nodiscard]] std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

[[nodiscard]] double parse_number(std::string_view token, std::size_t line, const char *what) {
    std::string_view t = token;
    if (!t.empty() && t.front() == '+') {
        t.remove_prefix(1);
    }
    double value{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw parse_error("malformed " + std::string{ what } + " '" + std::string{ token } + "'", line);
    }
    if (!std::isfinite(value)) {
        throw parse_error("non-finite " + std::string{ what } + " '" + std::string{ token } + "'", line);
    }
    return value;
}

[[nodiscard]] int parse_label(std::string_view token, bool remap_01, std::size_t line) {
    const double v = parse_number(token, line, "label");
    if (v == 1.0) {
        return 1;
    }
    if (v == -1.0) {
        return -1;
    }
    if (v == 0.0) {
        if (remap_01) {
            return -1;
        }
        throw parse_error("label 0 is only accepted with 0/1 remapping enabled", line);
    }
    throw parse_error("label '" + std::string{ token } + "' is not one of -1, +1 (or 0, 1 with remapping)", line);
}

[[nodiscard]] SparseRow parse_libsvm_sparse(std::string_view line, bool remap_01, std::size_t line_number) {
    SparseRow row;
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string_view {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r' || line[pos] == '\n')) {
            ++pos;
        }
        const std::size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r' && line[pos] != '\n') {
            ++pos;
        }
        return line.substr(start, pos - start);
    };

    const std::string_view label_token = next_token();
    if (label_token.empty()) {
        throw parse_error("missing label", line_number);
    }
    row.label = parse_label(label_token, remap_01, line_number);

    std::size_t previous = 0;
    for (std::string_view token = next_token(); !token.empty(); token = next_token()) {
        const auto colon = token.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 1 == token.size()) {
            throw parse_error("malformed feature token '" + std::string{ token } + "'", line_number);
        }
        const std::string_view index_part = token.substr(0, colon);
        std::size_t index{};
        const auto [ptr, ec] = std::from_chars(index_part.data(), index_part.data() + index_part.size(), index);
        if (ec != std::errc{} || ptr != index_part.data() + index_part.size() || index == 0) {
            throw parse_error("malformed feature index '" + std::string{ index_part } + "'", line_number);
        }
        if (index <= previous) {
            throw parse_error("feature indices must be strictly increasing (" + std::to_string(index) + " after " + std::to_string(previous) + ")", line_number);
        }
        previous = index;
        row.entries.emplace_back(index, parse_number(token.substr(colon + 1), line_number, "feature value"));
    }
    return row;
}

[[nodiscard]] Sample densify(const SparseRow &row, std::size_t dim, std::size_t line_number) {
    Sample s;
    s.label = row.label;
    s.features.assign(dim, 0.0);
    for (const auto &[index, value] : row.entries) {
        if (index > dim) {
            throw parse_error("feature index " + std::to_string(index) + " exceeds dimension " + std::to_string(dim), line_number);
        }
        s.features[index - 1] = value;
    }
    return s;
}

[[nodiscard]] std::string read_file(const std::filesystem::path &path) {
    const std::string name = path.string();
    if (name.size() > 3 && name.compare(name.size() - 3, 3, ".gz") == 0) {
        gzFile file = gzopen(name.c_str(), "rb");
        if (file == nullptr) {
            throw io_error("cannot open '" + name + "'");
        }
        std::string text;
        std::vector<char> buffer(1U << 16U);
        int got = 0;
        while ((got = gzread(file, buffer.data(), static_cast<unsigned>(buffer.size()))) > 0) {
            text.append(buffer.data(), static_cast<std::size_t>(got));
        }
        const bool failed = got < 0;
        gzclose(file);
        if (failed) {
            throw io_error("decompression failed for '" + name + "'");
        }
        return text;
    }
    std::ifstream in{ path, std::ios::binary };
    if (!in) {
        throw io_error("cannot open '" + name + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

template <typename F>
void for_each_line(std::string_view text, F &&f) {
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_number;
        const std::string_view line = trim(text.substr(start, end - start));
        if (!line.empty() && line.front() != '#') {
            f(line, line_number);
        }
        start = end + 1;
    }
}

}  // namespace

Dataset::Dataset(std::size_t dim)
    : dim_{ dim } {}

Dataset::Dataset(std::size_t dim, const std::vector<Sample> &samples)
    : dim_{ dim } {
    reserve(samples.size());
    for (const Sample &s : samples) {
        add(s);
    }
}

void Dataset::add(std::span<const double> features, int label) {
    if (features.size() != dim_) {
        throw parameter_error("sample has " + std::to_string(features.size()) + " features, dataset expects " + std::to_string(dim_));
    }
    if (label != 1 && label != -1) {
        throw parameter_error("label must be -1 or +1, got " + std::to_string(label));
    }
    if (!std::all_of(features.begin(), features.end(), [](double v) { return std::isfinite(v); })) {
        throw parameter_error("sample has non-finite features");
    }
    values_.insert(values_.end(), features.begin(), features.end());
    labels_.push_back(label);
}

void Dataset::reserve(std::size_t n) {
    values_.reserve(n * dim_);
    labels_.reserve(n);
}

Sample Dataset::sample(std::size_t i) const {
    const auto f = features(i);
    return Sample{ { f.begin(), f.end() }, labels_[i] };
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out{ dim_ };
    out.values_.reserve(indices.size() * dim_);
    out.labels_.reserve(indices.size());
    for (const std::size_t i : indices) {
        const auto f = features(i);
        out.values_.insert(out.values_.end(), f.begin(), f.end());
        out.labels_.push_back(labels_[i]);
    }
    return out;
}

std::size_t Dataset::positives() const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

Sample parse_libsvm(std::string_view line, std::optional<std::size_t> dim_hint, bool remap_01, std::size_t line_number) {
    const SparseRow row = parse_libsvm_sparse(trim(line), remap_01, line_number);
    const std::size_t dim = dim_hint.value_or(row.entries.empty() ? 0 : row.entries.back().first);
    return densify(row, dim, line_number);
}

Sample parse_csv(std::string_view line, label_column label_col, bool remap_01, std::optional<std::size_t> expected_columns,
                 std::size_t line_number) {
    line = trim(line);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    if (expected_columns && fields.size() != *expected_columns) {
        throw parse_error("expected " + std::to_string(*expected_columns) + " columns, found " + std::to_string(fields.size()), line_number);
    }
    if (fields.size() < 1 || (fields.size() == 1 && fields.front().empty())) {
        throw parse_error("empty CSV record", line_number);
    }

    Sample s;
    const std::size_t label_index = label_col == label_column::first ? 0 : fields.size() - 1;
    s.label = parse_label(fields[label_index], remap_01, line_number);
    s.features.reserve(fields.size() - 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i != label_index) {
            s.features.push_back(parse_number(fields[i], line_number, "field"));
        }
    }
    return s;
}

std::string format_libsvm(const Sample &sample) {
    std::string out = sample.label > 0 ? "+1" : "-1";
    char buffer[64];
    for (std::size_t i = 0; i < sample.features.size(); ++i) {
        if (sample.features[i] == 0.0) {
            continue;
        }
        const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), sample.features[i]);
        out += ' ';
        out += std::to_string(i + 1);
        out += ':';
        out.append(buffer, ptr);
    }
    return out;
}

std::string format_csv(const Sample &sample, label_column label_col) {
    std::string out;
    char buffer[64];
    const std::string label = sample.label > 0 ? "1" : "-1";
    if (label_col == label_column::first) {
        out = label;
    }
    for (std::size_t i = 0; i < sample.features.size(); ++i) {
        if (!out.empty()) {
            out += ',';
        }
        const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), sample.features[i]);
        out.append(buffer, ptr);
    }
    if (label_col == label_column::last) {
        if (!out.empty()) {
            out += ',';
        }
        out += label;
    }
    return out;
}

Dataset parse_dataset(std::string_view text, file_format format, const ParseOptions &options) {
    if (format == file_format::libsvm) {
        std::vector<std::pair<SparseRow, std::size_t>> rows;
        std::size_t max_index = 0;
        for_each_line(text, [&](std::string_view line, std::size_t line_number) {
            SparseRow row = parse_libsvm_sparse(line, options.remap_01, line_number);
            if (!row.entries.empty()) {
                max_index = std::max(max_index, row.entries.back().first);
            }
            rows.emplace_back(std::move(row), line_number);
        });
        const std::size_t dim = options.dim.value_or(max_index);
        Dataset data{ dim };
        data.reserve(rows.size());
        for (const auto &[row, line_number] : rows) {
            data.add(densify(row, dim, line_number));
        }
        return data;
    }

    std::optional<std::size_t> columns;
    Dataset data;
    bool first = true;
    for_each_line(text, [&](std::string_view line, std::size_t line_number) {
        Sample s = parse_csv(line, options.label_col, options.remap_01, columns, line_number);
        if (first) {
            columns = s.features.size() + 1;
            if (options.dim && *options.dim != s.features.size()) {
                throw parse_error("CSV has " + std::to_string(s.features.size()) + " features, expected " + std::to_string(*options.dim), line_number);
            }
            data = Dataset{ s.features.size() };
            first = false;
        }
        data.add(s);
    });
    return data;
}

Dataset read_dataset(const std::filesystem::path &path, file_format format, const ParseOptions &options) {
    return parse_dataset(read_file(path), format, options);
}

void write_dataset(const std::filesystem::path &path, const Dataset &data, file_format format, label_column label_col) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw io_error("cannot write '" + path.string() + "'");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Sample s = data.sample(i);
        out << (format == file_format::libsvm ? format_libsvm(s) : format_csv(s, label_col)) << '\n';
    }
    if (!out) {
        throw io_error("write failed for '" + path.string() + "'");
    }
}

std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
    if (n > population) {
        throw size_error("cannot draw " + std::to_string(n) + " samples from " + std::to_string(population));
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{ 0 });
    rng_type rng{ seed };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + uniform_index(rng, population - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

Dataset subsample(const Dataset &data, std::size_t n, std::uint64_t seed) {
    const std::vector<std::size_t> idx = subsample_indices(data.size(), n, seed);
    return data.subset(idx);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset &data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw parameter_error("test fraction must lie in [0, 1]");
    }
    const std::vector<std::size_t> perm = subsample_indices(data.size(), data.size(), seed);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
    const std::span<const std::size_t> all{ perm };
    return { data.subset(all.subspan(n_test)), data.subset(all.first(n_test)) };
}

MinMaxScaler::MinMaxScaler(std::vector<double> lower, std::vector<double> upper)
    : lower_{ std::move(lower) }, upper_{ std::move(upper) } {
    if (lower_.size() != upper_.size()) {
        throw parameter_error("scaler bounds differ in length");
    }
}

MinMaxScaler MinMaxScaler::fit(const Dataset &data) {
    const std::size_t d = data.dim();
    std::vector<double> lo(d, 0.0);
    std::vector<double> hi(d, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.features(i);
        for (std::size_t k = 0; k < d; ++k) {
            if (i == 0 || x[k] < lo[k]) {
                lo[k] = x[k];
            }
            if (i == 0 || x[k] > hi[k]) {
                hi[k] = x[k];
            }
        }
    }
    return MinMaxScaler{ std::move(lo), std::move(hi) };
}

void MinMaxScaler::transform(std::span<double> x) const {
    if (x.size() != lower_.size()) {
        throw parameter_error("scaler dimension mismatch");
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double width = upper_[k] - lower_[k];
        x[k] = width > 0.0 ? 2.0 * (x[k] - lower_[k]) / width - 1.0 : 0.0;
    }
}

Dataset MinMaxScaler::transform(const Dataset &data) const {
    Dataset out{ data.dim() };
    out.reserve(data.size());
    std::vector<double> row(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto f = data.features(i);
        std::copy(f.begin(), f.end(), row.begin());
        transform(row);
        out.add(row, data.label(i));
    }
    return out;
}

}  // namespace vpsvm
