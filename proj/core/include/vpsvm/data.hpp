/**
 * @file
 * @brief Labeled binary-classification samples, dense in-memory datasets and
 *        the LIBSVM / CSV readers that produce them.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpsvm {

/// A single labeled example. `label` is always -1 or +1.
struct Sample {
    std::vector<double> features;
    int label{ 1 };

    friend bool operator==(const Sample &, const Sample &) = default;
};

/**
 * Non-owning view of n points in R^d stored row-major.
 */
class PointsView {
  public:
    PointsView() = default;
    PointsView(std::span<const double> values, std::size_t dim)
        : values_{ values }, dim_{ dim } {}

    [[nodiscard]] std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] bool empty() const noexcept { return size() == 0; }
    [[nodiscard]] std::span<const double> operator[](std::size_t i) const noexcept {
        return values_.subspan(i * dim_, dim_);
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

  private:
    std::span<const double> values_{};
    std::size_t dim_{ 0 };
};

/**
 * Ordered collection of samples with a fixed feature dimension.
 *
 * Features are stored densely and row-major; index i always refers to the same
 * sample. A Dataset is never mutated once handed to training code, so it can be
 * shared freely between worker threads.
 */
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::size_t dim);
    /// Builds a dataset from samples; every sample must have exactly `dim` features.
    Dataset(std::size_t dim, const std::vector<Sample> &samples);

    /// Appends one sample. Throws parameter_error on wrong length, non-finite
    /// values or a label outside {-1, +1}.
    void add(std::span<const double> features, int label);
    void add(const Sample &sample) { add(sample.features, sample.label); }
    void reserve(std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] bool empty() const noexcept { return labels_.empty(); }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

    [[nodiscard]] std::span<const double> features(std::size_t i) const noexcept {
        return std::span<const double>{ values_ }.subspan(i * dim_, dim_);
    }
    [[nodiscard]] int label(std::size_t i) const noexcept { return labels_[i]; }
    [[nodiscard]] Sample sample(std::size_t i) const;

    [[nodiscard]] std::span<const int> labels() const noexcept { return labels_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] PointsView points() const noexcept { return { values_, dim_ }; }

    /// New dataset holding the given rows, in the given order.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;

    /// Number of samples labeled +1.
    [[nodiscard]] std::size_t positives() const noexcept;

    friend bool operator==(const Dataset &, const Dataset &) = default;

  private:
    std::size_t dim_{ 0 };
    std::vector<double> values_;
    std::vector<int> labels_;
};

enum class file_format { libsvm, csv };
enum class label_column { first, last };

struct ParseOptions {
    /// Accept {0, 1} labels and map 0 to -1.
    bool remap_01{ false };
    /// Densify sparse input to this many features instead of the maximum seen index.
    std::optional<std::size_t> dim{};
    label_column label_col{ label_column::first };
};

/**
 * Parses one LIBSVM line `<label> (<index>:<value>)*` with 1-based, strictly
 * increasing indices. Unmentioned features are zero. Without a dim hint the
 * feature vector is as long as the largest index.
 */
[[nodiscard]] Sample parse_libsvm(std::string_view line, std::optional<std::size_t> dim_hint = {},
                                  bool remap_01 = false, std::size_t line_number = 0);

/// Parses one headerless CSV line. `expected_columns`, if given, is enforced.
[[nodiscard]] Sample parse_csv(std::string_view line, label_column label_col, bool remap_01 = false,
                               std::optional<std::size_t> expected_columns = {}, std::size_t line_number = 0);

/// LIBSVM encoding of a sample. Zero features are omitted; values are printed
/// with enough digits to round-trip exactly.
[[nodiscard]] std::string format_libsvm(const Sample &sample);
[[nodiscard]] std::string format_csv(const Sample &sample, label_column label_col);

/// Reads a whole dataset. Files ending in `.gz` are decompressed on the fly.
/// Blank lines and lines starting with '#' are skipped.
[[nodiscard]] Dataset read_dataset(const std::filesystem::path &path, file_format format, const ParseOptions &options = {});
[[nodiscard]] Dataset parse_dataset(std::string_view text, file_format format, const ParseOptions &options = {});

void write_dataset(const std::filesystem::path &path, const Dataset &data, file_format format,
                   label_column label_col = label_column::first);

/// Uniform sample of n distinct rows without replacement, in draw order.
[[nodiscard]] Dataset subsample(const Dataset &data, std::size_t n, std::uint64_t seed);
[[nodiscard]] std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t n, std::uint64_t seed);

/// Random split into (train, test) with round(test_fraction * n) test rows.
[[nodiscard]] std::pair<Dataset, Dataset> train_test_split(const Dataset &data, double test_fraction, std::uint64_t seed);

/**
 * Per-feature affine map of [min, max] onto [-1, 1]. Constant features map to 0.
 */
class MinMaxScaler {
  public:
    MinMaxScaler() = default;
    MinMaxScaler(std::vector<double> lower, std::vector<double> upper);

    [[nodiscard]] static MinMaxScaler fit(const Dataset &data);

    void transform(std::span<double> x) const;
    [[nodiscard]] Dataset transform(const Dataset &data) const;

    [[nodiscard]] std::span<const double> lower() const noexcept { return lower_; }
    [[nodiscard]] std::span<const double> upper() const noexcept { return upper_; }
    [[nodiscard]] std::size_t dim() const noexcept { return lower_.size(); }

    friend bool operator==(const MinMaxScaler &, const MinMaxScaler &) = default;

  private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

}  // namespace vpsvm
