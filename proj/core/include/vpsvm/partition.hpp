/**
 * @file
 * @brief Spatial decomposition of a dataset into Voronoi cells found by
 *        farthest-first traversal, plus the random-chunks baseline split.
 *
 * A Voronoi partition is flat: every training sample belongs to the cell of
 * its nearest center, ties going to the lowest center index, and route()
 * applies exactly the same rule to new points. Size-targeted partitions that
 * start with too few centers are refined by running farthest-first traversal
 * again inside each oversized cell and re-assigning all points to the
 * enlarged center set, which keeps the nearest-center property intact.
 */

#pragma once

#include "vpsvm/data.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace vpsvm {

enum class partition_kind : std::uint8_t { voronoi = 0, random_chunks = 1 };

struct CellSizeTarget {
    std::size_t max_cell_size{ 0 };
    friend bool operator==(const CellSizeTarget &, const CellSizeTarget &) = default;
};
struct RadiusTarget {
    double max_radius{ 0.0 };
    friend bool operator==(const RadiusTarget &, const RadiusTarget &) = default;
};
using PartitionTarget = std::variant<CellSizeTarget, RadiusTarget>;

struct Partition {
    partition_kind kind{ partition_kind::voronoi };
    PartitionTarget target{ CellSizeTarget{} };
    std::size_t dim{ 0 };
    /// Row-major center coordinates, one row per cell. Empty for random chunks.
    std::vector<double> centers;
    /// cells[j] holds the indices of the samples of cell j, ascending for Voronoi cells.
    std::vector<std::vector<std::size_t>> cells;

    [[nodiscard]] std::size_t num_cells() const noexcept { return cells.size(); }
    [[nodiscard]] PointsView center_points() const noexcept { return { centers, dim }; }
    [[nodiscard]] std::span<const double> center(std::size_t j) const noexcept { return center_points()[j]; }
    /// Total number of assigned samples.
    [[nodiscard]] std::size_t num_samples() const noexcept;

    friend bool operator==(const Partition &, const Partition &) = default;
};

struct VoronoiOptions {
    /// Above this many samples the initial centers are found on a uniform subsample.
    std::size_t subsample_threshold{ 50000 };
};

/// Index of the nearest row of `centers` to x, lowest index on ties.
[[nodiscard]] std::size_t nearest_center(PointsView centers, std::span<const double> x) noexcept;

/**
 * Farthest-first traversal: the first center is drawn uniformly using `seed`,
 * every further one is the point with the largest distance to the centers
 * chosen so far (lowest index on ties). Returns point indices.
 */
[[nodiscard]] std::vector<std::size_t> farthest_first(PointsView points, std::size_t m, std::uint64_t seed);
/// Same traversal with an explicit first center.
[[nodiscard]] std::vector<std::size_t> farthest_first_from(PointsView points, std::size_t m, std::size_t start);

[[nodiscard]] Partition partition_voronoi_by_size(const Dataset &data, std::size_t max_cell_size, std::uint64_t seed,
                                                  const VoronoiOptions &options = {});
[[nodiscard]] Partition partition_voronoi_by_radius(const Dataset &data, double max_radius, std::uint64_t seed);
[[nodiscard]] Partition partition_random_chunks(const Dataset &data, std::size_t chunk_size, std::uint64_t seed);

/// Cell of a point under a Voronoi partition. Throws usage_error for random chunks.
[[nodiscard]] std::size_t route(const Partition &partition, std::span<const double> x);

/// Largest distance between a member of cell j and its center.
[[nodiscard]] double cell_radius(const Partition &partition, std::size_t j, const Dataset &data);

struct CellStats {
    std::size_t size{ 0 };
    double radius{ 0.0 };
    std::size_t positives{ 0 };
    std::size_t negatives{ 0 };
};

struct PartitionStats {
    std::vector<CellStats> cells;
    double max_radius{ 0.0 };
    /// 16 * m^(-1/d): the radius bound the learning-rate analysis asks of cells.
    double covering_bound{ 0.0 };
    /// Whether max_radius < covering_bound. Diagnostic only; never enforced.
    bool covering_condition{ false };
};

/// Per-cell statistics. Radii are only defined for Voronoi partitions (0 for chunks).
[[nodiscard]] PartitionStats partition_stats(const Partition &partition, const Dataset &data);

/// Canonical, versioned binary encoding; identical partitions give identical bytes.
[[nodiscard]] std::string serialize_partition(const Partition &partition);
[[nodiscard]] Partition deserialize_partition(std::string_view bytes);
void save_partition(const std::filesystem::path &path, const Partition &partition);
[[nodiscard]] Partition load_partition(const std::filesystem::path &path);

}  // namespace vpsvm
