#include "vpsvm/partition.hpp"

#include "binary_io.hpp"
#include "vpsvm/errors.hpp"
#include "vpsvm/kernel.hpp"
#include "vpsvm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace vpsvm {

namespace {

constexpr std::string_view partition_magic{ "VPSVMPRT" };
constexpr std::uint32_t partition_version = 1;

/**
 * Grows a farthest-first traversal over `members` (indices into points).
 * min_d2[k] is the squared distance of members[k] to the nearest center chosen
 * so far and is updated in place. Stops early once every remaining member
 * coincides with a center.
 */
std::vector<std::size_t> extend_traversal(PointsView points, std::span<const std::size_t> members, std::vector<double> &min_d2,
                                          std::size_t additional) {
    std::vector<std::size_t> added;
    added.reserve(additional);
    if (members.empty()) {
        return added;
    }
    for (std::size_t step = 0; step < additional; ++step) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < members.size(); ++k) {
            // strict comparison keeps the first (lowest index) maximizer; members are ascending
            if (min_d2[k] > min_d2[best]) {
                best = k;
            }
        }
        if (min_d2[best] <= 0.0) {
            break;
        }
        const std::size_t chosen = members[best];
        added.push_back(chosen);
        const auto c = points[chosen];
        for (std::size_t k = 0; k < members.size(); ++k) {
            const double d2 = squared_distance(points[members[k]], c);
            if (d2 < min_d2[k]) {
                min_d2[k] = d2;
            }
        }
    }
    return added;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{ 0 });
    return v;
}

/// Nearest-center assignment state over a growing list of center point indices.
struct Assignment {
    std::vector<std::size_t> center_of;
    std::vector<double> d2;

    void add_center(PointsView points, std::size_t center_point, std::size_t center_id) {
        const auto c = points[center_point];
        for (std::size_t i = 0; i < center_of.size(); ++i) {
            const double dist = squared_distance(points[i], c);
            if (dist < d2[i]) {
                d2[i] = dist;
                center_of[i] = center_id;
            }
        }
    }
};

Partition build_voronoi(const Dataset &data, const std::vector<std::size_t> &center_points, const Assignment &assignment,
                        PartitionTarget target) {
    const std::size_t m = center_points.size();
    std::vector<std::vector<std::size_t>> cells(m);
    for (std::size_t i = 0; i < data.size(); ++i) {
        cells[assignment.center_of[i]].push_back(i);
    }
    Partition p;
    p.kind = partition_kind::voronoi;
    p.target = target;
    p.dim = data.dim();
    for (std::size_t j = 0; j < m; ++j) {
        if (cells[j].empty()) {
            continue;
        }
        const auto c = data.features(center_points[j]);
        p.centers.insert(p.centers.end(), c.begin(), c.end());
        p.cells.push_back(std::move(cells[j]));
    }
    return p;
}

}  // namespace

std::size_t Partition::num_samples() const noexcept {
    std::size_t n = 0;
    for (const auto &c : cells) {
        n += c.size();
    }
    return n;
}

std::size_t nearest_center(PointsView centers, std::span<const double> x) noexcept {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.size(); ++j) {
        const double d2 = squared_distance(centers[j], x);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = j;
        }
    }
    return best;
}

std::vector<std::size_t> farthest_first_from(PointsView points, std::size_t m, std::size_t start) {
    const std::size_t n = points.size();
    if (m > n) {
        throw size_error("cannot choose " + std::to_string(m) + " centers from " + std::to_string(n) + " points");
    }
    if (m == 0) {
        return {};
    }
    if (start >= n) {
        throw parameter_error("start index out of range");
    }
    std::vector<std::size_t> centers{ start };
    centers.reserve(m);
    const std::vector<std::size_t> all = iota_indices(n);
    std::vector<double> min_d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        min_d2[i] = squared_distance(points[i], points[start]);
    }
    // Once only duplicates of chosen centers remain, fill up with the lowest
    // unchosen indices; those points can never win a cell of their own.
    std::vector<std::size_t> added = extend_traversal(points, all, min_d2, m - 1);
    centers.insert(centers.end(), added.begin(), added.end());
    if (centers.size() < m) {
        std::vector<bool> used(n, false);
        for (const std::size_t c : centers) {
            used[c] = true;
        }
        for (std::size_t i = 0; i < n && centers.size() < m; ++i) {
            if (!used[i]) {
                centers.push_back(i);
            }
        }
    }
    return centers;
}

std::vector<std::size_t> farthest_first(PointsView points, std::size_t m, std::uint64_t seed) {
    if (m > points.size()) {
        throw size_error("cannot choose " + std::to_string(m) + " centers from " + std::to_string(points.size()) + " points");
    }
    if (m == 0) {
        return {};
    }
    rng_type rng{ seed };
    return farthest_first_from(points, m, static_cast<std::size_t>(uniform_index(rng, points.size())));
}

Partition partition_voronoi_by_size(const Dataset &data, std::size_t max_cell_size, std::uint64_t seed, const VoronoiOptions &options) {
    if (max_cell_size < 2) {
        throw parameter_error("max_cell_size must be at least 2");
    }
    const std::size_t n = data.size();
    const PointsView points = data.points();
    if (n == 0) {
        return Partition{ partition_kind::voronoi, CellSizeTarget{ max_cell_size }, data.dim(), {}, {} };
    }
    const std::size_t initial = (n + max_cell_size - 1) / max_cell_size;

    std::vector<std::size_t> center_points;
    if (n <= options.subsample_threshold) {
        center_points = farthest_first(points, initial, derive_seed(seed, stream::partition));
    } else {
        const std::vector<std::size_t> sub = subsample_indices(n, options.subsample_threshold, derive_seed(seed, stream::subsample));
        const Dataset sub_data = data.subset(sub);
        const std::vector<std::size_t> local =
            farthest_first(sub_data.points(), std::min(initial, sub.size()), derive_seed(seed, stream::partition));
        for (const std::size_t k : local) {
            center_points.push_back(sub[k]);
        }
    }

    Assignment assignment{ std::vector<std::size_t>(n, 0), std::vector<double>(n, std::numeric_limits<double>::infinity()) };
    for (std::size_t j = 0; j < center_points.size(); ++j) {
        assignment.add_center(points, center_points[j], j);
    }

    // Refine: re-run the traversal inside every oversized cell, seeded with the
    // cell's own center, until every cell fits or cannot be split further.
    std::vector<bool> unsplittable(center_points.size(), false);
    while (true) {
        std::vector<std::vector<std::size_t>> members(center_points.size());
        for (std::size_t i = 0; i < n; ++i) {
            members[assignment.center_of[i]].push_back(i);
        }
        std::vector<std::size_t> new_centers;
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (members[j].size() <= max_cell_size || unsplittable[j]) {
                continue;
            }
            std::vector<double> min_d2(members[j].size());
            for (std::size_t k = 0; k < members[j].size(); ++k) {
                min_d2[k] = assignment.d2[members[j][k]];
            }
            const std::size_t wanted = (members[j].size() + max_cell_size - 1) / max_cell_size;
            const std::vector<std::size_t> added = extend_traversal(points, members[j], min_d2, wanted - 1);
            if (added.empty()) {
                unsplittable[j] = true;  // all members coincide with the center
            }
            new_centers.insert(new_centers.end(), added.begin(), added.end());
        }
        if (new_centers.empty()) {
            break;
        }
        for (const std::size_t c : new_centers) {
            const std::size_t id = center_points.size();
            center_points.push_back(c);
            unsplittable.push_back(false);
            assignment.add_center(points, c, id);
        }
    }

    return build_voronoi(data, center_points, assignment, CellSizeTarget{ max_cell_size });
}

Partition partition_voronoi_by_radius(const Dataset &data, double max_radius, std::uint64_t seed) {
    if (!(max_radius > 0.0) || !std::isfinite(max_radius)) {
        throw parameter_error("max_radius must be positive and finite");
    }
    const std::size_t n = data.size();
    const PointsView points = data.points();
    if (n == 0) {
        return Partition{ partition_kind::voronoi, RadiusTarget{ max_radius }, data.dim(), {}, {} };
    }
    rng_type rng{ derive_seed(seed, stream::partition) };
    const auto start = static_cast<std::size_t>(uniform_index(rng, n));

    std::vector<std::size_t> center_points{ start };
    Assignment assignment{ std::vector<std::size_t>(n, 0), std::vector<double>(n) };
    for (std::size_t i = 0; i < n; ++i) {
        assignment.d2[i] = squared_distance(points[i], points[start]);
    }
    while (true) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (assignment.d2[i] > assignment.d2[far]) {
                far = i;
            }
        }
        if (std::sqrt(assignment.d2[far]) < max_radius) {
            break;
        }
        const std::size_t id = center_points.size();
        center_points.push_back(far);
        assignment.add_center(points, far, id);
    }
    return build_voronoi(data, center_points, assignment, RadiusTarget{ max_radius });
}

Partition partition_random_chunks(const Dataset &data, std::size_t chunk_size, std::uint64_t seed) {
    if (chunk_size < 2) {
        throw parameter_error("chunk_size must be at least 2");
    }
    const std::size_t n = data.size();
    const std::vector<std::size_t> perm = subsample_indices(n, n, derive_seed(seed, stream::chunks));
    Partition p;
    p.kind = partition_kind::random_chunks;
    p.target = CellSizeTarget{ chunk_size };
    p.dim = data.dim();
    for (std::size_t begin = 0; begin < n; begin += chunk_size) {
        const std::size_t end = std::min(n, begin + chunk_size);
        p.cells.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(begin), perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return p;
}

std::size_t route(const Partition &partition, std::span<const double> x) {
    if (partition.kind != partition_kind::voronoi) {
        throw usage_error("random-chunk partitions have no spatial routing; predictions average all chunks");
    }
    if (partition.cells.empty()) {
        throw usage_error("cannot route through an empty partition");
    }
    if (x.size() != partition.dim) {
        throw parameter_error("point has dimension " + std::to_string(x.size()) + ", partition expects " + std::to_string(partition.dim));
    }
    return nearest_center(partition.center_points(), x);
}

double cell_radius(const Partition &partition, std::size_t j, const Dataset &data) {
    if (partition.kind != partition_kind::voronoi) {
        throw usage_error("cell radius is only defined for Voronoi partitions");
    }
    if (j >= partition.cells.size() || partition.cells[j].empty()) {
        throw parameter_error("cell " + std::to_string(j) + " is empty or does not exist");
    }
    const auto c = partition.center(j);
    double max_d2 = 0.0;
    for (const std::size_t i : partition.cells[j]) {
        max_d2 = std::max(max_d2, squared_distance(data.features(i), c));
    }
    return std::sqrt(max_d2);
}

PartitionStats partition_stats(const Partition &partition, const Dataset &data) {
    PartitionStats stats;
    stats.cells.reserve(partition.cells.size());
    for (std::size_t j = 0; j < partition.cells.size(); ++j) {
        CellStats cs;
        cs.size = partition.cells[j].size();
        for (const std::size_t i : partition.cells[j]) {
            (data.label(i) > 0 ? cs.positives : cs.negatives) += 1;
        }
        if (partition.kind == partition_kind::voronoi && cs.size > 0) {
            cs.radius = cell_radius(partition, j, data);
        }
        stats.max_radius = std::max(stats.max_radius, cs.radius);
        stats.cells.push_back(cs);
    }
    const double m = static_cast<double>(std::max<std::size_t>(partition.cells.size(), 1));
    const double d = static_cast<double>(std::max<std::size_t>(partition.dim, 1));
    stats.covering_bound = 16.0 * std::pow(m, -1.0 / d);
    stats.covering_condition = stats.max_radius < stats.covering_bound;
    return stats;
}

std::string serialize_partition(const Partition &partition) {
    detail::ByteWriter w;
    w.raw(partition_magic);
    w.u32(partition_version);
    w.u8(static_cast<std::uint8_t>(partition.kind));
    if (const auto *size = std::get_if<CellSizeTarget>(&partition.target)) {
        w.u8(0);
        w.u64(size->max_cell_size);
    } else {
        w.u8(1);
        w.f64(std::get<RadiusTarget>(partition.target).max_radius);
    }
    w.u64(partition.dim);
    w.f64s(partition.centers);
    w.u64(partition.cells.size());
    for (const auto &cell : partition.cells) {
        w.u64s(cell);
    }
    return std::move(w).take();
}

Partition deserialize_partition(std::string_view bytes) {
    detail::ByteReader r{ bytes, "partition file" };
    if (r.raw(partition_magic.size()) != partition_magic) {
        r.fail("bad magic header");
    }
    if (const std::uint32_t version = r.u32(); version != partition_version) {
        r.fail("unsupported version " + std::to_string(version));
    }
    Partition p;
    const std::uint8_t kind = r.u8();
    if (kind > 1) {
        r.fail("unknown partition kind");
    }
    p.kind = static_cast<partition_kind>(kind);
    const std::uint8_t target_tag = r.u8();
    if (target_tag == 0) {
        p.target = CellSizeTarget{ static_cast<std::size_t>(r.u64()) };
    } else if (target_tag == 1) {
        p.target = RadiusTarget{ r.f64() };
    } else {
        r.fail("unknown target tag");
    }
    p.dim = static_cast<std::size_t>(r.u64());
    p.centers = r.f64s();
    const std::size_t m = r.count(8);
    p.cells.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        p.cells.push_back(r.u64s());
    }
    if (!r.done()) {
        r.fail("trailing bytes");
    }
    if (p.kind == partition_kind::voronoi && (p.dim == 0 ? !p.centers.empty() : p.centers.size() != m * p.dim)) {
        r.fail("center block does not match cell count");
    }
    return p;
}

void save_partition(const std::filesystem::path &path, const Partition &partition) {
    detail::write_bytes(path, serialize_partition(partition));
}

Partition load_partition(const std::filesystem::path &path) {
    return deserialize_partition(detail::read_bytes(path));
}

}  // namespace vpsvm
