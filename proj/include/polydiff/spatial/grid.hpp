#pragma once

#include "polydiff/core/types.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

namespace polydiff::spatial {

enum class Metric { L1, L2 };

/// Distance used by every query; L2 is returned as a true (not squared)
/// distance but compared internally on squares.
double distance(const Vec3& a, const Vec3& b, Metric m);

struct Neighbor {
    Index index = -1;
    double dist = 0.0;
};

/// Hash grid over the first three columns of a point set. Queries are exact:
/// they return what a linear scan with the same distance expression would,
/// including the lowest-index rule on ties.
class UniformGrid {
public:
    UniformGrid(const Eigen::Ref<const Mat>& points, double cell);

    /// Cell edge from the bounding box so that roughly `per_cell` points
    /// share a cell on a surface-like cloud.
    static double suggest_cell(const Eigen::Ref<const Mat>& points, double per_cell = 2.0);

    Index size() const { return static_cast<Index>(pts_.size()); }
    double cell() const { return cell_; }
    const Vec3& point(Index i) const { return pts_[static_cast<std::size_t>(i)]; }

    /// Nearest stored point to q, skipping index `exclude` (-1 for none).
    /// Returns index -1 when nothing qualifies.
    Neighbor nearest(const Vec3& q, Metric m, Index exclude = -1) const;

    /// k nearest, ascending by (distance, index).
    std::vector<Neighbor> knn(const Vec3& q, Index k, Metric m, Index exclude = -1) const;

    /// Whether some point other than `exclude` lies strictly within r.
    bool any_within(const Vec3& q, double r, Metric m, Index exclude = -1) const;

    /// All points strictly within r, ascending by index.
    std::vector<Index> within(const Vec3& q, double r, Metric m, Index exclude = -1) const;

private:
    using Key = std::array<std::int64_t, 3>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    Key key_of(const Vec3& p) const;
    template <class Visit>
    bool visit_ring(const Key& c, std::int64_t r, Visit&& visit) const;
    std::int64_t rings_to_cover(const Key& c) const;

    double cell_;
    Vec3 origin_;
    std::vector<Vec3> pts_;
    std::vector<Index> order_;  // point indices grouped by cell, ascending within a cell
    std::unordered_map<Key, std::pair<Index, Index>, KeyHash> cells_;  // begin, count into order_
    Key lo_{};
    Key hi_{};
};

}  // namespace polydiff::spatial
