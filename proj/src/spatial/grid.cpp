#include "polydiff/spatial/grid.hpp"

#include "polydiff/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace polydiff::spatial {

namespace {

// Ordering key: L1 distance, or squared L2. Queries compare on this so the
// grid and a linear scan agree bit for bit.
double key_distance(const Vec3& a, const Vec3& b, Metric m) {
    if (m == Metric::L1) return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y()) + std::abs(a.z() - b.z());
    return (a - b).squaredNorm();
}

double to_key(double d, Metric m) { return m == Metric::L1 ? d : d * d; }
double from_key(double k, Metric m) { return m == Metric::L1 ? k : std::sqrt(k); }

bool better(double d, Index i, double best_d, Index best_i) {
    return d < best_d || (d == best_d && i < best_i);
}

}  // namespace

double distance(const Vec3& a, const Vec3& b, Metric m) { return from_key(key_distance(a, b, m), m); }

std::size_t UniformGrid::KeyHash::operator()(const Key& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k[0]) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k[1]) + 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k[2]) + 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
}

UniformGrid::UniformGrid(const Eigen::Ref<const Mat>& points, double cell) : cell_(cell) {
    if (!(cell > 0.0) || !std::isfinite(cell)) throw ArgumentError("grid: cell size must be positive");
    if (points.cols() < 3) throw DimensionError("grid: points need three positional columns");
    pts_.resize(static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i) {
        pts_[static_cast<std::size_t>(i)] = points.row(i).head<3>().transpose();
        if (!pts_[static_cast<std::size_t>(i)].allFinite()) throw DataError("grid: non-finite coordinate");
    }
    origin_ = Vec3::Zero();
    if (!pts_.empty()) {
        origin_ = pts_.front();
        for (const auto& p : pts_) origin_ = origin_.cwiseMin(p);
    }

    std::vector<Key> keys(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) keys[i] = key_of(pts_[i]);
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](Index a, Index b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
    lo_ = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
           std::numeric_limits<std::int64_t>::max()};
    hi_ = {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
           std::numeric_limits<std::int64_t>::min()};
    for (std::size_t s = 0; s < order_.size();) {
        const Key& k = keys[static_cast<std::size_t>(order_[s])];
        std::size_t e = s;
        while (e < order_.size() && keys[static_cast<std::size_t>(order_[e])] == k) ++e;
        cells_.emplace(k, std::make_pair(static_cast<Index>(s), static_cast<Index>(e - s)));
        for (int a = 0; a < 3; ++a) {
            lo_[a] = std::min(lo_[a], k[a]);
            hi_[a] = std::max(hi_[a], k[a]);
        }
        s = e;
    }
}

double UniformGrid::suggest_cell(const Eigen::Ref<const Mat>& points, double per_cell) {
    if (points.rows() == 0) return 1.0;
    const Vec3 lo = points.leftCols<3>().colwise().minCoeff().transpose();
    const Vec3 hi = points.leftCols<3>().colwise().maxCoeff().transpose();
    const Vec3 ext = hi - lo;
    // Surface-like estimate: total box face area spread over the points.
    const double area = 2.0 * (ext.x() * ext.y() + ext.y() * ext.z() + ext.z() * ext.x());
    double cell = std::sqrt(per_cell * area / static_cast<double>(points.rows()));
    if (!(cell > 0.0) || !std::isfinite(cell)) cell = ext.maxCoeff() > 0.0 ? ext.maxCoeff() : 1.0;
    return cell;
}

UniformGrid::Key UniformGrid::key_of(const Vec3& p) const {
    Key k;
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor((p[a] - origin_[a]) / cell_);
        // Clamp keeps far query points representable; ring bounds stay valid
        // because clamping only moves a key toward the occupied box.
        k[a] = static_cast<std::int64_t>(std::clamp(f, -4.0e15, 4.0e15));
    }
    return k;
}

std::int64_t UniformGrid::rings_to_cover(const Key& c) const {
    std::int64_t r = 0;
    for (int a = 0; a < 3; ++a) r = std::max({r, c[a] - lo_[a], hi_[a] - c[a]});
    return r;
}

// Visits the occupied cells at Chebyshev distance exactly r from c (clipped
// to the occupied box). Returns false if the visitor asked to stop.
template <class Visit>
bool UniformGrid::visit_ring(const Key& c, std::int64_t r, Visit&& visit) const {
    auto lookup = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        auto it = cells_.find(Key{x, y, z});
        if (it == cells_.end()) return true;
        return visit(it->second.first, it->second.second);
    };
    const std::int64_t x0 = std::max(c[0] - r, lo_[0]), x1 = std::min(c[0] + r, hi_[0]);
    const std::int64_t y0 = std::max(c[1] - r, lo_[1]), y1 = std::min(c[1] + r, hi_[1]);
    for (std::int64_t x = x0; x <= x1; ++x)
        for (std::int64_t y = y0; y <= y1; ++y) {
            const bool edge = std::abs(x - c[0]) == r || std::abs(y - c[1]) == r;
            if (edge) {
                const std::int64_t z0 = std::max(c[2] - r, lo_[2]), z1 = std::min(c[2] + r, hi_[2]);
                for (std::int64_t z = z0; z <= z1; ++z)
                    if (!lookup(x, y, z)) return false;
            } else {
                if (c[2] - r >= lo_[2] && c[2] - r <= hi_[2] && !lookup(x, y, c[2] - r)) return false;
                if (r > 0 && c[2] + r >= lo_[2] && c[2] + r <= hi_[2] && !lookup(x, y, c[2] + r)) return false;
            }
        }
    return true;
}

namespace {

// Cells whose keys differ by more than `ring` along some axis hold points
// at least (ring - 1) cells away from q on that axis; one cell of slack
// absorbs rounding in the key computation.
double ring_bound(std::int64_t ring, double cell) {
    return ring >= 1 ? static_cast<double>(ring - 1) * cell : 0.0;
}

std::int64_t first_ring(const std::array<std::int64_t, 3>& c, const std::array<std::int64_t, 3>& lo,
                        const std::array<std::int64_t, 3>& hi) {
    std::int64_t r = 0;
    for (int a = 0; a < 3; ++a) r = std::max({r, lo[a] - c[a], c[a] - hi[a]});
    return r;
}

// Cell lookups in one ring, ignoring clipping; used to decide when a linear
// scan becomes cheaper.
double ring_cost(std::int64_t r) {
    const double a = 2.0 * static_cast<double>(r) + 1.0;
    return r == 0 ? 1.0 : a * a * a - (a - 2.0) * (a - 2.0) * (a - 2.0);
}

bool scan_is_cheaper(std::int64_t first, std::int64_t last, std::size_t points) {
    const double budget = static_cast<double>(points) + 64.0;
    double cost = 0.0;
    for (std::int64_t r = first; r <= last; ++r)
        if ((cost += ring_cost(r)) > budget) return true;
    return false;
}

}  // namespace

Neighbor UniformGrid::nearest(const Vec3& q, Metric m, Index exclude) const {
    auto r = knn(q, 1, m, exclude);
    return r.empty() ? Neighbor{} : r.front();
}

std::vector<Neighbor> UniformGrid::knn(const Vec3& q, Index k, Metric m, Index exclude) const {
    std::vector<Neighbor> best;  // keys, not distances, until the end
    if (k <= 0 || pts_.empty()) return best;
    auto offer = [&](Index i) {
        if (i == exclude) return;
        const double d = key_distance(q, pts_[static_cast<std::size_t>(i)], m);
        if (static_cast<Index>(best.size()) == k && !better(d, i, best.back().dist, best.back().index)) return;
        Neighbor nb{i, d};
        auto pos = std::upper_bound(best.begin(), best.end(), nb, [](const Neighbor& a, const Neighbor& b) {
            return better(a.dist, a.index, b.dist, b.index);
        });
        best.insert(pos, nb);
        if (static_cast<Index>(best.size()) > k) best.pop_back();
    };
    auto finish = [&] {
        for (auto& nb : best) nb.dist = from_key(nb.dist, m);
        return best;
    };

    const Key c = key_of(q);
    const std::int64_t last = rings_to_cover(c);
    double cost = 0.0;
    const double budget = static_cast<double>(pts_.size()) + 64.0;
    for (std::int64_t r = first_ring(c, lo_, hi_); r <= last; ++r) {
        cost += ring_cost(r);
        if (cost > budget) {
            best.clear();
            for (Index i = 0; i < size(); ++i) offer(i);
            return finish();
        }
        visit_ring(c, r, [&](Index b, Index n) {
            for (Index s = b; s < b + n; ++s) offer(order_[static_cast<std::size_t>(s)]);
            return true;
        });
        if (static_cast<Index>(best.size()) == k && best.back().dist < to_key(ring_bound(r, cell_), m)) break;
    }
    return finish();
}

std::vector<Index> UniformGrid::within(const Vec3& q, double radius, Metric m, Index exclude) const {
    std::vector<Index> out;
    if (pts_.empty() || !(radius > 0.0)) return out;
    const double rk = to_key(radius, m);
    const Key c = key_of(q);
    const double span = std::ceil(radius / cell_) + 1.0;
    const std::int64_t last =
        std::min(rings_to_cover(c), static_cast<std::int64_t>(std::min(span, 4.0e15)));
    if (scan_is_cheaper(first_ring(c, lo_, hi_), last, pts_.size())) {
        for (Index i = 0; i < size(); ++i)
            if (i != exclude && key_distance(q, pts_[static_cast<std::size_t>(i)], m) < rk) out.push_back(i);
        return out;
    }
    for (std::int64_t r = first_ring(c, lo_, hi_); r <= last; ++r)
        visit_ring(c, r, [&](Index b, Index n) {
            for (Index s = b; s < b + n; ++s) {
                const Index i = order_[static_cast<std::size_t>(s)];
                if (i != exclude && key_distance(q, pts_[static_cast<std::size_t>(i)], m) < rk) out.push_back(i);
            }
            return true;
        });
    std::sort(out.begin(), out.end());
    return out;
}

bool UniformGrid::any_within(const Vec3& q, double radius, Metric m, Index exclude) const {
    if (pts_.empty() || !(radius > 0.0)) return false;
    const double rk = to_key(radius, m);
    const Key c = key_of(q);
    const double span = std::ceil(radius / cell_) + 1.0;
    const std::int64_t last =
        std::min(rings_to_cover(c), static_cast<std::int64_t>(std::min(span, 4.0e15)));
    if (scan_is_cheaper(first_ring(c, lo_, hi_), last, pts_.size())) {
        for (Index i = 0; i < size(); ++i)
            if (i != exclude && key_distance(q, pts_[static_cast<std::size_t>(i)], m) < rk) return true;
        return false;
    }
    bool found = false;
    for (std::int64_t r = first_ring(c, lo_, hi_); r <= last && !found; ++r)
        visit_ring(c, r, [&](Index b, Index n) {
            for (Index s = b; s < b + n; ++s) {
                const Index i = order_[static_cast<std::size_t>(s)];
                if (i != exclude && key_distance(q, pts_[static_cast<std::size_t>(i)], m) < rk) {
                    found = true;
                    return false;
                }
            }
            return true;
        });
    return found;
}

}  // namespace polydiff::spatial
