#include "polydiff/geomio/sampling.hpp"

#include "polydiff/core/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace polydiff::geomio {

namespace {

struct FacePicker {
    std::vector<double> cdf;
    double total = 0.0;

    explicit FacePicker(const TriMesh& mesh) {
        cdf.reserve(static_cast<std::size_t>(mesh.face_count()));
        for (Index f = 0; f < mesh.face_count(); ++f) {
            total += mesh.face_area(f);
            cdf.push_back(total);
        }
        if (!(total > 0.0)) throw ArgumentError("sampling: mesh has zero surface area");
    }

    Index pick(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, total);
        const double r = u(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        if (it == cdf.end()) --it;  // r == total after rounding
        return static_cast<Index>(it - cdf.begin());
    }
};

struct Draw {
    Index face;
    Vec3 bary;
    Vec3 point;
};

Draw draw(const TriMesh& mesh, const FacePicker& picker, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Index f = picker.pick(rng);
    double u = u01(rng), v = u01(rng);
    if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    const Vec3 b(1.0 - u - v, u, v);
    return {f, b, barycentric_point(mesh, f, b)};
}

// Accepted darts binned by cells of edge r; neighbours within r live in the
// 27 surrounding cells.
class DartGrid {
public:
    explicit DartGrid(double r) : r_(r) {}

    bool clear_of(const Vec3& p) const {
        const auto c = key(p);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == cells_.end()) continue;
                    for (const Vec3& q : it->second)
                        if ((p - q).squaredNorm() < r_ * r_) return false;
                }
        return true;
    }
    void insert(const Vec3& p) { cells_[key(p)].push_back(p); }

private:
    using Key = std::array<std::int64_t, 3>;
    struct Hash {
        std::size_t operator()(const Key& k) const noexcept {
            return static_cast<std::size_t>(k[0] * 73856093LL ^ k[1] * 19349663LL ^ k[2] * 83492791LL);
        }
    };
    Key key(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor(p.x() / r_)), static_cast<std::int64_t>(std::floor(p.y() / r_)),
                static_cast<std::int64_t>(std::floor(p.z() / r_))};
    }
    double r_;
    std::unordered_map<Key, std::vector<Vec3>, Hash> cells_;
};

ConditionCloud pack(const std::vector<Draw>& draws) {
    ConditionCloud c;
    const auto n = static_cast<Index>(draws.size());
    c.points.resize(n, 3);
    c.bary.resize(n, 3);
    c.face_id.resize(draws.size());
    for (Index i = 0; i < n; ++i) {
        const auto& d = draws[static_cast<std::size_t>(i)];
        c.points.row(i) = d.point.transpose();
        c.bary.row(i) = d.bary.transpose();
        c.face_id[static_cast<std::size_t>(i)] = d.face;
    }
    return c;
}

}  // namespace

ConditionCloud poisson_disk_sample(const TriMesh& mesh, Index count, std::uint64_t seed, const PoissonOptions& opt,
                                   PoissonReport* report) {
    if (count < 1) throw ArgumentError("poisson_disk_sample: count must be at least 1");
    if (!(opt.radius_factor >= 0.0) || !(opt.candidate_factor > 0.0))
        throw ArgumentError("poisson_disk_sample: radius and candidate factors must be positive");
    const FacePicker picker(mesh);
    std::mt19937_64 rng(seed);
    const double r = opt.radius_factor * std::sqrt(picker.total / static_cast<double>(count));

    const auto darts = static_cast<Index>(std::ceil(opt.candidate_factor * static_cast<double>(count)));
    std::vector<Draw> accepted;
    if (r > 0.0) {
        DartGrid grid(r);
        for (Index k = 0; k < darts; ++k) {
            Draw d = draw(mesh, picker, rng);
            if (!grid.clear_of(d.point)) continue;
            grid.insert(d.point);
            accepted.push_back(d);
        }
    } else {
        for (Index k = 0; k < count; ++k) accepted.push_back(draw(mesh, picker, rng));
    }

    PoissonReport rep;
    rep.radius = r;
    rep.accepted = static_cast<Index>(accepted.size());
    if (rep.accepted > count) {
        std::vector<std::size_t> idx(accepted.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(count));
        std::sort(idx.begin(), idx.end());
        std::vector<Draw> kept;
        kept.reserve(idx.size());
        for (auto i : idx) kept.push_back(accepted[i]);
        rep.trimmed = rep.accepted - count;
        accepted = std::move(kept);
    }
    while (static_cast<Index>(accepted.size()) < count) {
        accepted.push_back(draw(mesh, picker, rng));
        ++rep.compensated;
    }
    if (report) *report = rep;
    return pack(accepted);
}

ConditionCloud area_sample(const TriMesh& mesh, Index count, std::uint64_t seed) {
    if (count < 1) throw ArgumentError("area_sample: count must be at least 1");
    const FacePicker picker(mesh);
    std::mt19937_64 rng(seed);
    std::vector<Draw> draws;
    draws.reserve(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) draws.push_back(draw(mesh, picker, rng));
    return pack(draws);
}

}  // namespace polydiff::geomio
