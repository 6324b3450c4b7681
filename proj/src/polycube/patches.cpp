#include "polydiff/polycube/patches.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/spatial/grid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace polydiff::polycube {

std::string to_string(AxisLabel l) {
    static const char* names[] = {"+X", "-X", "+Y", "-Y", "+Z", "-Z"};
    return names[static_cast<int>(l)];
}

namespace {

void require_normals(const Mat& cloud) {
    if (cloud.cols() != 6) throw DimensionError("polycube: cloud needs six channels (points and normals)");
}

}  // namespace

std::vector<AxisLabel> label_points(const Mat& cloud) {
    require_normals(cloud);
    std::vector<AxisLabel> out(static_cast<std::size_t>(cloud.rows()));
    for (Index i = 0; i < cloud.rows(); ++i) {
        const Vec3 n = cloud.row(i).tail<3>().transpose();
        if (!n.allFinite() || n.squaredNorm() == 0.0)
            throw DataError("polycube: point " + std::to_string(i) + " has no usable normal");
        int best = 0;
        double best_dot = n.x();
        for (int k = 1; k < 6; ++k) {
            const double d = (k % 2 == 0 ? 1.0 : -1.0) * n[k / 2];
            if (d > best_dot) {
                best_dot = d;
                best = k;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<AxisLabel>(best);
    }
    return out;
}

Mat reestimate_normals(const Mat& cloud, int k) {
    require_normals(cloud);
    if (k < 3) throw ArgumentError("polycube: normal re-estimation needs k >= 3");
    if (cloud.rows() < k) throw DataError("polycube: fewer points than the normal neighbourhood");
    const spatial::UniformGrid grid(cloud.leftCols<3>(), spatial::UniformGrid::suggest_cell(cloud.leftCols<3>()));
    Mat out = cloud;
#pragma omp parallel for schedule(dynamic, 128)
    for (Index i = 0; i < cloud.rows(); ++i) {
        const Vec3 p = cloud.row(i).head<3>().transpose();
        const auto nb = grid.knn(p, k - 1, spatial::Metric::L2, i);
        Vec3 mean = p;
        for (const auto& q : nb) mean += grid.point(q.index);
        mean /= static_cast<double>(nb.size() + 1);
        Mat3 cov = (p - mean) * (p - mean).transpose();
        for (const auto& q : nb) cov += (grid.point(q.index) - mean) * (grid.point(q.index) - mean).transpose();
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        Vec3 n = es.eigenvectors().col(0);
        if (n.dot(cloud.row(i).tail<3>().transpose()) < 0) n = -n;
        out.row(i).tail<3>() = n.transpose();
    }
    return out;
}

std::vector<PlaneCluster> cluster_planes(const Mat& cloud, const std::vector<AxisLabel>& labels, double gap) {
    if (!(gap > 0.0)) throw ArgumentError("polycube: clustering gap must be positive");
    if (static_cast<Index>(labels.size()) != cloud.rows()) throw DimensionError("polycube: one label per point");
    std::vector<PlaneCluster> out;
    for (int l = 0; l < 6; ++l) {
        const auto label = static_cast<AxisLabel>(l);
        const int a = axis_of(label);
        std::vector<Index> idx;
        for (Index i = 0; i < cloud.rows(); ++i)
            if (labels[static_cast<std::size_t>(i)] == label) idx.push_back(i);
        std::stable_sort(idx.begin(), idx.end(), [&](Index x, Index y) { return cloud(x, a) < cloud(y, a); });
        std::size_t s = 0;
        while (s < idx.size()) {
            std::size_t e = s + 1;
            while (e < idx.size() && cloud(idx[e], a) - cloud(idx[e - 1], a) <= gap) ++e;
            PlaneCluster c{label, 0.0, {idx.begin() + static_cast<std::ptrdiff_t>(s), idx.begin() + static_cast<std::ptrdiff_t>(e)}};
            for (Index i : c.members) c.offset += cloud(i, a);
            c.offset /= static_cast<double>(c.members.size());
            std::sort(c.members.begin(), c.members.end());
            out.push_back(std::move(c));
            s = e;
        }
    }
    return out;
}

GridFrame choose_grid(const std::vector<PlaneCluster>& planes, double gap, std::optional<double> h) {
    if (h && !(*h > 0.0)) throw ArgumentError("polycube: grid unit must be positive");
    GridFrame g;
    std::array<std::vector<double>, 3> offsets;
    for (const auto& p : planes) offsets[static_cast<std::size_t>(axis_of(p.label))].push_back(p.offset);
    double smallest = INFINITY;
    for (int a = 0; a < 3; ++a) {
        auto& o = offsets[static_cast<std::size_t>(a)];
        std::sort(o.begin(), o.end());
        if (o.empty() || o.back() - o.front() <= gap)
            throw DataError(std::string("polycube: fewer than two planes along ") + "XYZ"[a] +
                            "; the cloud does not enclose a volume");
        g.origin[a] = o.front();
        for (std::size_t k = 1; k < o.size(); ++k)
            if (o[k] - o[k - 1] > gap) smallest = std::min(smallest, o[k] - o[k - 1]);
    }
    if (h) {
        g.h = *h;
        return g;
    }
    const double mag = std::pow(10.0, std::floor(std::log10(smallest)));
    const double h0 = std::round(smallest / mag) * mag;
    double num = 0.0, den = 0.0;
    for (int a = 0; a < 3; ++a)
        for (double o : offsets[static_cast<std::size_t>(a)]) {
            const double steps = std::round((o - g.origin[a]) / h0);
            if (steps > 0) {
                num += o - g.origin[a];
                den += steps;
            }
        }
    g.h = num / den;
    return g;
}

std::vector<PlanarPatch> snap_patches(const Mat& cloud, const std::vector<PlaneCluster>& planes, const GridFrame& grid,
                                      const PatchOptions& opt) {
    if (!(grid.h > 0.0)) throw ArgumentError("polycube: grid unit must be positive");
    if (!(opt.min_cell_fraction >= 0.0)) throw ArgumentError("polycube: min_cell_fraction must be non-negative");
    using Cell2 = std::array<long, 2>;
    std::vector<PlanarPatch> out;
    std::vector<std::size_t> source;  // cluster of each patch
    for (std::size_t pi = 0; pi < planes.size(); ++pi) {
        const auto& plane = planes[pi];
        const int a = axis_of(plane.label), u = (a + 1) % 3, v = (a + 2) % 3;
        const long offset = std::lround((plane.offset - grid.origin[a]) / grid.h);
        std::map<Cell2, std::vector<Index>> cells;
        for (Index i : plane.members) {
            const Cell2 c{static_cast<long>(std::floor((cloud(i, u) - grid.origin[u]) / grid.h)),
                          static_cast<long>(std::floor((cloud(i, v) - grid.origin[v]) / grid.h))};
            cells[c].push_back(i);
        }
        std::vector<std::size_t> counts;
        for (const auto& [c, m] : cells) counts.push_back(m.size());
        std::nth_element(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(counts.size() / 2), counts.end());
        const double floor_count = std::max(1.0, opt.min_cell_fraction * static_cast<double>(counts[counts.size() / 2]));
        for (auto it = cells.begin(); it != cells.end();)
            it = static_cast<double>(it->second.size()) < floor_count ? cells.erase(it) : std::next(it);

        std::map<Cell2, bool> seen;
        for (const auto& [start, unused] : cells) {
            if (seen[start]) continue;
            PlanarPatch patch{plane.label, offset, plane.offset, {}, {}};
            std::vector<Cell2> stack{start};
            seen[start] = true;
            while (!stack.empty()) {
                const Cell2 c = stack.back();
                stack.pop_back();
                patch.cells.push_back(c);
                const auto& m = cells.at(c);
                patch.members.insert(patch.members.end(), m.begin(), m.end());
                for (const Cell2 d : {Cell2{c[0] + 1, c[1]}, Cell2{c[0] - 1, c[1]}, Cell2{c[0], c[1] + 1}, Cell2{c[0], c[1] - 1}})
                    if (cells.count(d) && !seen[d]) {
                        seen[d] = true;
                        stack.push_back(d);
                    }
            }
            std::sort(patch.cells.begin(), patch.cells.end());
            std::sort(patch.members.begin(), patch.members.end());
            out.push_back(std::move(patch));
            source.push_back(pi);
        }
    }

    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            const auto &p = out[i], &q = out[j];
            if (source[i] == source[j] || axis_of(p.label) != axis_of(q.label) || p.offset != q.offset) continue;
            std::vector<Cell2> common;
            std::set_intersection(p.cells.begin(), p.cells.end(), q.cells.begin(), q.cells.end(),
                                  std::back_inserter(common));
            if (common.empty()) continue;
            const std::string where = std::string("XYZ").substr(static_cast<std::size_t>(axis_of(p.label)), 1) + " = " +
                                      std::to_string(p.offset);
            if (p.label == q.label)
                throw ValidityError("polycube: planes at " + std::to_string(p.raw_offset) + " and " +
                                    std::to_string(q.raw_offset) + " both snap to " + where +
                                    " (grid unit too coarse)");
            throw ValidityError("polycube: opposite faces meet on " + where + " (feature thinner than one cell)");
        }
    return out;
}

}  // namespace polydiff::polycube
