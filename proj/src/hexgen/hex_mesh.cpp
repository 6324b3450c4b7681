#include "polydiff/hexgen/hex_mesh.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/hexgen/quality.hpp"

#include <algorithm>
#include <map>

namespace polydiff::hexgen {

const std::array<std::array<int, 4>, 6> kHexFaces{{
    {0, 3, 2, 1},  // bottom
    {4, 5, 6, 7},  // top
    {0, 1, 5, 4},
    {1, 2, 6, 5},
    {2, 3, 7, 6},
    {3, 0, 4, 7},
}};

const std::array<std::array<int, 2>, 12> kHexEdges{{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

namespace {

using QuadKey = std::array<Index, 4>;

QuadKey sorted_key(const std::array<Index, 4>& q) {
    QuadKey k = q;
    std::sort(k.begin(), k.end());
    return k;
}

std::array<Index, 4> face_vertices(const HexMesh& hm, Index c, int f) {
    std::array<Index, 4> q{};
    for (std::size_t k = 0; k < 4; ++k) q[k] = hm.cells(c, kHexFaces[static_cast<std::size_t>(f)][k]);
    return q;
}

// Same cyclic order up to rotation.
bool same_cycle(const std::array<Index, 4>& a, const std::array<Index, 4>& b) {
    for (std::size_t r = 0; r < 4; ++r) {
        bool eq = true;
        for (std::size_t k = 0; k < 4 && eq; ++k) eq = a[k] == b[(k + r) % 4];
        if (eq) return true;
    }
    return false;
}

std::map<QuadKey, std::vector<Quad>> face_table(const HexMesh& hm) {
    std::map<QuadKey, std::vector<Quad>> t;
    for (Index c = 0; c < hm.cell_count(); ++c)
        for (int f = 0; f < 6; ++f) {
            const auto q = face_vertices(hm, c, f);
            t[sorted_key(q)].push_back({c, f, q});
        }
    return t;
}

std::vector<std::vector<Index>> vertex_neighbours(const HexMesh& hm) {
    std::vector<std::vector<Index>> nb(static_cast<std::size_t>(hm.vertex_count()));
    for (Index c = 0; c < hm.cell_count(); ++c)
        for (const auto& e : kHexEdges) {
            const Index a = hm.cells(c, e[0]), b = hm.cells(c, e[1]);
            nb[static_cast<std::size_t>(a)].push_back(b);
            nb[static_cast<std::size_t>(b)].push_back(a);
        }
    for (auto& v : nb) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return nb;
}

void check_step(int iters, double step) {
    if (iters < 0) throw ArgumentError("smoothing: iteration count must be non-negative");
    if (!(step >= 0.0 && step <= 1.0)) throw ArgumentError("smoothing: step must lie in [0, 1]");
}

}  // namespace

std::vector<Quad> boundary_quads(const HexMesh& hm) {
    std::vector<Quad> out;
    for (const auto& [key, uses] : face_table(hm))
        if (uses.size() == 1) out.push_back(uses.front());
    std::sort(out.begin(), out.end(), [](const Quad& a, const Quad& b) {
        return a.cell < b.cell || (a.cell == b.cell && a.face < b.face);
    });
    return out;
}

Conformity check_conformity(const HexMesh& hm) {
    Conformity c;
    for (const auto& [key, uses] : face_table(hm)) {
        if (uses.size() == 1) {
            ++c.boundary;
        } else if (uses.size() == 2) {
            auto rev = uses[1].v;
            std::reverse(rev.begin(), rev.end());
            if (same_cycle(uses[0].v, rev))
                ++c.interior;
            else
                ++c.violations;
        } else {
            ++c.violations;
        }
    }
    return c;
}

void mark_boundary(HexMesh& hm) {
    hm.boundary.assign(static_cast<std::size_t>(hm.vertex_count()), 0);
    for (const auto& q : boundary_quads(hm))
        for (Index v : q.v) hm.boundary[static_cast<std::size_t>(v)] = 1;
}

HexMesh extract_hexes(const polycube::VoxelModel& vm, int s) {
    if (s < 1) throw ArgumentError("extract_hexes: subdivision must be at least 1");
    static const int offs[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    std::map<polycube::Cell, Index> ids;
    std::vector<polycube::Cell> keys;
    std::vector<std::array<Index, 8>> cells;
    for (const auto& v : vm.voxels)
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j)
                for (int k = 0; k < s; ++k) {
                    std::array<Index, 8> cell{};
                    for (int c = 0; c < 8; ++c) {
                        const polycube::Cell key{v[0] * s + i + offs[c][0], v[1] * s + j + offs[c][1],
                                                 v[2] * s + k + offs[c][2]};
                        auto [it, fresh] = ids.emplace(key, static_cast<Index>(keys.size()));
                        if (fresh) keys.push_back(key);
                        cell[static_cast<std::size_t>(c)] = it->second;
                    }
                    cells.push_back(cell);
                }
    HexMesh hm;
    hm.vertices.resize(static_cast<Index>(keys.size()), 3);
    const double step = vm.grid.h / s;
    for (std::size_t i = 0; i < keys.size(); ++i)
        for (int a = 0; a < 3; ++a)
            hm.vertices(static_cast<Index>(i), a) = vm.grid.origin[a] + step * static_cast<double>(keys[i][static_cast<std::size_t>(a)]);
    hm.cells.resize(static_cast<Index>(cells.size()), 8);
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (int k = 0; k < 8; ++k) hm.cells(static_cast<Index>(c), k) = cells[c][static_cast<std::size_t>(k)];
    hm.anchors.assign(keys.size(), Anchor{});
    mark_boundary(hm);
    return hm;
}

HexMesh smooth_interior(const HexMesh& hm, int iters, double step) {
    check_step(iters, step);
    const auto nb = vertex_neighbours(hm);
    HexMesh out = hm;
    Mat next = hm.vertices;
    for (int it = 0; it < iters; ++it) {
#pragma omp parallel for schedule(static)
        for (Index v = 0; v < hm.vertex_count(); ++v) {
            const auto& n = nb[static_cast<std::size_t>(v)];
            if (hm.boundary[static_cast<std::size_t>(v)] || n.empty()) continue;
            Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
            for (Index u : n) mean += out.vertices.row(u);
            mean /= static_cast<double>(n.size());
            next.row(v) = out.vertices.row(v) + step * (mean - out.vertices.row(v));
        }
        out.vertices = next;
    }
    return out;
}

HexMesh smooth_interior_reference(const HexMesh& hm, int iters, double step) {
    check_step(iters, step);
    const auto nb = vertex_neighbours(hm);
    HexMesh out = hm;
    for (int it = 0; it < iters; ++it) {
        Mat next = out.vertices;
        for (Index v = 0; v < hm.vertex_count(); ++v) {
            const auto& n = nb[static_cast<std::size_t>(v)];
            if (hm.boundary[static_cast<std::size_t>(v)] || n.empty()) continue;
            Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
            for (Index u : n) mean += out.vertices.row(u);
            mean /= static_cast<double>(n.size());
            next.row(v) = out.vertices.row(v) + step * (mean - out.vertices.row(v));
        }
        out.vertices = next;
    }
    return out;
}

PillowResult pillow_boundary(const HexMesh& hm, double thickness) {
    if (!(thickness > 0.0 && thickness < 0.5)) throw ArgumentError("pillow: thickness must lie in (0, 0.5)");
    PillowResult result;
    result.mesh = hm;
    const auto quads = boundary_quads(hm);
    if (quads.empty()) return result;

    const Index nv = hm.vertex_count();
    Mat normal_sum = Mat::Zero(nv, 3);
    std::vector<double> edge_sum(static_cast<std::size_t>(nv), 0.0);
    std::vector<int> edge_count(static_cast<std::size_t>(nv), 0);
    for (const auto& q : quads) {
        const Vec3 p0 = hm.vertices.row(q.v[0]).transpose(), p1 = hm.vertices.row(q.v[1]).transpose();
        const Vec3 p2 = hm.vertices.row(q.v[2]).transpose(), p3 = hm.vertices.row(q.v[3]).transpose();
        Vec3 n = (p2 - p0).cross(p3 - p1);
        if (n.norm() > 0.0) n.normalize();
        const double perimeter = (p1 - p0).norm() + (p2 - p1).norm() + (p3 - p2).norm() + (p0 - p3).norm();
        for (Index v : q.v) {
            normal_sum.row(v) += n.transpose();
            edge_sum[static_cast<std::size_t>(v)] += perimeter;
            edge_count[static_cast<std::size_t>(v)] += 4;
        }
    }

    std::vector<Index> copy(static_cast<std::size_t>(nv), -1);
    std::vector<Eigen::RowVector3d> inner;
    for (Index v = 0; v < nv; ++v) {
        if (edge_count[static_cast<std::size_t>(v)] == 0) continue;
        const double len = normal_sum.row(v).norm();
        const Eigen::RowVector3d inward = len > 0.0 ? Eigen::RowVector3d(-normal_sum.row(v) / len) : Eigen::RowVector3d::Zero();
        const double local_h = edge_sum[static_cast<std::size_t>(v)] / edge_count[static_cast<std::size_t>(v)];
        copy[static_cast<std::size_t>(v)] = nv + static_cast<Index>(inner.size());
        inner.push_back(hm.vertices.row(v) + thickness * local_h * inward);
    }

    HexMesh out;
    out.vertices.resize(nv + static_cast<Index>(inner.size()), 3);
    out.vertices.topRows(nv) = hm.vertices;
    for (std::size_t i = 0; i < inner.size(); ++i) out.vertices.row(nv + static_cast<Index>(i)) = inner[i];
    out.cells.resize(hm.cell_count() + static_cast<Index>(quads.size()), 8);
    for (Index c = 0; c < hm.cell_count(); ++c)
        for (int k = 0; k < 8; ++k) {
            const Index v = hm.cells(c, k);
            const Index cp = copy[static_cast<std::size_t>(v)];
            out.cells(c, k) = cp >= 0 ? cp : v;
        }
    // Bottom face outward order is (0, 3, 2, 1), so an outward quad q maps to
    // corners q0, q3, q2, q1 with the inset copies on top.
    for (std::size_t i = 0; i < quads.size(); ++i) {
        const auto& q = quads[i].v;
        const std::array<Index, 4> bottom{q[0], q[3], q[2], q[1]};
        const Index row = hm.cell_count() + static_cast<Index>(i);
        for (int k = 0; k < 4; ++k) {
            out.cells(row, k) = bottom[static_cast<std::size_t>(k)];
            out.cells(row, k + 4) = copy[static_cast<std::size_t>(bottom[static_cast<std::size_t>(k)])];
        }
    }
    out.anchors = hm.anchors;
    out.anchors.resize(static_cast<std::size_t>(out.vertex_count()), Anchor{});
    mark_boundary(out);

    const auto q = quality(out);
    if (q.inverted > 0) {
        result.inverted = q.inverted;
        result.error = "pillow: inset layer has " + std::to_string(q.inverted) + " cells with J <= 0; layer rejected";
        return result;
    }
    result.mesh = std::move(out);
    result.applied = true;
    return result;
}

}  // namespace polydiff::hexgen
