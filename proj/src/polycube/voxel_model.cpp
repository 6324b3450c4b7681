#include "polydiff/polycube/voxel_model.hpp"

#include "polydiff/core/error.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace polydiff::polycube {

namespace {

Cell step(Cell c, int axis, long d) {
    c[static_cast<std::size_t>(axis)] += d;
    return c;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

using Edge = std::pair<Cell, Cell>;
Edge make_edge(const Cell& a, const Cell& b) { return a < b ? Edge{a, b} : Edge{b, a}; }

}  // namespace

std::array<Cell, 4> BoundaryFace::corners() const {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    const Cell base = sign > 0 ? step(voxel, axis, 1) : voxel;
    const Cell bu = step(base, u, 1), bv = step(base, v, 1), buv = step(bu, v, 1);
    if (sign > 0) return {base, bu, buv, bv};
    return {base, bv, buv, bu};
}

bool VoxelModel::contains(const Cell& c) const { return std::binary_search(voxels.begin(), voxels.end(), c); }

std::vector<BoundaryFace> VoxelModel::boundary_faces() const {
    std::vector<BoundaryFace> out;
    for (const Cell& c : voxels)
        for (int a = 0; a < 3; ++a)
            for (int s : {-1, 1})
                if (!contains(step(c, a, s))) out.push_back({c, a, s});
    return out;
}

Vec3 VoxelModel::position(const Cell& p) const {
    return grid.origin + grid.h * Vec3(static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2]));
}

VoxelModel voxelize(const std::vector<PlanarPatch>& patches, const GridFrame& grid, VoxelizeReport* report) {
    if (patches.empty()) throw ValidityError("polycube: no patches to assemble");
    Cell lo{LONG_MAX, LONG_MAX, LONG_MAX}, hi{LONG_MIN, LONG_MIN, LONG_MIN};
    for (const auto& p : patches) {
        const auto a = static_cast<std::size_t>(axis_of(p.label));
        lo[a] = std::min(lo[a], p.offset);
        hi[a] = std::max(hi[a], p.offset);
    }
    for (std::size_t a = 0; a < 3; ++a)
        if (!(lo[a] < hi[a])) throw ValidityError(std::string("polycube: no extent along ") + "XYZ"[a]);

    VoxelizeReport rep;
    std::array<std::set<Cell>, 3> fills;
    std::vector<std::string> open;
    for (int a = 0; a < 3; ++a) {
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        // column (u, v) -> crossings (offset, outward sign)
        std::map<std::array<long, 2>, std::vector<std::pair<long, int>>> columns;
        for (const auto& p : patches)
            if (axis_of(p.label) == a)
                for (const auto& c : p.cells) columns[c].push_back({p.offset, sign_of(p.label)});
        for (auto& [col, hits] : columns) {
            std::sort(hits.begin(), hits.end());
            if (hits.size() % 2 != 0) {
                open.push_back(std::string("XYZ").substr(static_cast<std::size_t>(a), 1) + "-column (" +
                               std::to_string(col[0]) + ", " + std::to_string(col[1]) + ")");
                continue;
            }
            for (std::size_t k = 0; k < hits.size(); ++k) {
                const bool entering = k % 2 == 0;
                if ((entering && hits[k].second > 0) || (!entering && hits[k].second < 0)) ++rep.orientation_mismatches;
            }
            for (std::size_t k = 0; k + 1 < hits.size(); k += 2)
                for (long i = hits[k].first; i < hits[k + 1].first; ++i) {
                    Cell c{};
                    c[static_cast<std::size_t>(a)] = i;
                    c[static_cast<std::size_t>(u)] = col[0];
                    c[static_cast<std::size_t>(v)] = col[1];
                    fills[static_cast<std::size_t>(a)].insert(c);
                }
        }
    }
    if (!open.empty()) {
        std::string msg = "polycube: boundary is not watertight; odd crossings on";
        for (std::size_t k = 0; k < std::min<std::size_t>(open.size(), 8); ++k) msg += " " + open[k];
        if (open.size() > 8) msg += " and " + std::to_string(open.size() - 8) + " more";
        throw ValidityError(msg);
    }
    for (int a = 1; a < 3; ++a)
        if (fills[static_cast<std::size_t>(a)] != fills[0]) {
            std::vector<Cell> diff;
            std::set_symmetric_difference(fills[0].begin(), fills[0].end(), fills[static_cast<std::size_t>(a)].begin(),
                                          fills[static_cast<std::size_t>(a)].end(), std::back_inserter(diff));
            std::string msg = "polycube: boundary is not watertight; X and " + std::string("XYZ").substr(a, 1) +
                              " fills disagree at";
            for (std::size_t k = 0; k < std::min<std::size_t>(diff.size(), 8); ++k)
                msg += " (" + std::to_string(diff[k][0]) + ", " + std::to_string(diff[k][1]) + ", " +
                       std::to_string(diff[k][2]) + ")";
            throw ValidityError(msg);
        }
    if (fills[0].empty()) throw ValidityError("polycube: parity fill found no interior cells");
    VoxelModel vm;
    vm.grid = grid;
    vm.voxels.assign(fills[0].begin(), fills[0].end());
    if (report) *report = rep;
    return vm;
}

StructureReport structure_report(const VoxelModel& vm) {
    StructureReport r;
    r.voxels = static_cast<Index>(vm.voxels.size());
    const auto faces = vm.boundary_faces();
    r.boundary_faces = static_cast<Index>(faces.size());

    std::map<Edge, std::vector<std::size_t>> edge_faces;
    std::map<Cell, std::vector<std::size_t>> vertex_faces;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto c = faces[f].corners();
        for (int k = 0; k < 4; ++k) {
            edge_faces[make_edge(c[static_cast<std::size_t>(k)], c[static_cast<std::size_t>((k + 1) % 4)])].push_back(f);
            vertex_faces[c[static_cast<std::size_t>(k)]].push_back(f);
        }
    }
    r.vertices = static_cast<Index>(vertex_faces.size());
    r.edges = static_cast<Index>(edge_faces.size());
    r.euler = r.vertices - r.edges + r.boundary_faces;
    for (const auto& [e, fs] : edge_faces)
        if (fs.size() % 2 != 0) r.watertight = false;

    // Volume components by face adjacency.
    UnionFind vox(vm.voxels.size());
    for (std::size_t i = 0; i < vm.voxels.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            const Cell n = step(vm.voxels[i], a, 1);
            auto it = std::lower_bound(vm.voxels.begin(), vm.voxels.end(), n);
            if (it != vm.voxels.end() && *it == n) vox.unite(i, static_cast<std::size_t>(it - vm.voxels.begin()));
        }
    for (std::size_t i = 0; i < vm.voxels.size(); ++i) r.volume_components += vox.find(i) == i;

    // Surface components by shared edges.
    UnionFind surf(faces.size());
    for (const auto& [e, fs] : edge_faces)
        for (std::size_t k = 1; k < fs.size(); ++k) surf.unite(fs[0], fs[k]);
    std::map<std::size_t, std::size_t> comp_of_root;
    for (std::size_t f = 0; f < faces.size(); ++f)
        if (surf.find(f) == f) {
            comp_of_root[f] = r.surfaces.size();
            r.surfaces.push_back({});
        }
    std::vector<std::set<Cell>> comp_vertices(r.surfaces.size());
    std::vector<Index> comp_edges(r.surfaces.size(), 0);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const std::size_t c = comp_of_root[surf.find(f)];
        ++r.surfaces[c].faces;
        for (const Cell& p : faces[f].corners()) comp_vertices[c].insert(p);
    }
    for (const auto& [e, fs] : edge_faces) ++comp_edges[comp_of_root[surf.find(fs[0])]];
    for (std::size_t c = 0; c < r.surfaces.size(); ++c) {
        r.surfaces[c].euler = static_cast<Index>(comp_vertices[c].size()) - comp_edges[c] + r.surfaces[c].faces;
        r.surfaces[c].genus = (2.0 - static_cast<double>(r.surfaces[c].euler)) / 2.0;
    }

    for (const auto& [v, fs] : vertex_faces) {
        int axes = 0;
        for (std::size_t f : fs) axes |= 1 << faces[f].axis;
        if (axes != 7) continue;
        Corner c{v, static_cast<int>(fs.size()), 0};
        for (int a = 0; a < 3; ++a)
            for (int s : {-1, 1}) {
                auto it = edge_faces.find(make_edge(v, step(v, a, s)));
                if (it == edge_faces.end()) continue;
                int edge_axes = 0;
                for (std::size_t f : it->second) edge_axes |= 1 << faces[f].axis;
                if (edge_axes & (edge_axes - 1)) ++c.feature_edges;
            }
        r.corners.push_back(c);
    }
    return r;
}

void save_voxels(const VoxelModel& vm, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write voxels " + path.string());
    std::fprintf(f, "voxels h=%.17g\norigin %.17g %.17g %.17g\n", vm.grid.h, vm.grid.origin.x(), vm.grid.origin.y(),
                 vm.grid.origin.z());
    for (const Cell& c : vm.voxels) std::fprintf(f, "%ld %ld %ld\n", c[0], c[1], c[2]);
    if (std::fclose(f) != 0) throw DataError("failed writing voxels " + path.string());
}

VoxelModel load_voxels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open voxels " + path.string());
    VoxelModel vm;
    std::string line;
    if (!std::getline(in, line) || line.rfind("voxels h=", 0) != 0) throw ParseError("voxels: missing header", 1);
    try {
        vm.grid.h = std::stod(line.substr(9));
    } catch (const std::exception&) {
        throw ParseError("voxels: bad unit in header", 1);
    }
    if (!(vm.grid.h > 0.0)) throw ParseError("voxels: unit must be positive", 1);
    std::string tag;
    if (!std::getline(in, line) || !(std::istringstream(line) >> tag >> vm.grid.origin.x() >> vm.grid.origin.y() >>
                                     vm.grid.origin.z()) ||
        tag != "origin")
        throw ParseError("voxels: missing origin line", 2);
    long line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        Cell c{};
        std::string extra;
        if (!(ls >> c[0] >> c[1] >> c[2]) || (ls >> extra)) throw ParseError("voxels: expected three integers", line_no);
        vm.voxels.push_back(c);
    }
    std::sort(vm.voxels.begin(), vm.voxels.end());
    vm.voxels.erase(std::unique(vm.voxels.begin(), vm.voxels.end()), vm.voxels.end());
    return vm;
}

void save_boundary_obj(const VoxelModel& vm, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write " + path.string());
    std::map<Cell, long> ids;
    std::vector<std::array<long, 4>> quads;
    for (const auto& face : vm.boundary_faces()) {
        std::array<long, 4> q{};
        const auto c = face.corners();
        for (std::size_t k = 0; k < 4; ++k) {
            auto [it, fresh] = ids.emplace(c[k], static_cast<long>(ids.size()) + 1);
            if (fresh) {
                const Vec3 p = vm.position(c[k]);
                std::fprintf(f, "v %.17g %.17g %.17g\n", p.x(), p.y(), p.z());
            }
            q[k] = it->second;
        }
        quads.push_back(q);
    }
    for (const auto& q : quads) std::fprintf(f, "f %ld %ld %ld %ld\n", q[0], q[1], q[2], q[3]);
    if (std::fclose(f) != 0) throw DataError("failed writing " + path.string());
}

Extraction extract_structure(const Mat& cloud, const ExtractOptions& opt) {
    if (cloud.cols() != 6) throw DimensionError("polycube: cloud needs six channels (points and normals)");
    if (cloud.rows() == 0) throw DataError("polycube: empty cloud");
    Extraction ex;
    const Mat pts = opt.reestimate_normals ? reestimate_normals(cloud, opt.normal_k) : cloud;
    ex.labels = label_points(pts);
    double gap;
    if (opt.gap)
        gap = *opt.gap;
    else if (opt.h)
        gap = 0.35 * *opt.h;
    else
        gap = 0.05 * (pts.leftCols<3>().colwise().maxCoeff() - pts.leftCols<3>().colwise().minCoeff()).norm();
    ex.planes = cluster_planes(pts, ex.labels, gap);
    const GridFrame grid = choose_grid(ex.planes, gap, opt.h);
    ex.patches = snap_patches(pts, ex.planes, grid, opt.patches);
    ex.model = voxelize(ex.patches, grid, &ex.fill);
    return ex;
}

}  // namespace polydiff::polycube
