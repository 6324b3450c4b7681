#include "polydiff/hexgen/quality.hpp"

#include "polydiff/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace polydiff::hexgen {

const std::array<std::array<int, 3>, 8> kCornerFrames{{
    {1, 3, 4}, {2, 0, 5}, {3, 1, 6}, {0, 2, 7}, {7, 5, 0}, {4, 6, 1}, {5, 7, 2}, {6, 4, 3},
}};

namespace {

double longest_edge(const HexMesh& hm, Index c) {
    double l = 0.0;
    for (const auto& e : kHexEdges)
        l = std::max(l, (hm.vertices.row(hm.cells(c, e[1])) - hm.vertices.row(hm.cells(c, e[0]))).norm());
    return l;
}

double corner_value(const HexMesh& hm, Index c, int k, double longest) {
    const Eigen::RowVector3d o = hm.vertices.row(hm.cells(c, k));
    Mat3 frame;
    for (int j = 0; j < 3; ++j) {
        const Eigen::RowVector3d e = hm.vertices.row(hm.cells(c, kCornerFrames[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])) - o;
        const double len = e.norm();
        if (!(len > 1e-12 * longest)) return 0.0;
        frame.col(j) = e.transpose() / len;
    }
    return std::clamp(frame.determinant(), -1.0, 1.0);
}

double cell_value(const HexMesh& hm, Index c) {
    const double longest = longest_edge(hm, c);
    double j = 1.0;
    for (int k = 0; k < 8; ++k) j = std::min(j, corner_value(hm, c, k, longest));
    return j;
}

QualityReport summarize(std::vector<double> cells) {
    QualityReport r;
    r.cell_jacobian = std::move(cells);
    if (r.cell_jacobian.empty()) return r;
    r.j_min = INFINITY;
    double sum = 0.0;
    for (double j : r.cell_jacobian) {
        r.j_min = std::min(r.j_min, j);
        sum += j;
        r.inverted += j <= 0.0;
    }
    r.j_avg = sum / static_cast<double>(r.cell_jacobian.size());
    return r;
}

}  // namespace

double corner_jacobian(const HexMesh& hm, Index cell, int corner) {
    if (cell < 0 || cell >= hm.cell_count() || corner < 0 || corner > 7)
        throw ArgumentError("corner_jacobian: index out of range");
    return corner_value(hm, cell, corner, longest_edge(hm, cell));
}

QualityReport quality(const HexMesh& hm) {
    std::vector<double> j(static_cast<std::size_t>(hm.cell_count()));
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < hm.cell_count(); ++c) j[static_cast<std::size_t>(c)] = cell_value(hm, c);
    return summarize(std::move(j));
}

QualityReport quality_reference(const HexMesh& hm) {
    std::vector<double> j;
    for (Index c = 0; c < hm.cell_count(); ++c) {
        double worst = 1.0;
        for (int k = 0; k < 8; ++k) worst = std::min(worst, corner_jacobian(hm, c, k));
        j.push_back(worst);
    }
    return summarize(std::move(j));
}

void save_vtk(const HexMesh& hm, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write " + path.string());
    const long long np = hm.vertex_count(), nc = hm.cell_count();
    std::fprintf(f, "# vtk DataFile Version 3.0\npolydiff hex mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    std::fprintf(f, "POINTS %lld double\n", np);
    for (Index i = 0; i < np; ++i)
        std::fprintf(f, "%.17g %.17g %.17g\n", hm.vertices(i, 0), hm.vertices(i, 1), hm.vertices(i, 2));
    std::fprintf(f, "CELLS %lld %lld\n", nc, 9 * nc);
    for (Index c = 0; c < nc; ++c) {
        std::fprintf(f, "8");
        for (int k = 0; k < 8; ++k) std::fprintf(f, " %lld", static_cast<long long>(hm.cells(c, k)));
        std::fputc('\n', f);
    }
    std::fprintf(f, "CELL_TYPES %lld\n", nc);
    for (Index c = 0; c < nc; ++c) std::fprintf(f, "12\n");
    if (nc > 0) {
        const auto q = quality(hm);
        std::fprintf(f, "CELL_DATA %lld\nSCALARS scaled_jacobian double 1\nLOOKUP_TABLE default\n", nc);
        for (double j : q.cell_jacobian) std::fprintf(f, "%.17g\n", j);
    }
    if (std::fclose(f) != 0) throw DataError("failed writing " + path.string());
}

HexMesh load_vtk(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("# vtk DataFile", 0) != 0) throw ParseError("vtk: missing version line", 1);
    std::getline(in, line);  // title
    std::string word;
    in >> word;
    if (word != "ASCII") throw ParseError("vtk: only ASCII files are supported", 3);
    in >> word >> line;
    if (word != "DATASET" || line != "UNSTRUCTURED_GRID") throw ParseError("vtk: expected DATASET UNSTRUCTURED_GRID", 4);
    HexMesh hm;
    long long np = -1, nc = -1, size = -1;
    std::string type;
    if (!(in >> word >> np >> type) || word != "POINTS" || np < 0) throw ParseError("vtk: bad POINTS record");
    hm.vertices.resize(np, 3);
    for (Index i = 0; i < np * 3; ++i)
        if (!(in >> hm.vertices.data()[i])) throw ParseError("vtk: truncated POINTS");
    if (!(in >> word >> nc >> size) || word != "CELLS" || nc < 0) throw ParseError("vtk: bad CELLS record");
    hm.cells.resize(nc, 8);
    for (Index c = 0; c < nc; ++c) {
        long long n = 0;
        if (!(in >> n) || n != 8) throw ParseError("vtk: only hexahedra are supported");
        for (int k = 0; k < 8; ++k) {
            long long v = -1;
            if (!(in >> v) || v < 0 || v >= np) throw ParseError("vtk: bad cell index");
            hm.cells(c, k) = static_cast<Index>(v);
        }
    }
    if (!(in >> word >> size) || word != "CELL_TYPES" || size != nc) throw ParseError("vtk: bad CELL_TYPES record");
    for (Index c = 0; c < nc; ++c) {
        int t = 0;
        if (!(in >> t) || t != 12) throw ParseError("vtk: cell type must be 12");
    }
    hm.anchors.assign(static_cast<std::size_t>(np), Anchor{});
    mark_boundary(hm);
    return hm;
}

void save_shell_obj(const HexMesh& hm, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write " + path.string());
    for (Index i = 0; i < hm.vertex_count(); ++i)
        std::fprintf(f, "v %.17g %.17g %.17g\n", hm.vertices(i, 0), hm.vertices(i, 1), hm.vertices(i, 2));
    for (const auto& q : boundary_quads(hm))
        std::fprintf(f, "f %lld %lld %lld %lld\n", static_cast<long long>(q.v[0] + 1), static_cast<long long>(q.v[1] + 1),
                     static_cast<long long>(q.v[2] + 1), static_cast<long long>(q.v[3] + 1));
    if (std::fclose(f) != 0) throw DataError("failed writing " + path.string());
}

}  // namespace polydiff::hexgen
