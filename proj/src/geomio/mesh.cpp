#include "polydiff/geomio/mesh.hpp"

#include "polydiff/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>

namespace polydiff::geomio {

namespace {

Vec3 corner(const TriMesh& m, Index f, int k) { return m.vertices.row(m.faces(f, k)).transpose(); }

bool parse_double(const std::string& tok, double& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && std::isfinite(out);
}

}  // namespace

double TriMesh::face_area(Index f) const {
    return 0.5 * (corner(*this, f, 1) - corner(*this, f, 0)).cross(corner(*this, f, 2) - corner(*this, f, 0)).norm();
}

Vec3 TriMesh::face_normal(Index f) const {
    Vec3 n = (corner(*this, f, 1) - corner(*this, f, 0)).cross(corner(*this, f, 2) - corner(*this, f, 0));
    const double len = n.norm();
    if (!(len > 0.0)) throw NumericError("degenerate face " + std::to_string(f) + " has no normal");
    return n / len;
}

std::vector<double> TriMesh::face_areas() const {
    std::vector<double> a(static_cast<std::size_t>(face_count()));
    for (Index f = 0; f < face_count(); ++f) a[static_cast<std::size_t>(f)] = face_area(f);
    return a;
}

double TriMesh::total_area() const {
    double s = 0.0;
    for (Index f = 0; f < face_count(); ++f) s += face_area(f);
    return s;
}

void TriMesh::validate() const {
    if (vertices.cols() != 3 || (faces.size() > 0 && faces.cols() != 3))
        throw DimensionError("mesh: vertices must be V x 3 and faces F x 3");
    if (!vertices.allFinite()) throw DataError("mesh: non-finite vertex coordinate");
    for (Index f = 0; f < face_count(); ++f)
        for (int k = 0; k < 3; ++k)
            if (faces(f, k) < 0 || faces(f, k) >= vertex_count())
                throw DataError("mesh: face " + std::to_string(f) + " references missing vertex " +
                                std::to_string(faces(f, k)));
    if (vertex_count() == 0) return;
    const Vec3 lo = vertices.colwise().minCoeff().transpose();
    const Vec3 hi = vertices.colwise().maxCoeff().transpose();
    const double diag = (hi - lo).norm();
    const double scale2 = diag > 0.0 ? diag * diag : 1.0;
    for (Index f = 0; f < face_count(); ++f)
        if (!(face_area(f) / scale2 > 1e-12)) throw DataError("mesh: degenerate face " + std::to_string(f));
}

TriMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mesh " + path.string());
    std::vector<Vec3> verts;
    std::vector<std::array<Index, 3>> tris;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            std::string tok;
            Vec3 p;
            for (int k = 0; k < 3; ++k)
                if (!(ls >> tok) || !parse_double(tok, p[k])) throw ParseError("obj: malformed vertex", line_no);
            verts.push_back(p);
        } else if (tag == "f") {
            std::vector<Index> poly;
            std::string tok;
            while (ls >> tok) {
                const std::string head = tok.substr(0, tok.find('/'));
                long long idx = 0;
                auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
                if (ec != std::errc() || p != head.data() + head.size())
                    throw ParseError("obj: malformed face index '" + tok + "'", line_no);
                if (idx == 0) throw ParseError("obj: face index 0 (indices are 1-based)", line_no);
                const long long n = static_cast<long long>(verts.size());
                const long long resolved = idx > 0 ? idx - 1 : n + idx;
                if (resolved < 0 || resolved >= n)
                    throw ParseError("obj: face index " + std::to_string(idx) + " out of range", line_no);
                poly.push_back(static_cast<Index>(resolved));
            }
            if (poly.size() < 3) throw ParseError("obj: face with fewer than three corners", line_no);
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) tris.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    TriMesh m;
    m.vertices.resize(static_cast<Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<Index>(i)) = verts[i].transpose();
    m.faces.resize(static_cast<Index>(tris.size()), 3);
    for (std::size_t f = 0; f < tris.size(); ++f)
        for (int k = 0; k < 3; ++k) m.faces(static_cast<Index>(f), k) = tris[f][static_cast<std::size_t>(k)];

    std::map<std::pair<Index, Index>, int> edge_use;
    for (Index f = 0; f < m.face_count(); ++f)
        for (int k = 0; k < 3; ++k) {
            Index a = m.faces(f, k), b = m.faces(f, (k + 1) % 3);
            if (a > b) std::swap(a, b);
            if (++edge_use[{a, b}] > 2) m.non_manifold = true;
        }
    m.validate();
    return m;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write mesh " + path.string());
    for (Index i = 0; i < mesh.vertex_count(); ++i)
        std::fprintf(f, "v %.17g %.17g %.17g\n", mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2));
    for (Index i = 0; i < mesh.face_count(); ++i)
        std::fprintf(f, "f %lld %lld %lld\n", static_cast<long long>(mesh.faces(i, 0) + 1),
                     static_cast<long long>(mesh.faces(i, 1) + 1), static_cast<long long>(mesh.faces(i, 2) + 1));
    if (std::fclose(f) != 0) throw DataError("failed writing mesh " + path.string());
}

Vec3 barycentric_point(const TriMesh& mesh, Index f, const Vec3& b) {
    return b[0] * corner(mesh, f, 0) + b[1] * corner(mesh, f, 1) + b[2] * corner(mesh, f, 2);
}

SurfacePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Region classification over the triangle's Voronoi regions.
    SurfacePoint r;
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    auto done = [&](double u, double v, double w) {
        r.bary = Vec3(u, v, w);
        r.point = u * a + v * b + w * c;
        r.dist = (p - r.point).norm();
        return r;
    };
    if (d1 <= 0.0 && d2 <= 0.0) return done(1, 0, 0);
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return done(0, 1, 0);
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return done(1 - v, v, 0);
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return done(0, 0, 1);
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return done(1 - w, 0, w);
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return done(0, 1 - w, w);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return done(1 - v - w, v, w);
}

SurfacePoint closest_point(const TriMesh& mesh, const Vec3& q) {
    if (mesh.face_count() == 0) throw ArgumentError("closest_point: mesh has no faces");
    SurfacePoint best;
    best.dist = INFINITY;
    for (Index f = 0; f < mesh.face_count(); ++f) {
        SurfacePoint s = closest_point_on_triangle(q, corner(mesh, f, 0), corner(mesh, f, 1), corner(mesh, f, 2));
        if (s.dist < best.dist) {
            best = s;
            best.face = f;
        }
    }
    return best;
}

}  // namespace polydiff::geomio
