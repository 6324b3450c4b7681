#pragma once

#include "polydiff/core/types.hpp"

#include <filesystem>
#include <vector>

namespace polydiff::geomio {

/// Triangle surface mesh. Faces index rows of `vertices` (0-based in memory).
struct TriMesh {
    Mat vertices;   // V x 3
    IndexMat faces; // F x 3
    /// Set by the loader when some edge is shared by more than two faces.
    bool non_manifold = false;

    Index vertex_count() const { return vertices.rows(); }
    Index face_count() const { return faces.rows(); }
    Vec3 vertex(Index i) const { return vertices.row(i).transpose(); }

    double face_area(Index f) const;
    /// Unit normal by the right-hand rule on the corner order.
    Vec3 face_normal(Index f) const;
    std::vector<double> face_areas() const;
    double total_area() const;

    /// Throws DataError on out-of-range indices or degenerate faces (area
    /// at most 1e-12 after scaling the bounding-box diagonal to one).
    void validate() const;
};

/// Wavefront OBJ: `v` and `f` records with 1-based (or negative, relative)
/// indices; `f` entries may carry `/vt/vn` suffixes, polygons are fanned.
/// Other record types are ignored.
TriMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

/// Point on face f at barycentric weights b: b0 v0 + b1 v1 + b2 v2.
Vec3 barycentric_point(const TriMesh& mesh, Index f, const Vec3& b);

/// Closest point on the mesh surface (exhaustive over faces).
struct SurfacePoint {
    Index face = -1;
    Vec3 bary = Vec3::Zero();
    Vec3 point = Vec3::Zero();
    double dist = 0.0;
};
SurfacePoint closest_point(const TriMesh& mesh, const Vec3& q);
/// Closest point on one triangle, with barycentric weights.
SurfacePoint closest_point_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace polydiff::geomio
