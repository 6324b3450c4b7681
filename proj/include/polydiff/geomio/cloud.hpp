#pragma once

#include "polydiff/core/types.hpp"
#include "polydiff/geomio/mesh.hpp"

#include <filesystem>
#include <vector>

namespace polydiff::geomio {

/// Surface samples with the face and barycentric weights each came from.
struct ConditionCloud {
    Mat points;                 // N x 3
    std::vector<Index> face_id; // N
    Mat bary;                   // N x 3

    Index size() const { return points.rows(); }
    /// Throws DataError when a record is inconsistent with `mesh` (bad face,
    /// weights off the simplex, point off its barycentric position by 1e-9).
    void validate(const TriMesh& mesh) const;
};

/// Points with unit normals, one row [x y z nx ny nz] per point.
struct PolycubeCloud {
    Mat data; // M x 6

    Index size() const { return data.rows(); }
    auto points() const { return data.leftCols<3>(); }
    auto normals() const { return data.rightCols<3>(); }
    void validate() const;
};

/// ASCII "pcd <count> <channels>" header, then one row per point.
/// Channels must be 3 or 6. Values are written with round-trip precision.
Mat load_cloud(const std::filesystem::path& path);
void save_cloud(const Mat& cloud, const std::filesystem::path& path);

/// Provenance sidecar: "prov <count>", then "face b0 b1 b2" per point.
void save_provenance(const ConditionCloud& cloud, const std::filesystem::path& path);
void load_provenance(ConditionCloud& cloud, const std::filesystem::path& path);

}  // namespace polydiff::geomio
