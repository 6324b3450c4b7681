#pragma once

#include "polydiff/geomio/mesh.hpp"
#include "polydiff/hexgen/hex_mesh.hpp"
#include "polydiff/registration/correspondence.hpp"

namespace polydiff::hexgen {

struct AnchorOptions {
    int k = 8;                  // polycube neighbours per boundary vertex
    double max_distance = 3.0;  // in grid units; farther vertices stay unanchored
};

struct AnchorReport {
    Index anchored = 0;
    Index unanchored = 0;
};

/// Maps a hex mesh from the polycube domain onto the input surface.
///
/// `poly` holds the polycube points (domain frame, first three columns) and
/// `corr` their anchors on `surface`. Each boundary vertex takes its k
/// nearest polycube points, fits a least-squares affine map from their
/// domain positions to their anchored surface positions (minimum norm when
/// the points are coplanar), evaluates it at the vertex and projects the
/// result onto the surface; the projection becomes the vertex position and
/// anchor. Interior and unanchored vertices go through the affine map fitted
/// to all pairs.
HexMesh anchor_boundary(const HexMesh& hm, double h, const Mat& poly, const registration::CorrespondenceMap& corr,
                        const geomio::TriMesh& surface, const AnchorOptions& opt = {}, AnchorReport* report = nullptr);

}  // namespace polydiff::hexgen
