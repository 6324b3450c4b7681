#pragma once

#include "polydiff/core/types.hpp"
#include "polydiff/polycube/voxel_model.hpp"

#include <array>
#include <string>
#include <vector>

namespace polydiff::hexgen {

/// Surface anchor of a boundary vertex on the input mesh.
struct Anchor {
    Index face = -1;
    Vec3 bary = Vec3::Zero();
    bool valid() const { return face >= 0; }
};

/// Hexahedra in VTK corner order: bottom quad 0-1-2-3 counter-clockwise
/// seen from above, top quad 4-5-6-7 stacked on it.
struct HexMesh {
    Mat vertices;                         // P x 3
    IndexMat cells;                       // C x 8
    std::vector<unsigned char> boundary;  // per vertex
    std::vector<Anchor> anchors;          // per vertex, invalid when unanchored

    Index vertex_count() const { return vertices.rows(); }
    Index cell_count() const { return cells.rows(); }
};

/// Local corner lists of the six faces, each ordered so the right-hand
/// normal points out of a positively oriented cell.
extern const std::array<std::array<int, 4>, 6> kHexFaces;
/// The twelve edges as corner pairs.
extern const std::array<std::array<int, 2>, 12> kHexEdges;

struct Quad {
    Index cell;
    int face;
    std::array<Index, 4> v;  // outward order
};

/// Faces used by exactly one cell.
std::vector<Quad> boundary_quads(const HexMesh& hm);

struct Conformity {
    Index boundary = 0;    // quads with one cell
    Index interior = 0;    // quads with two cells of opposite orientation
    Index violations = 0;  // quads used more than twice, or twice with equal orientation
};
Conformity check_conformity(const HexMesh& hm);

/// Every voxel split into s^3 hexes on the refined lattice; vertices are in
/// the voxel model's world frame and shared by integer key. Boundary flags
/// mark vertices on boundary quads.
HexMesh extract_hexes(const polycube::VoxelModel& vm, int s);

/// Recomputes the boundary flags from the cell topology.
void mark_boundary(HexMesh& hm);

/// `iters` Jacobi rounds of v <- v + step (mean of edge neighbours - v) on
/// non-boundary vertices. Rounds read the previous positions only, so the
/// parallel and serial versions agree bit for bit.
HexMesh smooth_interior(const HexMesh& hm, int iters = 20, double step = 0.5);
HexMesh smooth_interior_reference(const HexMesh& hm, int iters = 20, double step = 0.5);

struct PillowResult {
    HexMesh mesh;        // the input mesh when the layer was rejected
    bool applied = false;
    Index inverted = 0;  // cells with J <= 0 in the rejected attempt
    std::string error;
};

/// One inset layer: boundary vertices are copied inward along the mean
/// inward normal of their boundary quads by thickness times the mean length
/// of those quads' edges; old cells switch to the copies and every boundary
/// quad gains a hex between itself and its copy. A layer containing any
/// cell with J <= 0 is rejected. Throws ArgumentError unless 0 < thickness
/// < 0.5.
PillowResult pillow_boundary(const HexMesh& hm, double thickness);

}  // namespace polydiff::hexgen
