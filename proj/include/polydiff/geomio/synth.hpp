#pragma once

#include "polydiff/geomio/cloud.hpp"
#include "polydiff/geomio/mesh.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace polydiff::geomio {

struct BoxSpec {
    std::array<int, 3> origin{0, 0, 0};
    std::array<int, 3> size{1, 1, 1};
};

/// Union of integer boxes, optionally warped and rotated.
///
/// JSON form:
///   {"boxes": [{"origin": [0,0,0], "size": [2,1,1]}, ...],
///    "warp": {"amplitude": 0.05, "frequency": 0.5},
///    "rotation": [rx, ry, rz],          // degrees, applied X then Y then Z
///    "subdivision": 4,                  // mesh quads per unit edge
///    "polycube_points": 4096}
struct ShapeSpec {
    std::vector<BoxSpec> boxes;
    double warp_amplitude = 0.0;
    double warp_frequency = 0.5;
    std::array<double, 3> rotation_deg{0.0, 0.0, 0.0};
    int subdivision = 4;
    Index polycube_points = 4096;

    /// Throws ArgumentError for empty or non-positive boxes and for warps
    /// whose Jacobian could degenerate (amplitude * 2 pi frequency >= 0.5).
    void validate() const;
    static ShapeSpec from_json(const std::string& text);
    std::string to_json() const;

    static ShapeSpec cube();
    static ShapeSpec bar2x1();
    static ShapeSpec l_shape();
    /// 3 x 3 ring of unit boxes around an empty centre: genus one.
    static ShapeSpec frame();
};

/// Occupied unit cells of the box union.
struct VoxelSet {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> dims{0, 0, 0};
    std::vector<unsigned char> filled; // x fastest

    bool at(int x, int y, int z) const;
};
VoxelSet voxelize(const ShapeSpec& spec);

/// Boundary surface of the box union on the integer lattice, every unit face
/// split into subdivision^2 quads and then into triangles, outward oriented.
TriMesh box_union_mesh(const ShapeSpec& spec);

/// Warp then rotation, applied to a point of the unwarped union.
Vec3 apply_deformation(const ShapeSpec& spec, const Vec3& p);

struct SynthPair {
    TriMesh mesh;           // deformed surface
    PolycubeCloud polycube; // samples of the undeformed union with outward normals
};
SynthPair synth_pair(const ShapeSpec& spec, std::uint64_t seed);

}  // namespace polydiff::geomio
