#pragma once

#include "polydiff/polycube/patches.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace polydiff::polycube {

using Cell = std::array<long, 3>;

/// Unit square of the voxel boundary: the voxel it belongs to and the
/// outward axis direction.
struct BoundaryFace {
    Cell voxel;
    int axis;
    int sign;
    /// Lattice corners, counter-clockwise seen from outside.
    std::array<Cell, 4> corners() const;
};

struct VoxelModel {
    GridFrame grid;
    std::vector<Cell> voxels;  // sorted, unique

    bool contains(const Cell& c) const;
    /// Faces between an occupied and an empty cell, in voxel order.
    std::vector<BoundaryFace> boundary_faces() const;
    Vec3 position(const Cell& lattice_point) const;
};

struct VoxelizeReport {
    Index orientation_mismatches = 0;  // crossings whose patch label points the wrong way
};

/// Parity fill: a cell is interior when an odd number of X patches lie
/// below its centre along its column. The fill is repeated along Y and Z;
/// any disagreement or odd column total throws ValidityError naming the
/// offending columns.
VoxelModel voxelize(const std::vector<PlanarPatch>& patches, const GridFrame& grid, VoxelizeReport* report = nullptr);

struct Corner {
    Cell vertex;
    int incident_faces;
    int feature_edges;  // incident boundary edges between faces of different axes
};

struct SurfaceComponent {
    Index faces = 0;
    Index euler = 0;
    /// (2 - euler) / 2; only meaningful for a closed manifold component.
    double genus = 0.0;
};

struct StructureReport {
    Index voxels = 0;
    Index boundary_faces = 0;
    Index vertices = 0;
    Index edges = 0;
    Index euler = 0;            // V - E + F of the whole boundary
    Index volume_components = 0;
    std::vector<SurfaceComponent> surfaces;
    std::vector<Corner> corners;
    bool watertight = true;     // every boundary edge used an even number of times
};

StructureReport structure_report(const VoxelModel& vm);

/// "voxels h=<unit>", then "origin x y z", then one "i j k" line per voxel.
void save_voxels(const VoxelModel& vm, const std::filesystem::path& path);
VoxelModel load_voxels(const std::filesystem::path& path);
/// Boundary quads as an OBJ shell in world coordinates.
void save_boundary_obj(const VoxelModel& vm, const std::filesystem::path& path);

/// Cloud to voxel model in one call: labels, clustering, lattice, patches,
/// parity fill.
struct ExtractOptions {
    std::optional<double> h;    // grid unit; default from the plane offsets
    std::optional<double> gap;  // clustering gap; default 0.35 h, or 0.05 x bbox diagonal without h
    PatchOptions patches;
    bool reestimate_normals = false;
    int normal_k = 12;
};
struct Extraction {
    std::vector<AxisLabel> labels;
    std::vector<PlaneCluster> planes;
    std::vector<PlanarPatch> patches;
    VoxelModel model;
    VoxelizeReport fill;
};
Extraction extract_structure(const Mat& cloud, const ExtractOptions& opt = {});

}  // namespace polydiff::polycube
