#pragma once

#include "polydiff/core/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace polydiff::polycube {

/// Order doubles as the tie-break order of labelling.
enum class AxisLabel : int { PX = 0, NX, PY, NY, PZ, NZ };

inline int axis_of(AxisLabel l) { return static_cast<int>(l) / 2; }
inline int sign_of(AxisLabel l) { return static_cast<int>(l) % 2 == 0 ? 1 : -1; }
inline AxisLabel make_label(int axis, int sign) { return static_cast<AxisLabel>(2 * axis + (sign > 0 ? 0 : 1)); }
std::string to_string(AxisLabel l);

/// argmax over the six axis directions of dot(normal, direction). Throws
/// DataError naming the first point whose normal is zero or non-finite.
std::vector<AxisLabel> label_points(const Mat& cloud);

/// Replaces normals by k-NN plane fits (k points including the point itself),
/// keeping the sign that agrees with the existing normal.
Mat reestimate_normals(const Mat& cloud, int k = 12);

/// Points of one label whose axis coordinate forms one 1D cluster.
struct PlaneCluster {
    AxisLabel label;
    double offset;               // mean axis coordinate
    std::vector<Index> members;  // ascending
};

/// Per label: sort by axis coordinate, split where consecutive values are
/// more than `gap` apart. Output ordered by label, then offset.
std::vector<PlaneCluster> cluster_planes(const Mat& cloud, const std::vector<AxisLabel>& labels, double gap);

/// Lattice: grid coordinate g maps to origin + h g on every axis.
struct GridFrame {
    Vec3 origin = Vec3::Zero();
    double h = 1.0;
};

/// Origin per axis is the lowest plane offset on that axis. Without an
/// explicit unit, h starts from the smallest gap between neighbouring planes
/// on any axis (offsets closer than `gap` count as one plane), rounded to one
/// significant digit, and is then refined to
/// sum(o - origin) / sum(round((o - origin) / h0)) over all planes.
/// Throws DataError unless every axis has at least two planes.
GridFrame choose_grid(const std::vector<PlaneCluster>& planes, double gap, std::optional<double> h = std::nullopt);

/// Planar patch on the lattice. Cells index the two in-plane axes in
/// (axis+1, axis+2) mod 3 order.
struct PlanarPatch {
    AxisLabel label;
    long offset = 0;                          // snapped, grid units
    double raw_offset = 0.0;                  // cluster mean, world units
    std::vector<Index> members;               // points in the kept cells
    std::vector<std::array<long, 2>> cells;   // sorted, nonempty
};

struct PatchOptions {
    /// Cells with fewer points than this fraction of the plane's median
    /// cell count are treated as spill and dropped.
    double min_cell_fraction = 0.1;
};

/// Snaps cluster offsets onto the lattice, rasterises member points into
/// footprint cells and splits each plane into edge-connected components.
/// Throws ValidityError when two clusters of one axis land on the same
/// integer with overlapping footprints (same label: h too coarse; opposite
/// labels: a feature thinner than one cell).
std::vector<PlanarPatch> snap_patches(const Mat& cloud, const std::vector<PlaneCluster>& planes, const GridFrame& grid,
                                      const PatchOptions& opt = {});

}  // namespace polydiff::polycube
