#pragma once

#include "polydiff/hexgen/hex_mesh.hpp"

#include <filesystem>
#include <vector>

namespace polydiff::hexgen {

/// Corner c with edge neighbours (a, b, d) forming a right-handed frame on
/// the reference cube.
extern const std::array<std::array<int, 3>, 8> kCornerFrames;

/// Determinant of the three normalised edges at one corner. An edge shorter
/// than 1e-12 of the cell's longest edge makes the corner 0. Clamped to
/// [-1, 1].
double corner_jacobian(const HexMesh& hm, Index cell, int corner);

struct QualityReport {
    std::vector<double> cell_jacobian;  // min over corners
    double j_min = 0.0;                 // 0 for an empty mesh
    double j_avg = 0.0;
    Index inverted = 0;                 // cells with J <= 0
};

QualityReport quality(const HexMesh& hm);
QualityReport quality_reference(const HexMesh& hm);

/// Legacy VTK ASCII unstructured grid, cell type 12, with the scaled
/// Jacobian as cell data.
void save_vtk(const HexMesh& hm, const std::filesystem::path& path);
/// Reads points and hexahedra back (cell data is ignored).
HexMesh load_vtk(const std::filesystem::path& path);
/// Boundary quads as an OBJ shell.
void save_shell_obj(const HexMesh& hm, const std::filesystem::path& path);

}  // namespace polydiff::hexgen
