#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>

namespace polydiff {

using Index = Eigen::Index;

/// Row-major dense matrix; one point or token per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Integer rows, e.g. triangle corners (F x 3) or hex corners (C x 8).
using IndexMat = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace polydiff
