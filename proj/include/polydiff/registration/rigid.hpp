#pragma once

#include "polydiff/core/types.hpp"

namespace polydiff::registration {

/// x -> s R x + t.
struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * rotation * p + translation; }
    /// Applies to the first three columns of every row.
    Mat apply(const Mat& points) const;
    SimilarityTransform inverse() const;
    /// (this * other)(x) = this(other(x)).
    SimilarityTransform operator*(const SimilarityTransform& other) const;
};

/// Closed-form least-squares similarity taking src[i] onto dst[i] (cross
/// covariance SVD). A negative determinant flips the weakest singular
/// direction so the rotation stays proper. Throws NumericError when src has
/// no spread.
SimilarityTransform fit_similarity(const Mat& src, const Mat& dst, bool with_scale = true);

struct RigidOptions {
    int icp_iters = 50;
    bool with_scale = true;
    /// Also start ICP from the principal-axis alignments of the two clouds
    /// and keep the start with the lowest final RMSE.
    bool pca_starts = true;
};

struct RigidResult {
    SimilarityTransform transform;
    double rmse = 0.0;   // nearest-neighbour RMSE after alignment
    int iterations = 0;  // ICP rounds of the chosen start
};

/// Similarity ICP of src onto dst. The identity start is centroid plus RMS
/// radius matching; ties between starts keep the earlier one, and a start
/// reaching zero RMSE (1e-12 of the target radius) ends the search.
RigidResult rigid_align(const Mat& src, const Mat& dst, const RigidOptions& opt = {});

}  // namespace polydiff::registration
