#pragma once

#include "polydiff/core/types.hpp"

#include <vector>

namespace polydiff::registration {

struct CpdOptions {
    double beta = 2.0;    // Gaussian kernel width
    double lambda = 3.0;  // smoothness weight
    double w_out = 0.1;   // uniform outlier weight in [0, 1)
    int max_iters = 50;
    double tol = 1e-5;    // relative change of sigma2 or of the objective that ends the loop
    /// 0 solves the dense M x M system every iteration. A positive rank K < M
    /// replaces G by its leading K eigenpairs and solves through the
    /// Woodbury identity, O(M K^2) per iteration instead of O(M^3).
    Index rank = 0;

    void validate() const;
};

/// G_ij = exp(-|a_i - b_j|^2 / (2 beta^2)).
Mat gaussian_kernel(const Mat& a, const Mat& b, double beta);

/// Sufficient statistics of one E-step of the Gaussian mixture with centroids
/// `moved` (M x 3) observed at `target` (N x 3).
struct CpdPosterior {
    Eigen::VectorXd p1;   // row sums of P (M)
    Eigen::VectorXd pt1;  // column sums of P (N)
    Mat px;               // P X (M x 3)
    double np = 0.0;      // sum of P
    double nll = 0.0;     // negative log-likelihood (no smoothness term)
};
/// Column blocks run in parallel; their partial sums are reduced in block
/// order so the result does not depend on the thread count.
CpdPosterior cpd_posterior(const Mat& target, const Mat& moved, double sigma2, double w_out);
CpdPosterior cpd_posterior_reference(const Mat& target, const Mat& moved, double sigma2, double w_out);

struct CpdResult {
    Mat deformed;              // M x 3, in the target's frame
    Mat coefficients;          // field weights on `control`, M x 3, normalized frame
    double sigma2 = 0.0;       // normalized frame
    int iterations = 0;
    bool converged = false;    // tolerance met or sigma2 collapsed
    /// Objective (NLL plus lambda/2 tr(W^T G W)) before the first and after
    /// every iteration.
    std::vector<double> objective;

    Mat control;               // normalized source points
    double beta = 0.0;
    Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
    double src_scale = 1.0, dst_scale = 1.0;

    /// Pushes arbitrary source-frame points through the fitted displacement
    /// field and into the target frame. On the fitted points it reproduces
    /// `deformed`.
    Mat transform(const Mat& points) const;
};

/// Leading eigenpairs of the Gaussian kernel matrix of `y` by randomized
/// subspace iteration with a fixed seed; G is applied in row blocks and never
/// stored whole. Eigenvalues come out descending.
struct KernelEigen {
    Mat vectors;             // M x K, orthonormal columns
    Eigen::VectorXd values;  // K
};
KernelEigen kernel_eigen(const Mat& y, double beta, Index rank);

/// Coherent point drift of src (M x 3) toward dst (N x 3). Both clouds are
/// normalized to zero mean and unit RMS radius internally. Each M-step solves
/// (diag(P1) G + lambda sigma2 I) W = P X - diag(P1) Y, with G replaced by
/// Q L Q^T in low-rank mode.
CpdResult cpd_nonrigid(const Mat& src, const Mat& dst, const CpdOptions& opt = {});

}  // namespace polydiff::registration
