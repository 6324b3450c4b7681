#pragma once

#include "polydiff/core/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace polydiff::diffusion {

/// Per-step variance tables for T steps. Index t runs 0..T; entry 0 holds the
/// convention alpha_bar_0 = 1 (beta_0 = 0, alpha_0 = 1).
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double alpha_bar_at(int t) const;
};

/// Linear beta ramp from beta_start (t = 1) to beta_end (t = T). The
/// cumulative product is accumulated in double precision.
NoiseSchedule build_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02);

struct DiffusionSample {
    Mat x0;
    Mat xt;
    Mat eps;
    int t = 0;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. t = 0 is accepted and
/// returns x0 unchanged; noise is supplied by the caller.
DiffusionSample forward_sample(const Mat& x0, int t, const Mat& noise, const NoiseSchedule& sched);

double loss_l2(const Mat& eps_pred, const Mat& eps_true);
double loss_l1(const Mat& eps_pred, const Mat& eps_true);
/// w * L2 + (1 - w) * L1, both means over every entry.
double loss_hybrid(const Mat& eps_pred, const Mat& eps_true, double w);

/// Deterministic (eta = 0) DDIM update from step t to t_prev < t.
Mat ddim_step(const Mat& x_t, const Mat& eps_hat, int t, int t_prev, const NoiseSchedule& sched);

/// The visited steps T, T - stride, ..., down to the last positive step.
std::vector<int> ddim_timesteps(int steps, int stride);

/// eps_hat = f(x_t, t); the conditioning is bound inside the callable.
using NoisePredictor = std::function<Mat(const Mat& x_t, int t)>;

Mat standard_normal(Index rows, Index cols, std::uint64_t seed);

/// Runs the strided sampler from Gaussian noise. Columns 3..5 of a
/// six-channel result are renormalized to unit length at the end.
Mat sample(const NoisePredictor& predictor, const NoiseSchedule& sched, Index points, int stride,
           std::uint64_t seed, Index channels = 6);

/// Maps a cloud so the condition's bounding-box long axis spans [-1, 1].
struct CloudNormalization {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    static CloudNormalization fit(const Mat& condition_points);
    /// Positions (first three columns) are transformed; other channels pass through.
    Mat apply(const Mat& cloud) const;
    Mat invert(const Mat& cloud) const;
};

void renormalize_normals(Mat& cloud);

}  // namespace polydiff::diffusion
