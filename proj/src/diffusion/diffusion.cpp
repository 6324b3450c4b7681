#include "polydiff/diffusion/diffusion.hpp"

#include "polydiff/core/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace polydiff::diffusion {

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > steps)
        throw ArgumentError("step " + std::to_string(t) + " outside [0, " + std::to_string(steps) + "]");
    return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ArgumentError("schedule needs at least one step");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ArgumentError("schedule needs 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    s.alpha.assign(static_cast<std::size_t>(steps) + 1, 1.0);
    s.alpha_bar.assign(static_cast<std::size_t>(steps) + 1, 1.0);
    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        const auto i = static_cast<std::size_t>(t);
        s.beta[i] = beta_start + frac * (beta_end - beta_start);
        s.alpha[i] = 1.0 - s.beta[i];
        s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
    }
    return s;
}

DiffusionSample forward_sample(const Mat& x0, int t, const Mat& noise, const NoiseSchedule& sched) {
    if (t < 0 || t > sched.steps)
        throw ArgumentError("forward_sample: step " + std::to_string(t) + " outside [0, " +
                            std::to_string(sched.steps) + "]");
    if (noise.rows() != x0.rows() || noise.cols() != x0.cols())
        throw DimensionError("forward_sample: noise shape differs from x0");
    const double ab = sched.alpha_bar_at(t);
    DiffusionSample s;
    s.x0 = x0;
    s.eps = noise;
    s.t = t;
    s.xt = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
    return s;
}

namespace {
void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": prediction and target shapes differ");
    if (a.size() == 0) throw ArgumentError(std::string(what) + ": empty input");
}
}  // namespace

double loss_l2(const Mat& eps_pred, const Mat& eps_true) {
    require_same_shape(eps_pred, eps_true, "loss_l2");
    return (eps_pred - eps_true).array().square().mean();
}

double loss_l1(const Mat& eps_pred, const Mat& eps_true) {
    require_same_shape(eps_pred, eps_true, "loss_l1");
    return (eps_pred - eps_true).array().abs().mean();
}

double loss_hybrid(const Mat& eps_pred, const Mat& eps_true, double w) {
    if (w < 0.0 || w > 1.0) throw ArgumentError("loss_hybrid: weight outside [0, 1]");
    return w * loss_l2(eps_pred, eps_true) + (1.0 - w) * loss_l1(eps_pred, eps_true);
}

Mat ddim_step(const Mat& x_t, const Mat& eps_hat, int t, int t_prev, const NoiseSchedule& sched) {
    if (t_prev >= t) throw ArgumentError("ddim_step: t_prev must be smaller than t");
    if (t_prev < 0 || t > sched.steps) throw ArgumentError("ddim_step: step outside schedule");
    if (x_t.rows() != eps_hat.rows() || x_t.cols() != eps_hat.cols())
        throw DimensionError("ddim_step: eps_hat shape differs from x_t");
    const double ab_t = sched.alpha_bar_at(t);
    const double ab_prev = sched.alpha_bar_at(t_prev);
    if (!(ab_t > 0.0)) throw NumericError("ddim_step: alpha_bar_t is zero");
    Mat x0_hat = (x_t - std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(ab_t);
    return std::sqrt(ab_prev) * x0_hat + std::sqrt(1.0 - ab_prev) * eps_hat;
}

std::vector<int> ddim_timesteps(int steps, int stride) {
    if (stride < 1) throw ArgumentError("stride must be at least 1");
    std::vector<int> ts;
    for (int t = steps; t > 0; t -= stride) ts.push_back(t);
    return ts;
}

Mat standard_normal(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

void renormalize_normals(Mat& cloud) {
    if (cloud.cols() < 6) return;
    for (Index i = 0; i < cloud.rows(); ++i) {
        auto n = cloud.row(i).segment<3>(3);
        const double len = n.norm();
        if (len > 0.0 && std::isfinite(len))
            n /= len;
        else
            n << 0.0, 0.0, 1.0;
    }
}

Mat sample(const NoisePredictor& predictor, const NoiseSchedule& sched, Index points, int stride,
           std::uint64_t seed, Index channels) {
    if (points <= 0) throw ArgumentError("sample: point count must be positive");
    Mat x = standard_normal(points, channels, seed);
    for (int t : ddim_timesteps(sched.steps, stride)) {
        Mat eps = predictor(x, t);
        x = ddim_step(x, eps, t, std::max(t - stride, 0), sched);
    }
    if (channels == 6) renormalize_normals(x);
    return x;
}

CloudNormalization CloudNormalization::fit(const Mat& condition_points) {
    if (condition_points.rows() == 0) throw ArgumentError("normalization: empty condition cloud");
    const Vec3 lo = condition_points.leftCols<3>().colwise().minCoeff().transpose();
    const Vec3 hi = condition_points.leftCols<3>().colwise().maxCoeff().transpose();
    CloudNormalization n;
    n.center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo).maxCoeff();
    n.scale = half > 0.0 ? half : 1.0;
    return n;
}

Mat CloudNormalization::apply(const Mat& cloud) const {
    Mat out = cloud;
    for (Index i = 0; i < out.rows(); ++i)
        out.row(i).head<3>() = (cloud.row(i).head<3>() - center.transpose()) / scale;
    return out;
}

Mat CloudNormalization::invert(const Mat& cloud) const {
    Mat out = cloud;
    for (Index i = 0; i < out.rows(); ++i)
        out.row(i).head<3>() = cloud.row(i).head<3>() * scale + center.transpose();
    return out;
}

}  // namespace polydiff::diffusion
