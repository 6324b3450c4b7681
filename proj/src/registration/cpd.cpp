#include "polydiff/registration/cpd.hpp"

#include "polydiff/core/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace polydiff::registration {

void CpdOptions::validate() const {
    if (!(beta > 0.0)) throw ArgumentError("cpd: beta must be positive");
    if (!(lambda > 0.0)) throw ArgumentError("cpd: lambda must be positive");
    if (!(w_out >= 0.0 && w_out < 1.0)) throw ArgumentError("cpd: w_out must lie in [0, 1)");
    if (max_iters < 0) throw ArgumentError("cpd: max_iters must be non-negative");
    if (!(tol >= 0.0)) throw ArgumentError("cpd: tol must be non-negative");
    if (rank < 0) throw ArgumentError("cpd: rank must be non-negative");
}

Mat gaussian_kernel(const Mat& a, const Mat& b, double beta) {
    const double k = -1.0 / (2.0 * beta * beta);
    Mat g(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.rows(); ++j)
            g(i, j) = std::exp(k * (a.row(i).head<3>() - b.row(j).head<3>()).squaredNorm());
    return g;
}

namespace {

constexpr Index kBlock = 128;

struct Mixture {
    double inv2s;    // 1 / (2 sigma2)
    double log_c;    // log of the outlier constant, -inf when w_out = 0
    double log_norm; // log((1 - w) / M * (2 pi sigma2)^(-3/2))
};

Mixture mixture(Index m, Index n, double sigma2, double w) {
    Mixture mx;
    mx.inv2s = 1.0 / (2.0 * sigma2);
    const double two_pi_s = 2.0 * std::numbers::pi * sigma2;
    mx.log_c = w > 0.0 ? 1.5 * std::log(two_pi_s) + std::log(w / (1.0 - w)) + std::log(double(m) / double(n))
                       : -INFINITY;
    mx.log_norm = std::log((1.0 - w) / double(m)) - 1.5 * std::log(two_pi_s);
    return mx;
}

// Posterior column for one target point: fills k with exp(e_m - a) and returns
// the scale s with P_mn = k_m * s, plus the log of (sum_m exp(e_m) + c).
struct Column {
    double scale;
    double log_total;
};

Column column(const Mat& moved, const Eigen::Ref<const Eigen::RowVector3d>& x, const Mixture& mx,
              Eigen::VectorXd& k) {
    const Index m = moved.rows();
    double a = -INFINITY;
    for (Index i = 0; i < m; ++i) {
        k[i] = -mx.inv2s * (moved.row(i) - x).squaredNorm();
        a = std::max(a, k[i]);
    }
    // Terms below e^-700 of the largest would be subnormal; they cannot
    // change a double-precision sum and make every later add crawl.
    k = ((k.array() - a) < -700.0).select(0.0, (k.array() - a).exp()).matrix();
    const double s = k.sum();
    // log(e^a s + c) without overflow in either term.
    double log_total;
    if (mx.log_c == -INFINITY || a + std::log(s) >= mx.log_c)
        log_total = a + std::log(s) + std::log1p(std::exp(mx.log_c - a - std::log(s)));
    else
        log_total = mx.log_c + std::log1p(s * std::exp(a - mx.log_c));
    const double scale = std::exp(a - log_total);
    // Same for the products scale * k_m the caller accumulates.
    const double cut = std::exp(-690.0 - (a - log_total));
    if (cut > 0.0) k = (k.array() < cut).select(0.0, k.array()).matrix();
    return {scale, log_total};
}

void check_pair(const Mat& target, const Mat& moved, double sigma2) {
    if (target.cols() != 3 || moved.cols() != 3) throw DimensionError("cpd: clouds must have three columns");
    if (target.rows() == 0 || moved.rows() == 0) throw ArgumentError("cpd: clouds must be nonempty");
    if (!(sigma2 > 0.0)) throw NumericError("cpd: sigma2 must be positive");
}

}  // namespace

CpdPosterior cpd_posterior(const Mat& target, const Mat& moved, double sigma2, double w_out) {
    check_pair(target, moved, sigma2);
    const Index m = moved.rows(), n = target.rows();
    const Mixture mx = mixture(m, n, sigma2, w_out);
    const Index blocks = (n + kBlock - 1) / kBlock;
    std::vector<Eigen::VectorXd> p1(static_cast<std::size_t>(blocks));
    std::vector<Mat> px(static_cast<std::size_t>(blocks));
    std::vector<double> nll(static_cast<std::size_t>(blocks), 0.0);
    CpdPosterior out;
    out.pt1.resize(n);
#pragma omp parallel
    {
        Eigen::VectorXd k(m);
#pragma omp for schedule(dynamic, 1)
        for (Index b = 0; b < blocks; ++b) {
            auto& bp1 = p1[static_cast<std::size_t>(b)];
            auto& bpx = px[static_cast<std::size_t>(b)];
            bp1.setZero(m);
            bpx.setZero(m, 3);
            double bnll = 0.0;
            for (Index j = b * kBlock; j < std::min(n, (b + 1) * kBlock); ++j) {
                const Column c = column(moved, target.row(j), mx, k);
                bp1.noalias() += c.scale * k;
                bpx.noalias() += (c.scale * k) * target.row(j);
                out.pt1[j] = c.scale * k.sum();
                bnll -= mx.log_norm + c.log_total;
            }
            nll[static_cast<std::size_t>(b)] = bnll;
        }
    }
    out.p1.setZero(m);
    out.px.setZero(m, 3);
    for (Index b = 0; b < blocks; ++b) {
        out.p1 += p1[static_cast<std::size_t>(b)];
        out.px += px[static_cast<std::size_t>(b)];
        out.nll += nll[static_cast<std::size_t>(b)];
    }
    out.np = out.p1.sum();
    return out;
}

CpdPosterior cpd_posterior_reference(const Mat& target, const Mat& moved, double sigma2, double w_out) {
    check_pair(target, moved, sigma2);
    const Index m = moved.rows(), n = target.rows();
    const double two_pi_s = 2.0 * std::numbers::pi * sigma2;
    const double c = std::pow(two_pi_s, 1.5) * w_out / (1.0 - w_out) * double(m) / double(n);
    CpdPosterior out;
    out.p1.setZero(m);
    out.pt1.setZero(n);
    out.px.setZero(m, 3);
    for (Index j = 0; j < n; ++j) {
        Eigen::VectorXd e(m);
        for (Index i = 0; i < m; ++i) e[i] = std::exp(-(moved.row(i) - target.row(j)).squaredNorm() / (2.0 * sigma2));
        const double total = e.sum() + c;
        for (Index i = 0; i < m; ++i) {
            const double p = e[i] / total;
            out.p1[i] += p;
            out.pt1[j] += p;
            out.px.row(i) += p * target.row(j);
        }
        out.nll -= std::log((1.0 - w_out) / double(m) * std::pow(two_pi_s, -1.5) * total);
    }
    out.np = out.p1.sum();
    return out;
}

namespace {

// G V for the Gaussian kernel of y, one block of G rows at a time.
Mat kernel_apply(const Mat& y, double beta, const Mat& v) {
    const Index m = y.rows();
    Mat out(m, v.cols());
    const Index blocks = (m + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < blocks; ++b) {
        const Index r0 = b * kBlock, rows = std::min(kBlock, m - r0);
        out.middleRows(r0, rows).noalias() = gaussian_kernel(y.middleRows(r0, rows), y, beta) * v;
    }
    return out;
}

Mat orthonormal_basis(const Mat& a) {
    Eigen::HouseholderQR<Mat> qr(a);
    return qr.householderQ() * Mat::Identity(a.rows(), a.cols());
}

}  // namespace

KernelEigen kernel_eigen(const Mat& y, double beta, Index rank) {
    const Index m = y.rows();
    if (rank < 1 || rank > m) throw ArgumentError("kernel_eigen: rank must lie in [1, M]");
    const Index width = std::min(m, rank + 10);
    std::mt19937_64 rng(0x5eedc0ffeeULL);
    std::normal_distribution<double> g;
    Mat omega(m, width);
    for (Index i = 0; i < omega.size(); ++i) omega.data()[i] = g(rng);
    Mat q = orthonormal_basis(kernel_apply(y, beta, omega));
    // The Gaussian kernel spectrum decays quickly; two power rounds settle
    // the leading subspace well below the EM tolerance.
    for (int it = 0; it < 2; ++it) q = orthonormal_basis(kernel_apply(y, beta, q));
    const Mat small = q.transpose() * kernel_apply(y, beta, q);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (small + small.transpose()));
    KernelEigen out;
    out.vectors.resize(m, rank);
    out.values.resize(rank);
    for (Index k = 0; k < rank; ++k) {
        const Index src = width - 1 - k;  // ascending from the solver
        out.values[k] = eig.eigenvalues()[src];
        out.vectors.col(k) = q * eig.eigenvectors().col(src);
    }
    return out;
}

Mat CpdResult::transform(const Mat& points) const {
    Mat y = (points.leftCols<3>().rowwise() - src_mean.transpose()) / src_scale;
    if (coefficients.rows() > 0) y += gaussian_kernel(y, control, beta) * coefficients;
    return (y * dst_scale).rowwise() + dst_mean.transpose();
}

CpdResult cpd_nonrigid(const Mat& src, const Mat& dst, const CpdOptions& opt) {
    opt.validate();
    if (src.rows() == 0 || dst.rows() == 0) throw ArgumentError("cpd: clouds must be nonempty");
    if (src.cols() < 3 || dst.cols() < 3) throw DimensionError("cpd: clouds need three columns");
    CpdResult r;
    r.beta = opt.beta;
    auto normalize = [](const Mat& p, Vec3& mean, double& scale) {
        mean = p.leftCols<3>().colwise().mean().transpose();
        Mat c = p.leftCols<3>().rowwise() - mean.transpose();
        scale = std::sqrt(c.rowwise().squaredNorm().mean());
        if (!(scale > 0.0)) throw NumericError("cpd: cloud has no spread");
        return Mat(c / scale);
    };
    const Mat y = normalize(src, r.src_mean, r.src_scale);
    const Mat x = normalize(dst, r.dst_mean, r.dst_scale);
    const Index m = y.rows(), n = x.rows();
    r.control = y;

    double sigma2 = (double(n) * y.squaredNorm() + double(m) * x.squaredNorm() -
                     2.0 * x.colwise().sum().dot(y.colwise().sum())) /
                    (3.0 * double(m) * double(n));

    // Either the dense kernel or its leading eigenpairs; eigenvalues at
    // round-off level are dropped so Lambda^-1 stays finite.
    const bool low_rank = opt.rank > 0 && opt.rank < m;
    Mat g;
    KernelEigen ke;
    if (low_rank) {
        ke = kernel_eigen(y, opt.beta, opt.rank);
        Index keep = 0;
        while (keep < ke.values.size() && ke.values[keep] > 1e-10 * ke.values[0]) ++keep;
        ke.vectors.conservativeResize(Eigen::NoChange, keep);
        ke.values.conservativeResize(keep);
    } else {
        g = gaussian_kernel(y, y, opt.beta);
    }

    // Low-rank mode keeps u = L Q^T W instead of W: the displacement is Q u
    // and the penalty u^T L^-1 u, and neither needs the division by
    // lambda sigma2 that makes W itself lose all precision as sigma2 -> 0.
    Mat w = Mat::Zero(m, 3);
    Mat u;
    if (low_rank) u = Mat::Zero(ke.values.size(), 3);
    Mat t = y;
    auto penalty = [&] {
        if (low_rank) return 0.5 * opt.lambda * (u.transpose() * ke.values.cwiseInverse().asDiagonal() * u).trace();
        return 0.5 * opt.lambda * (w.transpose() * (g * w)).trace();
    };

    CpdPosterior post = cpd_posterior(x, t, sigma2, opt.w_out);
    r.objective.push_back(post.nll + penalty());
    while (r.iterations < opt.max_iters) {
        const Mat rhs = post.px - post.p1.asDiagonal() * y;
        const double s2 = opt.lambda * sigma2;
        if (low_rank) {
            // Q^T of (dP1 Q L Q^T + s2 I) W = rhs gives
            // (Q^T dP1 Q + s2 L^-1) u = Q^T rhs.
            const Mat& q = ke.vectors;
            Mat inner = q.transpose() * post.p1.asDiagonal() * q;
            inner.diagonal() += s2 * ke.values.cwiseInverse();
            u = inner.ldlt().solve(q.transpose() * rhs);
            t = y + q * u;
        } else {
            Mat a = post.p1.asDiagonal() * g;
            a.diagonal().array() += s2;
            w = a.partialPivLu().solve(rhs);
            t = y + g * w;
        }
        const double num = post.pt1.dot(x.rowwise().squaredNorm()) - 2.0 * (post.px.cwiseProduct(t)).sum() +
                           post.p1.dot(t.rowwise().squaredNorm());
        const double next = std::abs(num) / (3.0 * post.np);
        ++r.iterations;
        if (!std::isfinite(next)) throw NumericError("cpd: variance update is not finite");
        const double change = std::abs(next - sigma2) / sigma2;
        if (next < 1e-12) {
            sigma2 = 1e-12;
            r.converged = true;
            break;
        }
        sigma2 = next;
        post = cpd_posterior(x, t, sigma2, opt.w_out);
        r.objective.push_back(post.nll + penalty());
        const double prev = r.objective[r.objective.size() - 2], cur = r.objective.back();
        if (change < opt.tol || std::abs(cur - prev) <= opt.tol * std::abs(cur)) {
            r.converged = true;
            break;
        }
    }
    r.sigma2 = sigma2;
    if (low_rank) {
        // Nystrom extension: G(p, Y) Q Q^T W = G(p, Y) Q L^-1 u agrees with Q L Q^T W on the
        // fitted points up to the eigensolver accuracy. `deformed` is taken
        // from the same expression so that transform() reproduces it.
        r.coefficients = ke.vectors * (ke.values.cwiseInverse().asDiagonal() * u);
        r.deformed = r.transform(src);
    } else {
        r.coefficients = w;
        r.deformed = (t * r.dst_scale).rowwise() + r.dst_mean.transpose();
    }
    return r;
}

}  // namespace polydiff::registration
