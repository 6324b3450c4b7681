#include "polydiff/registration/rigid.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/spatial/grid.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

namespace polydiff::registration {

Mat SimilarityTransform::apply(const Mat& points) const {
    Mat out = points;
    out.leftCols<3>() = (scale * points.leftCols<3>() * rotation.transpose()).rowwise() + translation.transpose();
    return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
}

SimilarityTransform SimilarityTransform::operator*(const SimilarityTransform& o) const {
    SimilarityTransform c;
    c.scale = scale * o.scale;
    c.rotation = rotation * o.rotation;
    c.translation = scale * (rotation * o.translation) + translation;
    return c;
}

namespace {

Vec3 centroid(const Mat& p) { return p.leftCols<3>().colwise().mean().transpose(); }

double rms_radius(const Mat& p, const Vec3& c) {
    return std::sqrt((p.leftCols<3>().rowwise() - c.transpose()).rowwise().squaredNorm().mean());
}

void check(const Mat& p, const char* what) {
    if (p.rows() == 0) throw ArgumentError(std::string("rigid_align: ") + what + " cloud is empty");
    if (p.cols() < 3) throw DimensionError(std::string("rigid_align: ") + what + " cloud needs three columns");
    if (!p.allFinite()) throw DataError(std::string("rigid_align: ") + what + " cloud has non-finite values");
}

// Principal axes as columns, ordered by decreasing variance, right-handed.
Mat3 principal_axes(const Mat& p, const Vec3& c) {
    const Mat centered = p.leftCols<3>().rowwise() - c.transpose();
    const Mat3 cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    Mat3 axes;
    for (int k = 0; k < 3; ++k) axes.col(k) = es.eigenvectors().col(2 - k);
    if (axes.determinant() < 0) axes.col(2) = -axes.col(2);
    return axes;
}

struct IcpRun {
    SimilarityTransform transform;
    double rmse;
    int iterations;
};

IcpRun icp(const Mat& src, const Mat& dst, const spatial::UniformGrid& grid, SimilarityTransform start,
           const RigidOptions& opt) {
    const Index n = src.rows();
    std::vector<Index> match(static_cast<std::size_t>(n), -1), previous;
    Mat moved = start.apply(src);
    SimilarityTransform cur = start;
    int it = 0;
    std::vector<double> sq(static_cast<std::size_t>(n));
    auto rematch = [&] {
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < n; ++i) {
            const auto nb = grid.nearest(moved.row(i).head<3>().transpose(), spatial::Metric::L2);
            match[static_cast<std::size_t>(i)] = nb.index;
            sq[static_cast<std::size_t>(i)] = nb.dist * nb.dist;
        }
        double sum = 0.0;  // serial so the result does not depend on the thread count
        for (double v : sq) sum += v;
        return std::sqrt(sum / static_cast<double>(n));
    };
    double rmse = rematch();
    while (it < opt.icp_iters && match != previous) {
        Mat target(n, 3);
        for (Index i = 0; i < n; ++i) target.row(i) = dst.row(match[static_cast<std::size_t>(i)]).head<3>();
        cur = fit_similarity(src, target, opt.with_scale);
        moved = cur.apply(src);
        previous = match;
        rmse = rematch();
        ++it;
    }
    return {cur, rmse, it};
}

}  // namespace

SimilarityTransform fit_similarity(const Mat& src, const Mat& dst, bool with_scale) {
    if (src.rows() != dst.rows() || src.rows() == 0) throw DimensionError("fit_similarity: point counts differ");
    const Vec3 ma = centroid(src), mb = centroid(dst);
    const Mat a = src.leftCols<3>().rowwise() - ma.transpose();
    const Mat b = dst.leftCols<3>().rowwise() - mb.transpose();
    const double var_a = a.squaredNorm() / static_cast<double>(src.rows());
    if (!(var_a > 1e-300)) throw NumericError("fit_similarity: source points are all identical");
    const Mat3 cov = b.transpose() * a / static_cast<double>(src.rows());
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 s(1, 1, 1);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) s[2] = -1;
    SimilarityTransform t;
    t.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    t.scale = with_scale ? svd.singularValues().dot(s) / var_a : 1.0;
    if (!(t.scale > 0.0)) throw NumericError("fit_similarity: non-positive scale");
    t.translation = mb - t.scale * t.rotation * ma;
    return t;
}

RigidResult rigid_align(const Mat& src, const Mat& dst, const RigidOptions& opt) {
    check(src, "source");
    check(dst, "target");
    if (opt.icp_iters < 0) throw ArgumentError("rigid_align: icp_iters must be non-negative");
    const Vec3 cs = centroid(src), cd = centroid(dst);
    const double rs = rms_radius(src, cs), rd = rms_radius(dst, cd);
    if (!(rs > 1e-150)) throw NumericError("rigid_align: source points are all identical");

    const double s0 = opt.with_scale && rd > 0.0 ? rd / rs : 1.0;
    std::vector<Mat3> rotations{Mat3::Identity()};
    if (opt.pca_starts && src.rows() >= 3 && dst.rows() >= 3) {
        const Mat3 as = principal_axes(src, cs), ad = principal_axes(dst, cd);
        for (const Vec3& flip : {Vec3(1, 1, 1), Vec3(-1, -1, 1), Vec3(-1, 1, -1), Vec3(1, -1, -1)})
            rotations.push_back(ad * flip.asDiagonal() * as.transpose());
    }

    const spatial::UniformGrid grid(dst.leftCols<3>(), spatial::UniformGrid::suggest_cell(dst.leftCols<3>()));
    RigidResult best;
    best.rmse = INFINITY;
    for (const Mat3& r : rotations) {
        SimilarityTransform start;
        start.scale = s0;
        start.rotation = r;
        start.translation = cd - s0 * r * cs;
        const IcpRun run = icp(src, dst, grid, start, opt);
        if (run.rmse < best.rmse) best = {run.transform, run.rmse, run.iterations};
        // An exact fit cannot be beaten and ties keep the earlier start.
        if (best.rmse <= 1e-12 * rd) break;
    }
    return best;
}

}  // namespace polydiff::registration
