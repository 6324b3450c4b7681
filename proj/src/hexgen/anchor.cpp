#include "polydiff/hexgen/anchor.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/spatial/grid.hpp"

#include <Eigen/SVD>

namespace polydiff::hexgen {

namespace {

struct AffineFit {
    Vec3 x_mean = Vec3::Zero();
    Vec3 y_mean = Vec3::Zero();
    Mat3 b = Mat3::Identity();  // row-vector convention: y = y_mean + (x - x_mean)^T b

    Vec3 operator()(const Vec3& x) const { return y_mean + b.transpose() * (x - x_mean); }
};

// Least squares over centred pairs; rank-deficient sets (coplanar or
// collinear) get the minimum-norm solution, which leaves the missing
// directions unmapped rather than extrapolating them.
AffineFit fit_affine(const Mat& x, const Mat& y) {
    AffineFit f;
    f.x_mean = x.colwise().mean().transpose();
    f.y_mean = y.colwise().mean().transpose();
    const Mat xc = x.rowwise() - f.x_mean.transpose();
    const Mat yc = y.rowwise() - f.y_mean.transpose();
    Eigen::JacobiSVD<Mat> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double top = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    if (!(top > 0.0)) {
        f.b.setZero();
        return f;
    }
    svd.setThreshold(1e-9);
    f.b = svd.solve(yc);
    return f;
}

}  // namespace

HexMesh anchor_boundary(const HexMesh& hm, double h, const Mat& poly, const registration::CorrespondenceMap& corr,
                        const geomio::TriMesh& surface, const AnchorOptions& opt, AnchorReport* report) {
    if (opt.k < 1) throw ArgumentError("anchor: k must be at least 1");
    if (!(h > 0.0) || !(opt.max_distance > 0.0)) throw ArgumentError("anchor: h and max distance must be positive");
    if (poly.rows() == 0 || poly.cols() < 3) throw DimensionError("anchor: polycube points must be M x 3 or wider");
    if (corr.size() != poly.rows()) throw DimensionError("anchor: correspondence and polycube sizes differ");
    if (surface.face_count() == 0) throw ArgumentError("anchor: surface has no faces");

    const Index m = poly.rows();
    const Mat domain = poly.leftCols(3);
    Mat target(m, 3);
    for (Index i = 0; i < m; ++i)
        target.row(i) = geomio::barycentric_point(surface, corr.face_id[static_cast<std::size_t>(i)],
                                                  corr.bary.row(i).transpose())
                            .transpose();
    const AffineFit global = fit_affine(domain, target);
    const spatial::UniformGrid grid(domain, spatial::UniformGrid::suggest_cell(domain));
    const Index k = std::min<Index>(opt.k, m);
    const double reach = opt.max_distance * h;

    HexMesh out = hm;
    out.anchors.assign(static_cast<std::size_t>(hm.vertex_count()), Anchor{});
    AnchorReport rep;
    std::vector<unsigned char> done(static_cast<std::size_t>(hm.vertex_count()), 0);
#pragma omp parallel for schedule(dynamic, 16)
    for (Index v = 0; v < hm.vertex_count(); ++v) {
        if (!hm.boundary[static_cast<std::size_t>(v)]) continue;
        const Vec3 p = hm.vertices.row(v).transpose();
        const auto nb = grid.knn(p, k, spatial::Metric::L2);
        if (nb.empty() || nb.front().dist > reach) continue;
        Mat xs(static_cast<Index>(nb.size()), 3), ys(static_cast<Index>(nb.size()), 3);
        for (std::size_t j = 0; j < nb.size(); ++j) {
            xs.row(static_cast<Index>(j)) = domain.row(nb[j].index);
            ys.row(static_cast<Index>(j)) = target.row(nb[j].index);
        }
        const geomio::SurfacePoint sp = geomio::closest_point(surface, fit_affine(xs, ys)(p));
        out.vertices.row(v) = sp.point.transpose();
        out.anchors[static_cast<std::size_t>(v)] = Anchor{sp.face, sp.bary};
        done[static_cast<std::size_t>(v)] = 1;
    }
    for (Index v = 0; v < hm.vertex_count(); ++v) {
        if (done[static_cast<std::size_t>(v)]) {
            ++rep.anchored;
            continue;
        }
        if (hm.boundary[static_cast<std::size_t>(v)]) ++rep.unanchored;
        out.vertices.row(v) = global(hm.vertices.row(v).transpose()).transpose();
    }
    if (report) *report = rep;
    return out;
}

}  // namespace polydiff::hexgen
