#include "polydiff/cleanup/filter.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/spatial/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polydiff::cleanup {

using spatial::Metric;
using spatial::UniformGrid;

namespace {

void check_cloud(const Mat& cloud) {
    if (cloud.rows() > 0 && cloud.cols() < 3) throw DimensionError("cleanup: cloud needs three positional columns");
    if (!cloud.allFinite()) throw DataError("cleanup: non-finite coordinate");
}

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("cleanup: tau must be positive and finite");
}

Vec3 position(const Mat& cloud, Index i) { return cloud.row(i).head<3>().transpose(); }

}  // namespace

Index FilterConfig::default_prune_k(Index m) { return static_cast<Index>(std::ceil(0.002 * static_cast<double>(m))); }

void FilterConfig::validate() const {
    check_tau(tau);
    if (prune_k < 0) throw ArgumentError("cleanup: K must be non-negative");
}

Mat select_rows(const Mat& cloud, const std::vector<Index>& rows) {
    Mat out(static_cast<Index>(rows.size()), cloud.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = cloud.row(rows[i]);
    return out;
}

std::vector<Index> connected_indices(const Mat& cloud, double tau) {
    check_tau(tau);
    check_cloud(cloud);
    const Index n = cloud.rows();
    if (n == 0) return {};
    // Slightly wider cells keep ring pruning conservative at exactly tau.
    const UniformGrid grid(cloud.leftCols<3>(), tau * (1.0 + 1e-9));
    std::vector<unsigned char> keep(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < n; ++i)
        keep[static_cast<std::size_t>(i)] = grid.any_within(position(cloud, i), tau, Metric::L1, i) ? 1 : 0;
    std::vector<Index> out;
    for (Index i = 0; i < n; ++i)
        if (keep[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

std::vector<Index> connected_indices_reference(const Mat& cloud, double tau) {
    check_tau(tau);
    check_cloud(cloud);
    std::vector<Index> out;
    for (Index i = 0; i < cloud.rows(); ++i)
        for (Index j = 0; j < cloud.rows(); ++j)
            if (j != i && spatial::distance(position(cloud, i), position(cloud, j), Metric::L1) < tau) {
                out.push_back(i);
                break;
            }
    return out;
}

Mat phase1_connectivity(const Mat& cloud, double tau) { return select_rows(cloud, connected_indices(cloud, tau)); }

std::vector<double> nearest_l1(const Mat& cloud) {
    check_cloud(cloud);
    const Index n = cloud.rows();
    if (n < 2) throw ArgumentError("cleanup: nearest-neighbour distances need at least two points");
    const UniformGrid grid(cloud.leftCols<3>(), UniformGrid::suggest_cell(cloud.leftCols<3>()));
    std::vector<double> d(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = grid.nearest(position(cloud, i), Metric::L1, i).dist;
    return d;
}

std::vector<double> nearest_l1_reference(const Mat& cloud) {
    check_cloud(cloud);
    const Index n = cloud.rows();
    if (n < 2) throw ArgumentError("cleanup: nearest-neighbour distances need at least two points");
    std::vector<double> d(static_cast<std::size_t>(n), INFINITY);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (j != i)
                d[static_cast<std::size_t>(i)] = std::min(
                    d[static_cast<std::size_t>(i)], spatial::distance(position(cloud, i), position(cloud, j), Metric::L1));
    return d;
}

std::vector<Index> dense_indices(const Mat& cloud, Index k) {
    if (k < 0) throw ArgumentError("cleanup: K must be non-negative");
    std::vector<Index> all(static_cast<std::size_t>(cloud.rows()));
    std::iota(all.begin(), all.end(), Index{0});
    if (k == 0) return all;
    if (k >= cloud.rows())
        throw ArgumentError("cleanup: K = " + std::to_string(k) + " would remove all " +
                            std::to_string(cloud.rows()) + " points");
    const auto d = nearest_l1(cloud);
    // Removal order: sparsest first, higher index first among equals.
    std::vector<Index> order = all;
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), [&](Index a, Index b) {
        const double da = d[static_cast<std::size_t>(a)], db = d[static_cast<std::size_t>(b)];
        return da > db || (da == db && a > b);
    });
    std::vector<unsigned char> drop(all.size(), 0);
    for (Index i = 0; i < k; ++i) drop[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    std::vector<Index> out;
    out.reserve(all.size() - static_cast<std::size_t>(k));
    for (Index i : all)
        if (!drop[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

Mat phase2_density(const Mat& cloud, Index k) { return select_rows(cloud, dense_indices(cloud, k)); }

double auto_tau(const Mat& cloud) {
    auto d = nearest_l1(cloud);
    const std::size_t n = d.size(), mid = n / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double median = d[mid];
    if (n % 2 == 0) median = 0.5 * (median + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
    if (!(median > 0.0)) throw DataError("cleanup: median spacing is zero (duplicated points)");
    return 2.5 * median;
}

Mat filter(const Mat& cloud, const FilterConfig& cfg, FilterReport* report) {
    cfg.validate();
    const auto keep1 = connected_indices(cloud, cfg.tau);
    const Mat p1 = select_rows(cloud, keep1);
    const auto keep2 = dense_indices(p1, cfg.prune_k);
    if (report) {
        report->input = cloud.rows();
        report->removed_isolated = cloud.rows() - p1.rows();
        report->removed_sparse = cfg.prune_k;
        report->tau = cfg.tau;
    }
    return select_rows(p1, keep2);
}

}  // namespace polydiff::cleanup
