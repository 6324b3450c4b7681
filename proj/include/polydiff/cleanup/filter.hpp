#pragma once

#include "polydiff/core/types.hpp"

#include <vector>

namespace polydiff::cleanup {

// Two-pass outlier removal for generated clouds. Distances use the first
// three columns under L1; extra columns (normals) ride along untouched.
// Every parallel routine has a `_reference` twin that does the O(n^2) scan.

struct FilterConfig {
    double tau = 0.0;   // L1 connectivity radius
    Index prune_k = 0;  // points dropped by the density pass

    /// ceil(0.002 * m).
    static Index default_prune_k(Index m);
    void validate() const;
};

struct FilterReport {
    Index input = 0;
    Index removed_isolated = 0;
    Index removed_sparse = 0;
    double tau = 0.0;
};

/// Rows of `cloud` listed in `rows`, in that order.
Mat select_rows(const Mat& cloud, const std::vector<Index>& rows);

/// Indices (ascending) of points with at least one other point strictly
/// closer than tau.
std::vector<Index> connected_indices(const Mat& cloud, double tau);
std::vector<Index> connected_indices_reference(const Mat& cloud, double tau);
Mat phase1_connectivity(const Mat& cloud, double tau);

/// L1 distance from each point to its nearest other point.
std::vector<double> nearest_l1(const Mat& cloud);
std::vector<double> nearest_l1_reference(const Mat& cloud);

/// Indices (ascending) left after removing the k points with the largest
/// nearest-neighbour distance; among equal distances the higher index goes
/// first. Throws ArgumentError when k >= size (and k > 0).
std::vector<Index> dense_indices(const Mat& cloud, Index k);
Mat phase2_density(const Mat& cloud, Index k);

/// 2.5 x median nearest-neighbour L1 distance (mean of the middle pair for
/// an even count). Needs at least two points.
double auto_tau(const Mat& cloud);

/// Phase one then phase two on the survivors.
Mat filter(const Mat& cloud, const FilterConfig& cfg, FilterReport* report = nullptr);

}  // namespace polydiff::cleanup
