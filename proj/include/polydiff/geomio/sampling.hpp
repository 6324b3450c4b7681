#pragma once

#include "polydiff/geomio/cloud.hpp"

#include <cstdint>

namespace polydiff::geomio {

struct PoissonOptions {
    /// Rejection radius r = radius_factor * sqrt(total_area / N).
    double radius_factor = 0.85;
    /// Darts thrown = candidate_factor * N before trimming or topping up.
    double candidate_factor = 4.0;
};

struct PoissonReport {
    double radius = 0.0;
    Index accepted = 0;     // darts that passed the radius test
    Index trimmed = 0;      // accepted darts dropped to reach N
    Index compensated = 0;  // extra draws that ignore the radius
};

/// Area-weighted dart throwing with a minimum-distance rejection, followed by
/// random trimming or radius-free top-up so exactly N points are returned.
/// Acceptance is sequential by candidate index, so the result depends only
/// on the seed. Radius-accepted points come first, in acceptance order;
/// compensation draws follow them.
ConditionCloud poisson_disk_sample(const TriMesh& mesh, Index count, std::uint64_t seed,
                                   const PoissonOptions& opt = {}, PoissonReport* report = nullptr);

/// Plain area-weighted sampling (no radius), with provenance.
ConditionCloud area_sample(const TriMesh& mesh, Index count, std::uint64_t seed);

}  // namespace polydiff::geomio
