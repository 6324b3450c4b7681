#pragma once

#include "polydiff/geomio/cloud.hpp"

#include <filesystem>
#include <vector>

namespace polydiff::registration {

/// For every deformed polycube point, the nearest original surface sample and
/// that sample's barycentric anchor.
struct CorrespondenceMap {
    std::vector<Index> sample;    // row of the original cloud
    std::vector<Index> face_id;
    Mat bary;                     // M x 3
    std::vector<double> residual; // Euclidean distance to the sample

    Index size() const { return static_cast<Index>(sample.size()); }
};

/// Euclidean nearest neighbour; equal distances resolve to the lower sample
/// index. Throws ArgumentError when `ori` is empty.
CorrespondenceMap build_correspondence(const Mat& deformed, const geomio::ConditionCloud& ori);
CorrespondenceMap build_correspondence_reference(const Mat& deformed, const geomio::ConditionCloud& ori);

/// Header "corr <count>", then one line per polycube point:
/// index sample face_id b0 b1 b2 residual.
void save_correspondence(const CorrespondenceMap& map, const std::filesystem::path& path);
CorrespondenceMap load_correspondence(const std::filesystem::path& path);

}  // namespace polydiff::registration
