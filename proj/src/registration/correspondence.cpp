#include "polydiff/registration/correspondence.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/spatial/grid.hpp"

#include <cstdio>
#include <fstream>

namespace polydiff::registration {

namespace {

CorrespondenceMap allocate(Index m) {
    CorrespondenceMap c;
    c.sample.resize(static_cast<std::size_t>(m));
    c.face_id.resize(static_cast<std::size_t>(m));
    c.residual.resize(static_cast<std::size_t>(m));
    c.bary.resize(m, 3);
    return c;
}

void check(const Mat& deformed, const geomio::ConditionCloud& ori) {
    if (ori.size() == 0) throw ArgumentError("correspondence: original cloud is empty");
    if (deformed.rows() > 0 && deformed.cols() < 3) throw DimensionError("correspondence: points need three columns");
    if (static_cast<Index>(ori.face_id.size()) != ori.size() || ori.bary.rows() != ori.size())
        throw DimensionError("correspondence: original cloud has no provenance");
}

void anchor(CorrespondenceMap& c, Index i, const geomio::ConditionCloud& ori, Index s, double d) {
    const auto k = static_cast<std::size_t>(i);
    c.sample[k] = s;
    c.face_id[k] = ori.face_id[static_cast<std::size_t>(s)];
    c.bary.row(i) = ori.bary.row(s);
    c.residual[k] = d;
}

}  // namespace

CorrespondenceMap build_correspondence(const Mat& deformed, const geomio::ConditionCloud& ori) {
    check(deformed, ori);
    const spatial::UniformGrid grid(ori.points, spatial::UniformGrid::suggest_cell(ori.points));
    CorrespondenceMap c = allocate(deformed.rows());
#pragma omp parallel for schedule(dynamic, 256)
    for (Index i = 0; i < deformed.rows(); ++i) {
        const auto nb = grid.nearest(deformed.row(i).head<3>().transpose(), spatial::Metric::L2);
        anchor(c, i, ori, nb.index, nb.dist);
    }
    return c;
}

CorrespondenceMap build_correspondence_reference(const Mat& deformed, const geomio::ConditionCloud& ori) {
    check(deformed, ori);
    CorrespondenceMap c = allocate(deformed.rows());
    for (Index i = 0; i < deformed.rows(); ++i) {
        Index best = 0;
        double best_d = INFINITY;
        for (Index s = 0; s < ori.size(); ++s) {
            const double d = spatial::distance(deformed.row(i).head<3>().transpose(), ori.points.row(s).transpose(),
                                               spatial::Metric::L2);
            if (d < best_d) {
                best_d = d;
                best = s;
            }
        }
        anchor(c, i, ori, best, best_d);
    }
    return c;
}

void save_correspondence(const CorrespondenceMap& map, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write correspondence " + path.string());
    std::fprintf(f, "corr %lld\n", static_cast<long long>(map.size()));
    for (Index i = 0; i < map.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        std::fprintf(f, "%lld %lld %lld %.17g %.17g %.17g %.17g\n", static_cast<long long>(i),
                     static_cast<long long>(map.sample[k]), static_cast<long long>(map.face_id[k]), map.bary(i, 0), map.bary(i, 1), map.bary(i, 2),
                     map.residual[k]);
    }
    if (std::fclose(f) != 0) throw DataError("failed writing correspondence " + path.string());
}

CorrespondenceMap load_correspondence(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open correspondence " + path.string());
    std::string tag;
    long long count = -1;
    if (!(in >> tag >> count) || tag != "corr" || count < 0) throw ParseError("correspondence: missing header", 1);
    CorrespondenceMap map;
    map.sample.resize(static_cast<std::size_t>(count));
    map.face_id.resize(static_cast<std::size_t>(count));
    map.residual.resize(static_cast<std::size_t>(count));
    map.bary.resize(count, 3);
    for (Index i = 0; i < count; ++i) {
        const auto k = static_cast<std::size_t>(i);
        long long idx = -1, sample = -1, face = -1;
        if (!(in >> idx >> sample >> face >> map.bary(i, 0) >> map.bary(i, 1) >> map.bary(i, 2) >> map.residual[k]) ||
            idx != i)
            throw ParseError("correspondence: bad record", static_cast<long>(i) + 2);
        map.sample[k] = static_cast<Index>(sample);
        map.face_id[k] = static_cast<Index>(face);
    }
    return map;
}

}  // namespace polydiff::registration
