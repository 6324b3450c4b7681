#include "polydiff/geomio/cloud.hpp"

#include "polydiff/core/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace polydiff::geomio {

void ConditionCloud::validate(const TriMesh& mesh) const {
    if (points.cols() != 3 || bary.cols() != 3 || bary.rows() != points.rows() ||
        static_cast<Index>(face_id.size()) != points.rows())
        throw DimensionError("condition cloud: points, faces and weights disagree in size");
    for (Index i = 0; i < size(); ++i) {
        const Index f = face_id[static_cast<std::size_t>(i)];
        if (f < 0 || f >= mesh.face_count()) throw DataError("condition cloud: bad face id at " + std::to_string(i));
        const Vec3 b = bary.row(i).transpose();
        if (b.minCoeff() < 0.0 || std::abs(b.sum() - 1.0) > 1e-9)
            throw DataError("condition cloud: weights off the simplex at " + std::to_string(i));
        if ((barycentric_point(mesh, f, b) - points.row(i).transpose()).cwiseAbs().maxCoeff() > 1e-9)
            throw DataError("condition cloud: point " + std::to_string(i) + " does not match its provenance");
    }
}

void PolycubeCloud::validate() const {
    if (data.cols() != 6) throw DimensionError("polycube cloud needs six channels");
    for (Index i = 0; i < size(); ++i)
        if (std::abs(data.row(i).tail<3>().norm() - 1.0) > 1e-6)
            throw DataError("polycube cloud: normal " + std::to_string(i) + " is not unit length");
}

namespace {

double parse_value(const std::string& tok, long line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError("pcd: bad value '" + tok + "'", line);
    return v;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

Mat load_cloud(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cloud " + path.string());
    std::string line;
    long line_no = 0;
    while (std::getline(in, line) && blank(line)) ++line_no;
    ++line_no;
    std::istringstream hs(line);
    std::string tag;
    long long count = -1;
    int channels = 0;
    if (!(hs >> tag >> count >> channels) || tag != "pcd" || count < 0)
        throw ParseError("pcd: expected header 'pcd <count> <channels>'", line_no);
    if (channels != 3 && channels != 6) throw ParseError("pcd: channels must be 3 or 6", line_no);

    Mat cloud(count, channels);
    Index row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        if (row >= count) throw ParseError("pcd: more rows than the header count " + std::to_string(count), line_no);
        std::istringstream ls(line);
        std::string tok;
        for (int c = 0; c < channels; ++c) {
            if (!(ls >> tok)) throw ParseError("pcd: row has fewer than " + std::to_string(channels) + " values", line_no);
            cloud(row, c) = parse_value(tok, line_no);
        }
        if (ls >> tok) throw ParseError("pcd: row has extra values", line_no);
        ++row;
    }
    if (row != count)
        throw ParseError("pcd: header says " + std::to_string(count) + " points, file has " + std::to_string(row));
    return cloud;
}

void save_cloud(const Mat& cloud, const std::filesystem::path& path) {
    if (cloud.cols() != 3 && cloud.cols() != 6) throw DimensionError("pcd: channels must be 3 or 6");
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write cloud " + path.string());
    std::fprintf(f, "pcd %lld %lld\n", static_cast<long long>(cloud.rows()), static_cast<long long>(cloud.cols()));
    for (Index i = 0; i < cloud.rows(); ++i) {
        for (Index c = 0; c < cloud.cols(); ++c) std::fprintf(f, c ? " %.17g" : "%.17g", cloud(i, c));
        std::fputc('\n', f);
    }
    if (std::fclose(f) != 0) throw DataError("failed writing cloud " + path.string());
}

void save_provenance(const ConditionCloud& cloud, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw DataError("cannot write provenance " + path.string());
    std::fprintf(f, "prov %lld\n", static_cast<long long>(cloud.size()));
    for (Index i = 0; i < cloud.size(); ++i)
        std::fprintf(f, "%lld %.17g %.17g %.17g\n", static_cast<long long>(cloud.face_id[static_cast<std::size_t>(i)]),
                     cloud.bary(i, 0), cloud.bary(i, 1), cloud.bary(i, 2));
    if (std::fclose(f) != 0) throw DataError("failed writing provenance " + path.string());
}

void load_provenance(ConditionCloud& cloud, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open provenance " + path.string());
    std::string tag;
    long long count = -1;
    if (!(in >> tag >> count) || tag != "prov" || count != cloud.size())
        throw ParseError("provenance: header missing or count differs from the cloud", 1);
    cloud.face_id.assign(static_cast<std::size_t>(count), 0);
    cloud.bary.resize(count, 3);
    for (Index i = 0; i < count; ++i) {
        long long f = 0;
        if (!(in >> f >> cloud.bary(i, 0) >> cloud.bary(i, 1) >> cloud.bary(i, 2)))
            throw ParseError("provenance: truncated record", static_cast<long>(i) + 2);
        cloud.face_id[static_cast<std::size_t>(i)] = static_cast<Index>(f);
    }
}

}  // namespace polydiff::geomio
