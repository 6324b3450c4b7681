#include "polydiff/geomio/synth.hpp"

#include "polydiff/core/error.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

namespace polydiff::geomio {

using nlohmann::json;

void ShapeSpec::validate() const {
    if (boxes.empty()) throw ArgumentError("shape spec: no boxes");
    for (const auto& b : boxes)
        for (int a = 0; a < 3; ++a)
            if (b.size[static_cast<std::size_t>(a)] <= 0) throw ArgumentError("shape spec: box sizes must be positive");
    if (!(warp_amplitude >= 0.0) || !(warp_frequency >= 0.0))
        throw ArgumentError("shape spec: warp amplitude and frequency must be non-negative");
    if (warp_amplitude * 2.0 * std::numbers::pi * warp_frequency >= 0.5)
        throw ArgumentError("shape spec: warp too strong (amplitude * 2 pi frequency must stay below 0.5)");
    if (subdivision < 1) throw ArgumentError("shape spec: subdivision must be at least 1");
    if (polycube_points < 1) throw ArgumentError("shape spec: polycube_points must be at least 1");
    for (double r : rotation_deg)
        if (!std::isfinite(r)) throw ArgumentError("shape spec: rotation must be finite");
}

namespace {

int integer_field(const json& v, const char* what) {
    if (!v.is_number()) throw ArgumentError(std::string("shape spec: ") + what + " must be numeric");
    const double d = v.get<double>();
    if (d != std::floor(d) || std::abs(d) > 1e6)
        throw ArgumentError(std::string("shape spec: ") + what + " must be an integer");
    return static_cast<int>(d);
}

std::array<int, 3> int3(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 3) throw ArgumentError(std::string("shape spec: ") + what + " needs 3 entries");
    return {integer_field(v[0], what), integer_field(v[1], what), integer_field(v[2], what)};
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ArgumentError(std::string("shape spec: unknown key '") + it.key() + "' in " + where);
    }
}

}  // namespace

ShapeSpec ShapeSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("shape spec: ") + e.what());
    }
    if (!j.is_object()) throw ArgumentError("shape spec: top level must be an object");
    reject_unknown(j, {"boxes", "warp", "rotation", "subdivision", "polycube_points"}, "shape spec");
    ShapeSpec s;
    if (!j.contains("boxes") || !j["boxes"].is_array()) throw ArgumentError("shape spec: 'boxes' array required");
    for (const auto& b : j["boxes"]) {
        if (!b.is_object()) throw ArgumentError("shape spec: each box must be an object");
        reject_unknown(b, {"origin", "size"}, "box");
        BoxSpec box;
        if (b.contains("origin")) box.origin = int3(b["origin"], "box origin");
        if (!b.contains("size")) throw ArgumentError("shape spec: box needs a size");
        box.size = int3(b["size"], "box size");
        s.boxes.push_back(box);
    }
    if (j.contains("warp")) {
        const auto& w = j["warp"];
        reject_unknown(w, {"amplitude", "frequency"}, "warp");
        s.warp_amplitude = w.value("amplitude", 0.0);
        s.warp_frequency = w.value("frequency", 0.5);
    }
    if (j.contains("rotation")) {
        const auto& r = j["rotation"];
        if (!r.is_array() || r.size() != 3) throw ArgumentError("shape spec: rotation needs 3 angles");
        for (std::size_t a = 0; a < 3; ++a) s.rotation_deg[a] = r[a].get<double>();
    }
    if (j.contains("subdivision")) s.subdivision = integer_field(j["subdivision"], "subdivision");
    if (j.contains("polycube_points")) s.polycube_points = integer_field(j["polycube_points"], "polycube_points");
    s.validate();
    return s;
}

std::string ShapeSpec::to_json() const {
    json j;
    j["boxes"] = json::array();
    for (const auto& b : boxes) j["boxes"].push_back({{"origin", b.origin}, {"size", b.size}});
    j["warp"] = {{"amplitude", warp_amplitude}, {"frequency", warp_frequency}};
    j["rotation"] = rotation_deg;
    j["subdivision"] = subdivision;
    j["polycube_points"] = polycube_points;
    return j.dump(2);
}

ShapeSpec ShapeSpec::cube() {
    ShapeSpec s;
    s.boxes = {{{0, 0, 0}, {1, 1, 1}}};
    return s;
}

ShapeSpec ShapeSpec::bar2x1() {
    ShapeSpec s;
    s.boxes = {{{0, 0, 0}, {2, 1, 1}}};
    return s;
}

ShapeSpec ShapeSpec::l_shape() {
    ShapeSpec s;
    s.boxes = {{{0, 0, 0}, {2, 1, 1}}, {{0, 1, 0}, {1, 1, 1}}};
    return s;
}

ShapeSpec ShapeSpec::frame() {
    ShapeSpec s;
    s.boxes = {{{0, 0, 0}, {3, 1, 1}}, {{0, 2, 0}, {3, 1, 1}}, {{0, 1, 0}, {1, 1, 1}}, {{2, 1, 0}, {1, 1, 1}}};
    return s;
}

bool VoxelSet::at(int x, int y, int z) const {
    x -= lo[0];
    y -= lo[1];
    z -= lo[2];
    if (x < 0 || y < 0 || z < 0 || x >= dims[0] || y >= dims[1] || z >= dims[2]) return false;
    return filled[static_cast<std::size_t>((z * dims[1] + y) * dims[0] + x)] != 0;
}

VoxelSet voxelize(const ShapeSpec& spec) {
    spec.validate();
    VoxelSet v;
    std::array<int, 3> hi{};
    for (int a = 0; a < 3; ++a) {
        v.lo[static_cast<std::size_t>(a)] = spec.boxes.front().origin[static_cast<std::size_t>(a)];
        hi[static_cast<std::size_t>(a)] = v.lo[static_cast<std::size_t>(a)];
    }
    for (const auto& b : spec.boxes)
        for (std::size_t a = 0; a < 3; ++a) {
            v.lo[a] = std::min(v.lo[a], b.origin[a]);
            hi[a] = std::max(hi[a], b.origin[a] + b.size[a]);
        }
    for (std::size_t a = 0; a < 3; ++a) v.dims[a] = hi[a] - v.lo[a];
    const double cells = static_cast<double>(v.dims[0]) * v.dims[1] * v.dims[2];
    if (cells > 5e7) throw ArgumentError("shape spec: bounding grid too large");
    v.filled.assign(static_cast<std::size_t>(cells), 0);
    for (const auto& b : spec.boxes)
        for (int z = b.origin[2]; z < b.origin[2] + b.size[2]; ++z)
            for (int y = b.origin[1]; y < b.origin[1] + b.size[1]; ++y)
                for (int x = b.origin[0]; x < b.origin[0] + b.size[0]; ++x)
                    v.filled[static_cast<std::size_t>(((z - v.lo[2]) * v.dims[1] + (y - v.lo[1])) * v.dims[0] +
                                                      (x - v.lo[0]))] = 1;
    return v;
}

namespace {

// One unit square of the union boundary: lattice corner, normal axis, sign.
struct UnitFace {
    std::array<int, 3> base;
    int axis;
    int sign;
};

std::vector<UnitFace> boundary_faces(const VoxelSet& v) {
    std::vector<UnitFace> out;
    for (int z = v.lo[2]; z < v.lo[2] + v.dims[2]; ++z)
        for (int y = v.lo[1]; y < v.lo[1] + v.dims[1]; ++y)
            for (int x = v.lo[0]; x < v.lo[0] + v.dims[0]; ++x) {
                if (!v.at(x, y, z)) continue;
                for (int a = 0; a < 3; ++a)
                    for (int s : {-1, 1}) {
                        std::array<int, 3> n{x, y, z};
                        n[static_cast<std::size_t>(a)] += s;
                        if (v.at(n[0], n[1], n[2])) continue;
                        std::array<int, 3> base{x, y, z};
                        if (s > 0) base[static_cast<std::size_t>(a)] += 1;
                        out.push_back({base, a, s});
                    }
            }
    return out;
}

Mat3 rotation(const std::array<double, 3>& deg) {
    const double k = std::numbers::pi / 180.0;
    const Mat3 rx = Eigen::AngleAxisd(deg[0] * k, Vec3::UnitX()).toRotationMatrix();
    const Mat3 ry = Eigen::AngleAxisd(deg[1] * k, Vec3::UnitY()).toRotationMatrix();
    const Mat3 rz = Eigen::AngleAxisd(deg[2] * k, Vec3::UnitZ()).toRotationMatrix();
    return rz * ry * rx;
}

}  // namespace

Vec3 apply_deformation(const ShapeSpec& spec, const Vec3& p) {
    Vec3 q = p;
    if (spec.warp_amplitude > 0.0) {
        const double w = 2.0 * std::numbers::pi * spec.warp_frequency;
        q += spec.warp_amplitude * Vec3(std::sin(w * p.y()), std::sin(w * p.z()), std::sin(w * p.x()));
    }
    if (spec.rotation_deg != std::array<double, 3>{0.0, 0.0, 0.0}) q = rotation(spec.rotation_deg) * q;
    return q;
}

TriMesh box_union_mesh(const ShapeSpec& spec) {
    const VoxelSet vox = voxelize(spec);
    const int s = spec.subdivision;
    std::map<std::tuple<long, long, long>, Index> ids;
    std::vector<Vec3> verts;
    std::vector<std::array<Index, 3>> tris;
    auto vertex = [&](const std::array<long, 3>& k) {
        auto [it, fresh] = ids.emplace(std::make_tuple(k[0], k[1], k[2]), static_cast<Index>(verts.size()));
        if (fresh)
            verts.push_back(Vec3(static_cast<double>(k[0]), static_cast<double>(k[1]), static_cast<double>(k[2])) /
                            static_cast<double>(s));
        return it->second;
    };
    for (const auto& f : boundary_faces(vox)) {
        const int u = (f.axis + 1) % 3, w = (f.axis + 2) % 3;
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) {
                std::array<long, 3> k0{};
                for (std::size_t a = 0; a < 3; ++a) k0[a] = static_cast<long>(f.base[a]) * s;
                k0[static_cast<std::size_t>(u)] += i;
                k0[static_cast<std::size_t>(w)] += j;
                auto k1 = k0, k2 = k0, k3 = k0;
                k1[static_cast<std::size_t>(u)] += 1;
                k2[static_cast<std::size_t>(u)] += 1;
                k2[static_cast<std::size_t>(w)] += 1;
                k3[static_cast<std::size_t>(w)] += 1;
                const Index a0 = vertex(k0), a1 = vertex(k1), a2 = vertex(k2), a3 = vertex(k3);
                // e_u x e_w = e_axis, so (k0, k1, k2) faces +axis.
                if (f.sign > 0) {
                    tris.push_back({a0, a1, a2});
                    tris.push_back({a0, a2, a3});
                } else {
                    tris.push_back({a0, a2, a1});
                    tris.push_back({a0, a3, a2});
                }
            }
    }
    TriMesh m;
    m.vertices.resize(static_cast<Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i)
        m.vertices.row(static_cast<Index>(i)) = apply_deformation(spec, verts[i]).transpose();
    m.faces.resize(static_cast<Index>(tris.size()), 3);
    for (std::size_t t = 0; t < tris.size(); ++t)
        for (std::size_t k = 0; k < 3; ++k) m.faces(static_cast<Index>(t), static_cast<Index>(k)) = tris[t][k];
    return m;
}

SynthPair synth_pair(const ShapeSpec& spec, std::uint64_t seed) {
    SynthPair out;
    out.mesh = box_union_mesh(spec);
    const auto faces = boundary_faces(voxelize(spec));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, faces.size() - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    out.polycube.data.resize(spec.polycube_points, 6);
    for (Index i = 0; i < spec.polycube_points; ++i) {
        const auto& f = faces[pick(rng)];
        Vec3 p(f.base[0], f.base[1], f.base[2]);
        p[(f.axis + 1) % 3] += u01(rng);
        p[(f.axis + 2) % 3] += u01(rng);
        Vec3 n = Vec3::Zero();
        n[f.axis] = f.sign;
        out.polycube.data.row(i) << p.transpose(), n.transpose();
    }
    return out;
}

}  // namespace polydiff::geomio
