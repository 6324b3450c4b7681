#include "doctest.h"

#include "polydiff/core/error.hpp"
#include "polydiff/geomio/synth.hpp"
#include "polydiff/polycube/voxel_model.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

using namespace polydiff;
using namespace polydiff::polycube;

namespace {

// Samples every boundary face of a box union with `per_face` points.
Mat boundary_cloud(const geomio::ShapeSpec& spec, Index per_face, std::uint64_t seed, double jitter = 0.0) {
    const auto vox = geomio::voxelize(spec);
    VoxelModel vm;
    for (int z = vox.lo[2]; z < vox.lo[2] + vox.dims[2]; ++z)
        for (int y = vox.lo[1]; y < vox.lo[1] + vox.dims[1]; ++y)
            for (int x = vox.lo[0]; x < vox.lo[0] + vox.dims[0]; ++x)
                if (vox.at(x, y, z)) vm.voxels.push_back({x, y, z});
    std::sort(vm.voxels.begin(), vm.voxels.end());
    const auto faces = vm.boundary_faces();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::normal_distribution<double> g(0.0, jitter > 0 ? jitter : 1.0);
    Mat out(static_cast<Index>(faces.size()) * per_face, 6);
    Index r = 0;
    for (const auto& f : faces) {
        const auto c = f.corners();
        for (Index k = 0; k < per_face; ++k) {
            Vec3 p(c[0][0], c[0][1], c[0][2]);
            const int a = f.axis;
            p[(a + 1) % 3] += u(rng);
            p[(a + 2) % 3] += u(rng);
            if (jitter > 0) p[a] += g(rng);
            Vec3 n = Vec3::Zero();
            n[a] = f.sign;
            out.row(r++) << p.transpose(), n.transpose();
        }
    }
    return out;
}

std::set<Cell> cells_of(const geomio::ShapeSpec& spec) {
    std::set<Cell> s;
    for (const auto& b : spec.boxes)
        for (int x = 0; x < b.size[0]; ++x)
            for (int y = 0; y < b.size[1]; ++y)
                for (int z = 0; z < b.size[2]; ++z) s.insert({b.origin[0] + x, b.origin[1] + y, b.origin[2] + z});
    return s;
}

}  // namespace

TEST_CASE("labels and tie order") {
    Mat c(4, 6);
    c << 0, 0, 0, 0, 0, 1,  //
        0, 0, 0, 1, 1, 0,   //
        0, 0, 0, 0, -1, -1, //
        0, 0, 0, -0.2, 0.1, -0.9;
    const auto l = label_points(c);
    CHECK(l[0] == AxisLabel::PZ);
    CHECK(l[1] == AxisLabel::PX);
    CHECK(l[2] == AxisLabel::NY);
    CHECK(l[3] == AxisLabel::NZ);
    c.row(1).tail<3>().setZero();
    CHECK_THROWS_AS(label_points(c), DataError);

    const Mat cube = boundary_cloud(geomio::ShapeSpec::cube(), 50, 1);
    const auto lc = label_points(cube);
    std::array<int, 6> counts{};
    for (auto x : lc) ++counts[static_cast<std::size_t>(x)];
    for (int k : counts) CHECK(k == 50);

    // A quarter turn about Z maps +X -> +Y, +Y -> -X.
    Mat rot = cube;
    for (Index i = 0; i < rot.rows(); ++i) {
        rot(i, 3) = -cube(i, 4);
        rot(i, 4) = cube(i, 3);
    }
    const auto lr = label_points(rot);
    const AxisLabel image[6] = {AxisLabel::PY, AxisLabel::NY, AxisLabel::NX, AxisLabel::PX, AxisLabel::PZ, AxisLabel::NZ};
    for (std::size_t i = 0; i < lc.size(); ++i) CHECK(lr[i] == image[static_cast<int>(lc[i])]);
}

TEST_CASE("plane clustering") {
    const Mat cube = boundary_cloud(geomio::ShapeSpec::cube(), 40, 2);
    const auto planes = cluster_planes(cube, label_points(cube), 0.3);
    REQUIRE(planes.size() == 6);
    for (const auto& p : planes) CHECK(std::abs(p.offset - (sign_of(p.label) > 0 ? 1.0 : 0.0)) < 1e-12);

    Mat two(6, 6);
    two << 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1,  //
        0, 0, 2, 0, 0, 1, 1, 0, 2, 0, 0, 1, 0, 1, 2, 0, 0, 1;
    CHECK(cluster_planes(two, label_points(two), 0.5).size() == 2);

    Mat jit = two;
    jit.col(2) << 0.01, -0.02, 0.03, 0.0, 0.02, -0.01;
    const auto one = cluster_planes(jit, label_points(jit), 0.5);
    REQUIRE(one.size() == 1);
    CHECK(std::abs(one[0].offset - jit.col(2).mean()) < 1e-15);
    CHECK_THROWS_AS(cluster_planes(two, label_points(two), 0.0), ArgumentError);
}

TEST_CASE("snapping and collisions") {
    std::vector<PlaneCluster> planes;
    Mat pts(3, 6);
    pts << 0.5, 0.5, 0.02, 0, 0, 1, 0.5, 0.5, 0.98, 0, 0, 1, 0.5, 0.5, 2.01, 0, 0, 1;
    for (Index i = 0; i < 3; ++i) planes.push_back({AxisLabel::PZ, pts(i, 2), {i}});
    GridFrame g;
    const auto snapped = snap_patches(pts, planes, g);
    REQUIRE(snapped.size() == 3);
    CHECK(snapped[0].offset == 0);
    CHECK(snapped[1].offset == 1);
    CHECK(snapped[2].offset == 2);

    Mat close(2, 6);
    close << 0.5, 0.5, 0.0, 0, 0, 1, 0.5, 0.5, 0.4, 0, 0, 1;
    std::vector<PlaneCluster> cp{{AxisLabel::PZ, 0.0, {0}}, {AxisLabel::PZ, 0.4, {1}}};
    CHECK_THROWS_AS(snap_patches(close, cp, g), ValidityError);
    std::vector<PlaneCluster> thin{{AxisLabel::PZ, 0.0, {0}}, {AxisLabel::NZ, 0.4, {1}}};
    CHECK_THROWS_AS(snap_patches(close, thin, g), ValidityError);

    // Default unit: offsets 0, 0.447, 0.894 -> h0 = 0.4, refined to the spacing.
    std::vector<PlaneCluster> p3;
    const double s = 0.447;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < 3; ++k) p3.push_back({make_label(a, 1), k * s, {}});
    const auto frame = choose_grid(p3, 0.05);
    CHECK(std::abs(frame.h - s) < 1e-12);
    CHECK(frame.origin.norm() == 0.0);
}

TEST_CASE("voxel counts, faces and topology of synthetic shapes") {
    struct Case {
        geomio::ShapeSpec spec;
        Index voxels, faces, euler, corners;
        double genus;
    };
    const Case cases[] = {
        {geomio::ShapeSpec::cube(), 1, 6, 2, 8, 0},
        {geomio::ShapeSpec::bar2x1(), 2, 10, 2, 8, 0},
        {geomio::ShapeSpec::l_shape(), 3, 14, 2, 12, 0},
        {geomio::ShapeSpec::frame(), 8, 32, 0, 16, 1},
    };
    for (const auto& c : cases) {
        const Mat cloud = boundary_cloud(c.spec, 30, 3);
        ExtractOptions opt;
        opt.h = 1.0;
        const auto ex = extract_structure(cloud, opt);
        const std::set<Cell> got(ex.model.voxels.begin(), ex.model.voxels.end());
        CHECK(got == cells_of(c.spec));
        CHECK(ex.fill.orientation_mismatches == 0);
        const auto r = structure_report(ex.model);
        CHECK(r.voxels == c.voxels);
        CHECK(r.boundary_faces == c.faces);
        CHECK(r.euler == c.euler);
        CHECK(r.watertight);
        REQUIRE(r.surfaces.size() == 1);
        CHECK(r.surfaces[0].genus == c.genus);
        CHECK(static_cast<Index>(r.corners.size()) == c.corners);

        // Default lattice from the offsets gives the same occupancy.
        const auto auto_ex = extract_structure(cloud);
        CHECK(std::abs(auto_ex.model.grid.h - 1.0) < 1e-12);
        CHECK(auto_ex.model.voxels == ex.model.voxels);
    }
    const auto cube = structure_report(extract_structure(boundary_cloud(geomio::ShapeSpec::cube(), 30, 4)).model);
    for (const auto& k : cube.corners) {
        CHECK(k.incident_faces == 3);
        CHECK(k.feature_edges == 3);
    }
}

TEST_CASE("round trip on larger unions, scaled and shifted") {
    geomio::ShapeSpec s;
    s.boxes = {{{0, 0, 0}, {4, 3, 2}}, {{1, 3, 0}, {2, 2, 3}}, {{-2, 0, 1}, {2, 1, 1}}};
    Mat cloud = boundary_cloud(s, 40, 5, 0.01);
    cloud.leftCols<3>() = (cloud.leftCols<3>() * 0.37).rowwise() + Eigen::RowVector3d(5, -1, 2);
    const auto ex = extract_structure(cloud);
    CHECK(std::abs(ex.model.grid.h - 0.37) < 1e-3);
    std::set<Cell> expect;
    for (const Cell& c : cells_of(s)) expect.insert({c[0] + 2, c[1], c[2]});
    CHECK(std::set<Cell>(ex.model.voxels.begin(), ex.model.voxels.end()) == expect);
}

TEST_CASE("spill cells and open boundaries") {
    Mat cloud = boundary_cloud(geomio::ShapeSpec::bar2x1(), 60, 6);
    // A few stray +Z points just past the edge would add a footprint cell.
    cloud.conservativeResize(cloud.rows() + 2, Eigen::NoChange);
    cloud.row(cloud.rows() - 2) << 2.01, 0.5, 1.0, 0, 0, 1;
    cloud.row(cloud.rows() - 1) << 2.02, 0.4, 1.0, 0, 0, 1;
    ExtractOptions opt;
    opt.h = 1.0;
    CHECK(extract_structure(cloud, opt).model.voxels.size() == 2);

    // Drop the top face over the second cell: a hole in the boundary.
    const Mat bar = boundary_cloud(geomio::ShapeSpec::bar2x1(), 60, 7);
    std::vector<Index> keep;
    for (Index i = 0; i < bar.rows(); ++i)
        if (!(bar(i, 5) == 1.0 && bar(i, 0) > 1.0)) keep.push_back(i);
    Mat open(static_cast<Index>(keep.size()), 6);
    for (std::size_t k = 0; k < keep.size(); ++k) open.row(static_cast<Index>(k)) = bar.row(keep[k]);
    CHECK_THROWS_AS(extract_structure(open, opt), ValidityError);
}

TEST_CASE("two disjoint cubes and voxel files") {
    VoxelModel vm;
    vm.grid.h = 0.5;
    vm.grid.origin = Vec3(1, 2, 3);
    vm.voxels = {{0, 0, 0}, {3, 0, 0}};
    const auto r = structure_report(vm);
    CHECK(r.volume_components == 2);
    CHECK(r.surfaces.size() == 2);
    CHECK(r.euler == 4);

    const auto dir = std::filesystem::temp_directory_path() / "polydiff_test_polycube";
    std::filesystem::create_directories(dir);
    save_voxels(vm, dir / "v.txt");
    const auto back = load_voxels(dir / "v.txt");
    CHECK(back.voxels == vm.voxels);
    CHECK(back.grid.h == 0.5);
    CHECK(back.grid.origin == vm.grid.origin);
    save_boundary_obj(vm, dir / "v.obj");
    CHECK(std::filesystem::file_size(dir / "v.obj") > 0);
}

TEST_CASE("re-estimated normals recover axis labels") {
    const Mat cloud = boundary_cloud(geomio::ShapeSpec::l_shape(), 80, 8);
    const Mat re = reestimate_normals(cloud, 12);
    const auto a = label_points(cloud), b = label_points(re);
    Index agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
    CHECK(agree >= static_cast<Index>(0.9 * static_cast<double>(a.size())));
}
