// Serial reference kernels against their OpenMP counterparts. Prints one row
// per kernel: sizes, best-of-N seconds for each, speedup and the largest
// difference between the two results (which should be 0 or round-off).

#include "polydiff/cleanup/filter.hpp"
#include "polydiff/core/kernels.hpp"
#include "polydiff/geomio/sampling.hpp"
#include "polydiff/geomio/synth.hpp"
#include "polydiff/hexgen/hex_mesh.hpp"
#include "polydiff/hexgen/quality.hpp"
#include "polydiff/polycube/voxel_model.hpp"
#include "polydiff/registration/correspondence.hpp"
#include "polydiff/registration/cpd.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>

using namespace polydiff;

namespace {

Mat random_mat(Index r, Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Mat m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

double best_of(int reps, const std::function<void()>& fn) {
    double best = INFINITY;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

struct Row {
    std::string kernel, size;
    double serial, parallel, diff;
};

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

hexgen::HexMesh perturbed_block(int n, double amp) {
    polycube::VoxelModel vm;
    vm.grid.h = 1.0;
    for (long x = 0; x < n; ++x)
        for (long y = 0; y < n; ++y)
            for (long z = 0; z < n; ++z) vm.voxels.push_back({x, y, z});
    auto hm = hexgen::extract_hexes(vm, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-amp, amp);
    for (Index i = 0; i < hm.vertices.rows(); ++i)
        if (!hm.boundary[static_cast<std::size_t>(i)])
            for (int a = 0; a < 3; ++a) hm.vertices(i, a) += u(rng);
    return hm;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polydiff kernel benchmark: serial reference vs OpenMP"};
    int reps = 3, threads = 0;
    double scale = 1.0;
    std::string csv;
    app.add_option("--reps", reps, "repetitions per kernel (best is reported)")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--scale", scale, "multiplier on problem sizes")->check(CLI::PositiveNumber);
    app.add_option("--csv", csv, "also write the table as CSV");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);
    auto sz = [&](Index n) { return std::max<Index>(8, static_cast<Index>(static_cast<double>(n) * scale)); };

    std::vector<Row> rows;

    {
        const Index m = sz(8192);
        const Mat q = random_mat(m, 256, 1), k = random_mat(321, 256, 2), v = random_mat(321, 256, 3);
        Mat a, b;
        const double s = best_of(reps, [&] { core::kernels::attention_reference(q, k, v, 8, a); });
        const double p = best_of(reps, [&] { core::kernels::attention(q, k, v, 8, b); });
        rows.push_back({"attention", std::to_string(m) + "x321 d256 h8", s, p, (a - b).cwiseAbs().maxCoeff()});
    }
    {
        const Index n = sz(20000);
        const Mat c = random_mat(n, 6, 4);
        const double tau = cleanup::auto_tau(c);
        std::vector<Index> a, b;
        const double s = best_of(1, [&] { a = cleanup::connected_indices_reference(c, tau); });
        const double p = best_of(reps, [&] { b = cleanup::connected_indices(c, tau); });
        rows.push_back({"cleanup.connected (brute vs grid)", std::to_string(n) + " pts", s, p, a == b ? 0.0 : INFINITY});
        std::vector<double> da, db;
        const double s2 = best_of(1, [&] { da = cleanup::nearest_l1_reference(c); });
        const double p2 = best_of(reps, [&] { db = cleanup::nearest_l1(c); });
        rows.push_back({"cleanup.nearest_l1 (brute vs grid)", std::to_string(n) + " pts", s2, p2, max_diff(da, db)});
    }
    {
        const Index m = sz(4096), n = sz(4096);
        const Mat x = random_mat(n, 3, 5), y = random_mat(m, 3, 6);
        registration::CpdPosterior a, b;
        const double s = best_of(reps, [&] { a = registration::cpd_posterior_reference(x, y, 0.05, 0.1); });
        const double p = best_of(reps, [&] { b = registration::cpd_posterior(x, y, 0.05, 0.1); });
        const double d = std::max({(a.p1 - b.p1).cwiseAbs().maxCoeff(), (a.px - b.px).cwiseAbs().maxCoeff(),
                                   std::abs(a.nll - b.nll) / std::abs(a.nll)});
        rows.push_back({"cpd.e_step", std::to_string(m) + "x" + std::to_string(n), s, p, d});
    }
    {
        auto spec = geomio::ShapeSpec::l_shape();
        spec.subdivision = 4;
        const auto mesh = geomio::box_union_mesh(spec);
        const auto ori = geomio::poisson_disk_sample(mesh, sz(8192), 7);
        const Mat deformed = random_mat(sz(8192), 3, 8) * 0.5;
        registration::CorrespondenceMap a, b;
        const double s = best_of(1, [&] { a = registration::build_correspondence_reference(deformed, ori); });
        const double p = best_of(reps, [&] { b = registration::build_correspondence(deformed, ori); });
        rows.push_back({"correspondence (brute vs grid)", std::to_string(deformed.rows()) + "x" + std::to_string(ori.size()),
                        s, p, a.sample == b.sample ? max_diff(a.residual, b.residual) : INFINITY});
    }
    {
        const int n = std::max(2, static_cast<int>(24 * std::cbrt(scale)));
        const auto hm = perturbed_block(n, 0.2);
        hexgen::QualityReport a, b;
        const double s = best_of(reps, [&] { a = hexgen::quality_reference(hm); });
        const double p = best_of(reps, [&] { b = hexgen::quality(hm); });
        rows.push_back({"hex.quality", std::to_string(hm.cells.rows()) + " cells", s, p, max_diff(a.cell_jacobian, b.cell_jacobian)});
        hexgen::HexMesh sa, sb;
        const double s2 = best_of(reps, [&] { sa = hexgen::smooth_interior_reference(hm, 20, 0.5); });
        const double p2 = best_of(reps, [&] { sb = hexgen::smooth_interior(hm, 20, 0.5); });
        rows.push_back({"hex.smooth x20", std::to_string(hm.vertices.rows()) + " verts", s2, p2,
                        (sa.vertices - sb.vertices).cwiseAbs().maxCoeff()});
    }

    std::printf("threads %d\n%-36s %-22s %11s %11s %8s %10s\n", omp_get_max_threads(), "kernel", "size", "serial s",
                "parallel s", "speedup", "max diff");
    for (const auto& r : rows)
        std::printf("%-36s %-22s %11.4f %11.4f %8.2f %10.2e\n", r.kernel.c_str(), r.size.c_str(), r.serial, r.parallel,
                    r.serial / r.parallel, r.diff);
    if (!csv.empty()) {
        std::ofstream out(csv);
        out << "kernel,size,serial_s,parallel_s,speedup,max_diff\n";
        for (const auto& r : rows)
            out << r.kernel << ',' << r.size << ',' << r.serial << ',' << r.parallel << ',' << r.serial / r.parallel
                << ',' << r.diff << '\n';
    }
    return 0;
}
