// Acceptance checks. `polydiff_acceptance N...` runs the listed criteria
// (all when none are given) and prints one PASS/FAIL line for each.

#include "polydiff/cleanup/filter.hpp"
#include "polydiff/core/gradcheck.hpp"
#include "polydiff/core/instrumentation.hpp"
#include "polydiff/core/ops.hpp"
#include "polydiff/diffusion/diffusion.hpp"
#include "polydiff/dualnet/train.hpp"
#include "polydiff/geomio/sampling.hpp"
#include "polydiff/geomio/synth.hpp"
#include "polydiff/pipeline/runner.hpp"
#include "polydiff/registration/cpd.hpp"
#include "polydiff/registration/rigid.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>

using namespace polydiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool soft = false;  // reported, never fails the run
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Mat random_mat(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Mat m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polydiff_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

Outcome gradient() {
    constexpr double kTol = 1e-5;
    dualnet::Model m(dualnet::ModelConfig::tiny(), 31);
    core::Rng rng(32);
    m.parameters().randomize(rng, 0.3);
    const Mat g = random_mat(8, 3, 33, 0.5), x0 = random_mat(8, 6, 34, 0.5), eps = random_mat(8, 6, 35);
    const auto sched = diffusion::build_schedule(1024);
    const Mat xt = diffusion::forward_sample(x0, 300, eps, sched).xt;
    const core::Tensor target = core::Tensor::from_matrix(eps);
    auto loss = [&] {
        core::Tensor pred =
            m.denoise_tape(core::Tensor::from_matrix(xt), m.encode_tape(core::Tensor::from_matrix(g)), 300);
        return core::mean(core::square(core::sub(pred, target)));
    };
    const auto rep = core::finite_diff_check(loss, m.parameters(), 1e-4, kTol);
    const bool all = rep.checked_entries == m.parameters().scalar_count();
    return {rep.passed && all, fmt("max relative error %.3g over %ld entries (limit %.0e), worst %s[%ld]",
                                   rep.max_rel_error, static_cast<long>(rep.checked_entries), kTol,
                                   rep.worst_parameter.c_str(), static_cast<long>(rep.worst_index))};
}

Outcome permutation() {
    constexpr double kTol = 1e-6;
    dualnet::Model m(dualnet::ModelConfig::tiny(), 22);
    core::Rng rng(9);
    m.parameters().randomize(rng, 0.3);
    const Mat zc = m.encode(random_mat(32, 3, 1));
    const Mat xt = random_mat(64, 6, 2);
    const Mat eps = m.denoise(xt, zc, 500);
    std::mt19937_64 prng(10);
    double worst = 0.0;
    std::vector<Index> perm(64);
    for (int trial = 0; trial < 100; ++trial) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), prng);
        Mat px(64, 6), pe(64, 6);
        for (Index i = 0; i < 64; ++i) {
            px.row(i) = xt.row(perm[static_cast<std::size_t>(i)]);
            pe.row(i) = eps.row(perm[static_cast<std::size_t>(i)]);
        }
        worst = std::max(worst, (m.denoise(px, zc, 500) - pe).cwiseAbs().maxCoeff());
    }
    const bool nontrivial = eps.cwiseAbs().maxCoeff() > 1e-3;
    return {worst < kTol && nontrivial,
            fmt("max deviation %.3g over 100 permutations (limit %.0e), output scale %.3g", worst, kTol,
                eps.cwiseAbs().maxCoeff())};
}

Outcome scaling() {
    constexpr double kMinR2 = 0.98, kSlopeLo = 0.85, kSlopeHi = 1.15;
    const fs::path dir = scratch("scaling");
    {
        dualnet::Model fresh(dualnet::ModelConfig{}, 1);
        core::Rng rng(2);
        fresh.parameters().randomize(rng, 0.05);
        fresh.save(dir / "ckpt");
    }
    const auto m = dualnet::Model::load(dir / "ckpt");
    const Mat zc = m.encode(random_mat(4096, 3, 3));
    auto& inst = core::instrumentation();
    std::vector<double> ms, secs;
    std::int64_t lo_tokens = INT64_MAX, hi_tokens = 0;
    for (Index mm : {Index{1} << 10, Index{1} << 12, Index{1} << 14, Index{1} << 16, Index{1} << 17}) {
        const Mat x = random_mat(mm, 6, 4);
        double best = INFINITY;
        // Best of several calls at every size; the minimum is the least noisy estimate.
        for (int rep = 0; rep < (mm <= 16384 ? 5 : 2); ++rep) {
            inst.reset();
            const auto t0 = std::chrono::steady_clock::now();
            const Mat e = m.denoise(x, zc, 500);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            lo_tokens = std::min<std::int64_t>(lo_tokens, inst.self_attention_min_tokens);
            hi_tokens = std::max<std::int64_t>(hi_tokens, inst.self_attention_max_tokens);
        }
        ms.push_back(static_cast<double>(mm));
        secs.push_back(best);
    }
    fs::remove_all(dir);
    auto fit = [](const std::vector<double>& x, const std::vector<double>& y) {
        const double n = static_cast<double>(x.size());
        const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        const double a = sxy / sxx;
        return std::array<double, 3>{a, my - a * mx, sxy * sxy / (sxx * syy)};
    };
    const auto lin = fit(ms, secs);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        lx.push_back(std::log(ms[i]));
        ly.push_back(std::log(secs[i]));
    }
    const double slope = fit(lx, ly)[0];
    std::string timings;
    for (std::size_t i = 0; i < ms.size(); ++i) timings += fmt(" %.0f:%.3fs", ms[i], secs[i]);
    const bool ok = lo_tokens == 321 && hi_tokens == 321 && lin[2] >= kMinR2 && slope >= kSlopeLo && slope <= kSlopeHi;
    return {ok, fmt("tokens %ld..%ld (want 321), R^2 %.4f (min %.2f), a %.3g s/pt, b %.3g s, log-log slope %.3f "
                    "(want [%.2f, %.2f]);",
                    static_cast<long>(lo_tokens), static_cast<long>(hi_tokens), lin[2], kMinR2, lin[0], lin[1], slope,
                    kSlopeLo, kSlopeHi) +
                    timings};
}

Outcome step_count() {
    dualnet::Model m(dualnet::ModelConfig::tiny(), 3);
    const auto sched = diffusion::build_schedule(1024);
    auto& inst = core::instrumentation();
    inst.reset();
    const Mat out = diffusion::sample(m.predictor(m.encode(random_mat(16, 3, 4))), sched, 32, 4, 5);
    const auto calls = inst.denoiser_calls.load();
    return {calls == 256 && out.rows() == 32,
            fmt("T=1024 stride 4: %llu denoiser calls (want 256)", static_cast<unsigned long long>(calls))};
}

Outcome forward_stats() {
    const auto s = diffusion::build_schedule(1024);
    const Index draws = 10000;
    const double x0 = 0.7;
    bool ok = true;
    std::string detail;
    for (int t : {1, 512, 1024}) {
        const Mat eps = diffusion::standard_normal(draws, 1, 700 + static_cast<std::uint64_t>(t));
        const auto smp = diffusion::forward_sample(Mat::Constant(draws, 1, x0), t, eps, s);
        const double mean = smp.xt.mean();
        const double var = (smp.xt.array() - mean).square().sum() / static_cast<double>(draws - 1);
        // Independent of the library's table: the product of (1 - beta_i) for
        // the linear ramp, accumulated here from scratch.
        double abar = 1.0;
        for (int i = 1; i <= t; ++i) abar *= 1.0 - (1e-4 + (0.02 - 1e-4) * (i - 1) / 1023.0);
        const double se = std::sqrt((1.0 - abar) / static_cast<double>(draws));
        const double z = std::abs(mean - std::sqrt(abar) * x0) / se;
        const double rel = std::abs(var / (1.0 - abar) - 1.0);
        ok = ok && z < 4.0 && rel < 0.05;
        detail += fmt(" t=%d: mean off by %.2f SE (max 4), variance off by %.2f%% (max 5%%);", t, z, 100.0 * rel);
    }
    return {ok, detail};
}

// Random union of one to three boxes, warped and rotated.
geomio::ShapeSpec random_shape(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 3), pos(0, 1), size(1, 2);
    std::uniform_real_distribution<double> amp(0.0, 0.04), ang(-30.0, 30.0);
    geomio::ShapeSpec s;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        geomio::BoxSpec b;
        b.origin = {pos(rng), pos(rng), i == 0 ? 0 : pos(rng)};
        b.size = {size(rng), size(rng), size(rng)};
        s.boxes.push_back(b);
    }
    s.warp_amplitude = amp(rng);
    s.rotation_deg = {ang(rng), ang(rng), ang(rng)};
    s.subdivision = 1;
    return s;
}

Outcome hybrid_loss() {
    const Index points = 128;
    const int steps = 2000, batch = 8;
    std::mt19937_64 rng(2024);
    auto make = [&](int count) {
        std::vector<dualnet::TrainPair> out;
        while (static_cast<int>(out.size()) < count) {
            auto spec = random_shape(rng);
            spec.polycube_points = points;
            const auto pair = geomio::synth_pair(spec, rng());
            const Mat g = geomio::poisson_disk_sample(pair.mesh, points, rng()).points;
            const auto norm = diffusion::CloudNormalization::fit(g);
            out.push_back({norm.apply(g), norm.apply(pair.polycube.data)});
        }
        return out;
    };
    const auto train = make(64), held = make(16);
    const auto sched = diffusion::build_schedule(1024);

    auto run = [&](bool hybrid, std::uint64_t seed) {
        dualnet::Model m(dualnet::ModelConfig::tiny(), seed);
        dualnet::TrainConfig tc;
        tc.batch_size = batch;
        tc.lr = 1e-3;
        tc.total_steps = steps;
        tc.hybrid_loss = hybrid;
        tc.seed = seed;
        dualnet::Trainer tr(m, sched, tc);
        std::mt19937_64 pick_rng(seed + 1);
        std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
        for (int k = 0; k < steps; ++k) {
            std::vector<dualnet::TrainPair> b;
            for (int i = 0; i < batch; ++i) b.push_back(train[pick(pick_rng)]);
            tr.step(b);
        }
        return tr.evaluate_l2(held, 99);
    };
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double h = run(true, seed), l = run(false, seed);
        wins += h < l;
        detail += fmt(" seed %llu hybrid %.4f l2 %.4f;", static_cast<unsigned long long>(seed), h, l);
    }
    return {wins >= 3, fmt("hybrid lower in %d/5 seeds (want >= 3):", wins) + detail, true};
}

// Independent O(n^2) ranking for the density pass.
std::vector<Index> dense_oracle(const Mat& c, Index k) {
    const Index n = c.rows();
    std::vector<double> d(static_cast<std::size_t>(n), INFINITY);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) d[static_cast<std::size_t>(i)] = std::min(d[static_cast<std::size_t>(i)], (c.row(i).head<3>() - c.row(j).head<3>()).cwiseAbs().sum());
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        const double da = d[static_cast<std::size_t>(a)], db = d[static_cast<std::size_t>(b)];
        return da > db || (da == db && a > b);
    });
    std::vector<Index> keep(order.begin() + k, order.end());
    std::sort(keep.begin(), keep.end());
    return keep;
}

std::vector<Index> connected_oracle(const Mat& c, double tau) {
    std::vector<Index> keep;
    for (Index i = 0; i < c.rows(); ++i)
        for (Index j = 0; j < c.rows(); ++j)
            if (i != j && (c.row(i).head<3>() - c.row(j).head<3>()).cwiseAbs().sum() < tau) {
                keep.push_back(i);
                break;
            }
    return keep;
}

Outcome cleanup_oracle() {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<Index> size(2, 512);
    std::uniform_int_distribution<int> lattice(0, 15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int mismatches = 0, ties = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = size(rng);
        Mat c(n, 6);
        // Half of the clouds sit on a coarse lattice so that equal distances,
        // distances exactly at tau and duplicate points all occur.
        const bool snapped = trial % 2 == 0;
        for (Index i = 0; i < n; ++i)
            for (int a = 0; a < 6; ++a) c(i, a) = snapped ? lattice(rng) / 8.0 : u(rng);
        const double tau = snapped ? (1 + lattice(rng) % 4) / 8.0 : 0.02 + 0.2 * u(rng);
        const Index k = std::min<Index>(n - 1, static_cast<Index>(u(rng) * 0.2 * static_cast<double>(n)));

        const auto p1 = cleanup::connected_indices(c, tau);
        if (p1 != cleanup::connected_indices_reference(c, tau) || p1 != connected_oracle(c, tau)) ++mismatches;
        const Mat survivors = cleanup::select_rows(c, p1);
        if (survivors.rows() >= 2) {
            const auto nn = cleanup::nearest_l1(survivors), nn_ref = cleanup::nearest_l1_reference(survivors);
            if (std::memcmp(nn.data(), nn_ref.data(), nn.size() * sizeof(double)) != 0) ++mismatches;
            std::vector<double> sorted = nn;
            std::sort(sorted.begin(), sorted.end());
            ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
            const Index kk = std::min<Index>(k, survivors.rows() - 1);
            if (cleanup::dense_indices(survivors, kk) != dense_oracle(survivors, kk)) ++mismatches;
            cleanup::FilterConfig fc;
            fc.tau = tau;
            fc.prune_k = kk;
            const Mat f = cleanup::filter(c, fc);
            const Mat expect = cleanup::select_rows(survivors, dense_oracle(survivors, kk));
            if (f.rows() != expect.rows() || std::memcmp(f.data(), expect.data(), f.size() * sizeof(double)) != 0)
                ++mismatches;
        }
    }
    return {mismatches == 0, fmt("200 clouds, %d mismatches against brute force (want 0), %d clouds with tied distances",
                                 mismatches, ties)};
}

Outcome registration_recovery() {
    constexpr double kRmse = 1e-6, kReduction = 0.90;
    auto spec = geomio::ShapeSpec::l_shape();
    const auto mesh = geomio::box_union_mesh(spec);
    const Mat src = geomio::area_sample(mesh, 600, 1).points;

    // Known similarity, noiseless.
    const Mat3 rot = (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized())).toRotationMatrix();
    registration::SimilarityTransform truth;
    truth.scale = 1.7;
    truth.rotation = rot;
    truth.translation = Vec3(0.3, -2.0, 5.0);
    const Mat dst = truth.apply(src);
    const auto rr = registration::rigid_align(src, dst);
    const double rmse = std::sqrt((rr.transform.apply(src) - dst).rowwise().squaredNorm().mean());

    // CPD on warped copies; reduction of the mean nearest-neighbour distance.
    auto mean_nn = [](const Mat& a, const Mat& b) {
        double s = 0.0;
        for (Index i = 0; i < a.rows(); ++i) s += std::sqrt((b.rowwise() - a.row(i)).rowwise().squaredNorm().minCoeff());
        return s / static_cast<double>(a.rows());
    };
    double worst_reduction = 1.0, worst_rise = 0.0;
    std::string detail;
    for (double amp : {0.03, 0.06}) {
        for (double freq : {0.25, 0.5}) {
            auto warped = spec;
            warped.warp_amplitude = amp;
            warped.warp_frequency = freq;
            Mat target(src.rows(), 3);
            for (Index i = 0; i < src.rows(); ++i)
                target.row(i) = geomio::apply_deformation(warped, src.row(i).transpose()).transpose();
            // Exact kernel and the rank-64 approximation the pipeline uses.
            for (Index rank : {0, 64}) {
                registration::CpdOptions opt;
                opt.rank = rank;
                const auto cpd = registration::cpd_nonrigid(src, target, opt);
                const double before = mean_nn(src, target), after = mean_nn(cpd.deformed, target);
                worst_reduction = std::min(worst_reduction, 1.0 - after / before);
                for (std::size_t i = 1; i < cpd.objective.size(); ++i)
                    worst_rise = std::max(worst_rise, cpd.objective[i] - cpd.objective[i - 1]);
                detail += fmt(" A=%.2f f=%.2f rank %ld: %.4f -> %.2e;", amp, freq, static_cast<long>(rank), before, after);
            }
        }
    }
    // Absolute slack per EM step.
    constexpr double kRise = 1e-8;
    const bool ok = rmse < kRmse && worst_reduction >= kReduction && worst_rise <= kRise;
    return {ok, fmt("similarity RMSE %.2e (limit %.0e); CPD NN reduction >= %.4f (min %.2f); largest objective "
                    "rise %.2e (limit %.0e);",
                    rmse, kRmse, worst_reduction, kReduction, worst_rise, kRise) +
                    detail};
}

Outcome topology() {
    struct Case {
        const char* name;
        geomio::ShapeSpec spec;
        Index euler;
    };
    const Case cases[] = {{"cube", geomio::ShapeSpec::cube(), 2},
                          {"l-shape", geomio::ShapeSpec::l_shape(), 2},
                          {"frame", geomio::ShapeSpec::frame(), 0}};
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        auto spec = c.spec;
        spec.polycube_points = 4096;
        const auto pair = geomio::synth_pair(spec, 5);
        const auto ex = polycube::extract_structure(pair.polycube.data);
        const auto rep = polycube::structure_report(ex.model);
        const bool good = rep.euler == c.euler && rep.watertight && rep.volume_components == 1;
        ok = ok && good;
        detail += fmt(" %s: chi %ld (want %ld), watertight %s, %ld voxels;", c.name, static_cast<long>(rep.euler),
                      static_cast<long>(c.euler), rep.watertight ? "yes" : "no", static_cast<long>(rep.voxels));
    }
    return {ok, detail};
}

pipeline::PipelineConfig small_config() {
    pipeline::PipelineConfig cfg;
    cfg.sample.points = 2048;
    return cfg;
}

Outcome identity_pipeline() {
    const fs::path dir = scratch("identity");
    auto write_shape = [&](const geomio::ShapeSpec& s, const std::string& name) {
        geomio::save_mesh(geomio::box_union_mesh(s), dir / (name + ".obj"));
        return dir / (name + ".obj");
    };
    pipeline::RunOptions oracle;
    oracle.oracle_polycube = true;

    auto cfg = small_config();
    const auto cube = pipeline::run_pipeline(write_shape(geomio::ShapeSpec::cube(), "cube"), cfg, dir / "cube", oracle);
    const auto& q1 = cube.report["quality"];
    const double j1 = q1["j_min"].get<double>();
    const bool cube_ok = std::abs(j1 - 1.0) <= 1e-9 && q1["cells"].get<Index>() >= 1;

    cfg.hexgen.pillow = true;
    const auto pil = pipeline::run_pipeline(dir / "cube.obj", cfg, dir / "cube_pillow", oracle);
    const auto& q2 = pil.report["quality"];
    const bool pil_ok = q2["pillow_applied"].get<bool>() && q2["cells"].get<Index>() == 7 && q2["j_min"].get<double>() > 0.0;

    cfg = small_config();
    cfg.hexgen.subdivision = 2;
    cfg.hexgen.smooth_iters = 20;
    const auto l = pipeline::run_pipeline(write_shape(geomio::ShapeSpec::l_shape(), "l"), cfg, dir / "l", oracle);
    const auto& q3 = l.report["quality"];
    const bool l_ok = q3["j_min"].get<double>() > 0.0 && q3["inverted"].get<Index>() == 0;
    fs::remove_all(dir);
    return {cube_ok && pil_ok && l_ok,
            fmt("cube: %ld cells, |J_min - 1| = %.2e (limit 1e-9); pillowed cube: %ld cells (want 7), J_min %.4f; "
                "L-shape s=2 smoothed: %ld cells, J_min %.4f, %ld inverted",
                static_cast<long>(q1["cells"].get<Index>()), std::abs(j1 - 1.0),
                static_cast<long>(q2["cells"].get<Index>()), q2["j_min"].get<double>(),
                static_cast<long>(q3["cells"].get<Index>()), q3["j_min"].get<double>(),
                static_cast<long>(q3["inverted"].get<Index>()))};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    const fs::path dir = scratch("determinism");
    auto spec = geomio::ShapeSpec::l_shape();
    spec.warp_amplitude = 0.04;
    spec.rotation_deg = {10.0, -20.0, 30.0};
    spec.polycube_points = 2048;
    const auto pair = geomio::synth_pair(spec, 4);
    geomio::save_mesh(pair.mesh, dir / "shape.obj");
    geomio::save_cloud(pair.polycube.data, dir / "truth.pcd");
    auto cfg = small_config();
    cfg.seed = 11;
    cfg.hexgen.subdivision = 2;
    pipeline::RunOptions opt;
    opt.polycube = dir / "truth.pcd";
    const auto a = pipeline::run_pipeline(dir / "shape.obj", cfg, dir / "a", opt);
    pipeline::run_pipeline(dir / "shape.obj", cfg, dir / "b", opt);
    int compared = 0, differ = 0;
    std::string which;
    for (const auto& p : a.artifacts) {
        const auto name = p.filename().string();
        if (name == "timing.json") continue;  // wall-clock, deliberately outside the report
        ++compared;
        if (slurp(dir / "a" / name) != slurp(dir / "b" / name)) {
            ++differ;
            which += " " + name;
        }
    }
    const double jmin = a.report["quality"]["j_min"].get<double>();
    fs::remove_all(dir);
    return {differ == 0 && compared >= 10,
            fmt("%d artifacts compared byte for byte, %d differ%s; warped L-shape J_min %.4f", compared, differ,
                which.c_str(), jmin)};
}

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {2, "gradient correctness", 120, gradient},
        {3, "permutation equivariance", 60, permutation},
        {4, "resolution decoupling and linear scaling", 900, scaling},
        {5, "sampler step count", 60, step_count},
        {6, "forward-process statistics", 60, forward_stats},
        {7, "hybrid-loss comparison", 1800, hybrid_loss},
        {8, "outlier-removal oracle equivalence", 60, cleanup_oracle},
        {9, "registration recovery", 300, registration_recovery},
        {10, "topology correctness", 60, topology},
        {11, "identity hex pipeline", 120, identity_pipeline},
        {12, "end-to-end determinism", 600, determinism},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        const char* verdict = o.soft ? (pass ? "PASS (soft)" : "FAIL (soft)") : (pass ? "PASS" : "FAIL");
        std::printf("criterion %d %s: %s: %s [%.1f s, budget %.0f s%s]\n", c.id, verdict, c.title, o.detail.c_str(),
                    secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
        if (!pass && !o.soft) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
