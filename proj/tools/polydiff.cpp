// Command-line front end: one subcommand per stage plus the end-to-end run.

#include "polydiff/core/error.hpp"
#include "polydiff/core/instrumentation.hpp"
#include "polydiff/diffusion/diffusion.hpp"
#include "polydiff/dualnet/train.hpp"
#include "polydiff/geomio/synth.hpp"
#include "polydiff/pipeline/runner.hpp"
#include "polydiff/pipeline/stages.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

using namespace polydiff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

geomio::ConditionCloud load_condition(const fs::path& pcd, const fs::path& prov) {
    geomio::ConditionCloud c;
    c.points = geomio::load_cloud(pcd);
    if (c.points.cols() != 3) throw DimensionError("condition cloud must have three channels");
    geomio::load_provenance(c, prov);
    return c;
}

fs::path sidecar(const fs::path& pcd) { return fs::path(pcd).replace_extension(".prov"); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

geomio::ShapeSpec preset(const std::string& name) {
    if (name == "cube") return geomio::ShapeSpec::cube();
    if (name == "bar") return geomio::ShapeSpec::bar2x1();
    if (name == "l") return geomio::ShapeSpec::l_shape();
    if (name == "frame") return geomio::ShapeSpec::frame();
    throw ArgumentError("unknown shape '" + name + "' (cube, bar, l, frame)");
}

// Pairs condition/<stem>.pcd with polycube/<stem>.pcd.
std::vector<dualnet::TrainPair> load_pairs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("data directory " + dir.string() + " does not exist");
    const fs::path cdir = dir / "condition", pdir = dir / "polycube";
    std::map<std::string, fs::path> cond, poly;
    for (const auto& [sub, table] : {std::pair{cdir, &cond}, std::pair{pdir, &poly}})
        if (fs::is_directory(sub))
            for (const auto& e : fs::directory_iterator(sub))
                if (e.path().extension() == ".pcd") (*table)[e.path().stem().string()] = e.path();
    std::vector<dualnet::TrainPair> pairs;
    for (const auto& [stem, path] : cond) {
        auto it = poly.find(stem);
        if (it == poly.end()) {
            std::fprintf(stderr, "warning: %s has no polycube partner, skipped\n", path.string().c_str());
            continue;
        }
        const Mat g = geomio::load_cloud(path), x = geomio::load_cloud(it->second);
        if (g.cols() != 3 || x.cols() != 6) {
            std::fprintf(stderr, "warning: pair %s has the wrong channel counts, skipped\n", stem.c_str());
            continue;
        }
        const auto norm = diffusion::CloudNormalization::fit(g);
        pairs.push_back({norm.apply(g), norm.apply(x)});
    }
    for (const auto& [stem, path] : poly)
        if (!cond.count(stem)) std::fprintf(stderr, "warning: %s has no condition partner, skipped\n", path.string().c_str());
    if (pairs.empty()) throw DataError("no usable training pairs in " + dir.string());
    return pairs;
}

std::vector<Index> parse_sweep(const std::string& spec) {
    const auto dots = spec.find("..");
    if (dots == std::string::npos) throw ArgumentError("--m-sweep expects LO..HI");
    Index lo = 0, hi = 0;
    try {
        lo = std::stol(spec.substr(0, dots));
        hi = std::stol(spec.substr(dots + 2));
    } catch (const std::exception&) {
        throw ArgumentError("--m-sweep expects integers LO..HI");
    }
    if (lo < 1 || hi < lo) throw ArgumentError("--m-sweep needs 1 <= LO <= HI");
    std::vector<Index> ms;
    for (Index m = lo; m <= hi; m *= 2) ms.push_back(m);
    return ms;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polycube generation and hexahedral meshing"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Cap on OpenMP worker threads")->check(CLI::PositiveNumber);
    app.set_version_flag("--version",
                         std::string("polydiff ") + POLYDIFF_VERSION +
                             "\nformats: pcd 1, prov 1, corr 1, voxels 1, model config 1, vtk legacy 3.0");

    std::optional<fs::path> config_path;
    auto with_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Pipeline config JSON (default: $POLYDIFF_CONFIG)");
    };
    std::optional<std::uint64_t> seed;
    auto with_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Random seed"); };

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic mesh, condition cloud and ground-truth polycube");
    std::string shape = "cube";
    std::optional<fs::path> spec_path;
    fs::path synth_out = ".";
    std::string stem = "shape";
    double warp = 0.0;
    std::vector<double> rotate;
    Index synth_points = 4096;
    synth->add_option("--shape", shape, "cube, bar, l or frame");
    synth->add_option("--spec", spec_path, "Shape description JSON (overrides --shape)");
    synth->add_option("--warp", warp, "Sinusoidal warp amplitude");
    synth->add_option("--rotate", rotate, "Rotation in degrees about X, Y, Z")->expected(3);
    synth->add_option("--points", synth_points, "Condition and polycube point count");
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--stem", stem, "File stem");
    with_seed(synth);
    with_config(synth);

    // sample-mesh
    auto* sample = app.add_subcommand("sample-mesh", "Poisson-disk sample a mesh into a condition cloud");
    fs::path mesh_in, sample_out = "condition.pcd";
    std::optional<Index> sample_n;
    sample->add_option("mesh", mesh_in, "Triangle mesh (OBJ)")->required();
    sample->add_option("--n", sample_n, "Point count");
    sample->add_option("--out", sample_out, "Output cloud; provenance goes next to it as .prov");
    with_seed(sample);
    with_config(sample);

    // train
    auto* train = app.add_subcommand("train", "Train the dual-latent model on paired clouds");
    fs::path data_dir, ckpt_out = "checkpoint", log_path = "train_log.csv";
    std::optional<int> steps;
    std::string loss = "hybrid";
    train->add_option("--data", data_dir, "Directory with condition/ and polycube/ clouds")->required();
    train->add_option("--steps", steps, "Optimizer steps");
    train->add_option("--out", ckpt_out, "Checkpoint directory");
    train->add_option("--log", log_path, "Per-step loss CSV");
    train->add_option("--loss", loss, "hybrid or l2")->check(CLI::IsMember({"hybrid", "l2"}));
    with_seed(train);
    with_config(train);

    // generate
    auto* gen = app.add_subcommand("generate", "Sample a polycube cloud from a checkpoint");
    fs::path ckpt, gen_cond, gen_out = "polycube.pcd";
    std::optional<Index> gen_m;
    std::optional<int> gen_stride;
    std::string sweep;
    fs::path sweep_csv = "m_sweep.csv";
    gen->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
    gen->add_option("--condition", gen_cond, "Condition cloud");
    gen->add_option("--m", gen_m, "Generated point count");
    gen->add_option("--stride", gen_stride, "Sampler stride");
    gen->add_option("--out", gen_out, "Output cloud");
    gen->add_option("--m-sweep", sweep, "Time one denoiser call per M = LO, 2 LO, ... HI instead of sampling");
    gen->add_option("--sweep-csv", sweep_csv, "Where the sweep CSV goes");
    with_seed(gen);
    with_config(gen);

    // cleanup
    auto* clean = app.add_subcommand("cleanup", "Two-pass outlier removal");
    fs::path clean_in, clean_out = "clean.pcd";
    std::optional<double> tau;
    std::optional<Index> prune_k;
    clean->add_option("cloud", clean_in, "Polycube cloud")->required();
    clean->add_option("--tau", tau, "L1 connectivity radius (default: automatic)");
    clean->add_option("--k", prune_k, "Points removed by the density pass");
    clean->add_option("--out", clean_out, "Output cloud");
    with_config(clean);

    // register
    auto* reg = app.add_subcommand("register", "Align a polycube cloud to the condition cloud");
    fs::path reg_in, reg_cond, reg_out = "deformed.pcd", corr_out = "correspondence.txt";
    reg->add_option("cloud", reg_in, "Cleaned polycube cloud")->required();
    reg->add_option("--condition", reg_cond, "Condition cloud with its .prov sidecar")->required();
    reg->add_option("--out", reg_out, "Deformed cloud");
    reg->add_option("--corr", corr_out, "Correspondence file");
    with_config(reg);

    // structure
    auto* st = app.add_subcommand("structure", "Recover the voxel model of a polycube cloud");
    fs::path st_in, st_out = "voxels.txt";
    std::optional<fs::path> st_obj;
    std::optional<double> st_h;
    st->add_option("cloud", st_in, "Cleaned polycube cloud")->required();
    st->add_option("--out", st_out, "Voxel file");
    st->add_option("--obj", st_obj, "Boundary shell OBJ");
    st->add_option("--unit", st_h, "Grid unit h");
    with_config(st);

    // hexmesh
    auto* hx = app.add_subcommand("hexmesh", "Hex mesh a voxel model onto the input surface");
    fs::path hx_vox, hx_poly, hx_corr, hx_mesh, hx_out = "hex.vtk";
    std::optional<fs::path> hx_quality, hx_shell;
    hx->add_option("voxels", hx_vox, "Voxel file")->required();
    hx->add_option("--polycube", hx_poly, "Cleaned polycube cloud")->required();
    hx->add_option("--corr", hx_corr, "Correspondence file")->required();
    hx->add_option("--mesh", hx_mesh, "Input surface (OBJ)")->required();
    hx->add_option("--out", hx_out, "Hex mesh VTK");
    hx->add_option("--quality", hx_quality, "Quality JSON");
    hx->add_option("--shell", hx_shell, "Boundary quad OBJ");
    with_config(hx);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run every stage on a mesh");
    fs::path pipe_mesh, pipe_out = "run";
    pipeline::RunOptions run_opt;
    pipe->add_option("mesh", pipe_mesh, "Input surface (OBJ)")->required();
    pipe->add_option("--out", pipe_out, "Artifact directory");
    pipe->add_flag("--oracle-polycube", run_opt.oracle_polycube, "Bypass the model with the ground-truth polycube");
    pipe->add_option("--polycube", run_opt.polycube, "Bypass the model with this six-channel cloud");
    with_seed(pipe);
    with_config(pipe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (threads > 0) omp_set_num_threads(threads);

    try {
        auto cfg = pipeline::resolve_config(config_path);
        if (seed) cfg.seed = *seed;

        if (*synth) {
            auto spec = spec_path ? geomio::ShapeSpec::from_json([&] {
                std::ifstream in(*spec_path);
                if (!in) throw DataError("cannot open " + spec_path->string());
                return std::string(std::istreambuf_iterator<char>(in), {});
            }())
                                  : preset(shape);
            if (!spec_path) {
                spec.warp_amplitude = warp;
                if (!rotate.empty()) spec.rotation_deg = {rotate[0], rotate[1], rotate[2]};
                spec.polycube_points = synth_points;
            }
            spec.validate();
            const auto pair = geomio::synth_pair(spec, cfg.seed);
            fs::create_directories(synth_out / "condition");
            fs::create_directories(synth_out / "polycube");
            geomio::save_mesh(pair.mesh, synth_out / (stem + ".obj"));
            cfg.sample.points = spec.polycube_points;
            const auto cond = pipeline::run_sample(pair.mesh, cfg);
            geomio::save_cloud(cond.points, synth_out / "condition" / (stem + ".pcd"));
            geomio::save_provenance(cond, synth_out / "condition" / (stem + ".prov"));
            geomio::save_cloud(pair.polycube.data, synth_out / "polycube" / (stem + ".pcd"));
            write_text(synth_out / (stem + ".json"), spec.to_json());
        } else if (*sample) {
            if (sample_n) cfg.sample.points = *sample_n;
            cfg.validate();
            const auto cond = pipeline::run_sample(geomio::load_mesh(mesh_in), cfg);
            geomio::save_cloud(cond.points, sample_out);
            geomio::save_provenance(cond, sidecar(sample_out));
        } else if (*train) {
            if (steps) cfg.train.total_steps = *steps;
            cfg.train.hybrid_loss = loss == "hybrid";
            cfg.train.seed = cfg.seed;
            cfg.validate();
            const auto pairs = load_pairs(data_dir);
            dualnet::Model model(cfg.model, cfg.seed);
            dualnet::Trainer trainer(
                model, diffusion::build_schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end),
                cfg.train);
            std::mt19937_64 pick_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
            std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
            std::ofstream log(log_path);
            if (!log) throw DataError("cannot write " + log_path.string());
            log << "step,loss,lr,w\n";
            log.precision(17);
            for (int k = 1; k <= cfg.train.total_steps; ++k) {
                std::vector<dualnet::TrainPair> batch;
                for (int b = 0; b < cfg.train.batch_size; ++b) batch.push_back(pairs[pick(pick_rng)]);
                const auto r = trainer.step(batch);
                log << k << ',' << r.loss << ',' << r.lr << ',' << r.w << '\n';
            }
            model.save(ckpt_out);
            write_text(ckpt_out / "config.json", cfg.to_json());
        } else if (*gen) {
            if (gen_m) cfg.generate.points = *gen_m;
            if (gen_stride) cfg.generate.stride = *gen_stride;
            cfg.validate();
            auto t0 = std::chrono::steady_clock::now();
            const auto model = dualnet::Model::load(ckpt);
            std::fprintf(stderr, "load %.3f s\n", seconds_since(t0));
            if (!sweep.empty()) {
                // One denoiser call per M on a fixed condition; the CSV feeds the
                // scaling fit.
                const Mat g = gen_cond.empty() ? diffusion::standard_normal(1024, 3, cfg.seed)
                                               : geomio::load_cloud(gen_cond);
                const Mat z = model.encode(diffusion::CloudNormalization::fit(g).apply(g));
                std::ofstream csv(sweep_csv);
                csv << "M,seconds,latent_tokens\n";
                for (Index m : parse_sweep(sweep)) {
                    const Mat x = diffusion::standard_normal(m, 6, cfg.seed + 2);
                    core::instrumentation().reset();
                    t0 = std::chrono::steady_clock::now();
                    (void)model.denoise(x, z, cfg.schedule.steps);
                    const double s = seconds_since(t0);
                    csv << m << ',' << s << ',' << core::instrumentation().self_attention_max_tokens.load() << '\n';
                    std::fprintf(stderr, "M=%ld %.4f s\n", static_cast<long>(m), s);
                }
            } else {
                if (gen_cond.empty()) throw ArgumentError("generate: --condition is required unless --m-sweep is given");
                const Mat g = geomio::load_cloud(gen_cond);
                core::instrumentation().reset();
                t0 = std::chrono::steady_clock::now();
                const Mat x = pipeline::run_generate(model, g, cfg);
                std::fprintf(stderr, "sample %.3f s (%llu denoiser calls)\n", seconds_since(t0),
                             static_cast<unsigned long long>(core::instrumentation().denoiser_calls.load()));
                geomio::save_cloud(x, gen_out);
            }
        } else if (*clean) {
            if (tau) cfg.cleanup.tau = *tau;
            if (prune_k) cfg.cleanup.prune_k = *prune_k;
            cfg.validate();
            cleanup::FilterReport rep;
            geomio::save_cloud(pipeline::run_cleanup(geomio::load_cloud(clean_in), cfg, &rep), clean_out);
            std::cout << json{{"input", rep.input}, {"tau", rep.tau}, {"removed_isolated", rep.removed_isolated},
                              {"removed_sparse", rep.removed_sparse}}
                             .dump(2)
                      << '\n';
        } else if (*reg) {
            cfg.validate();
            const auto r = pipeline::run_register(geomio::load_cloud(reg_in), load_condition(reg_cond, sidecar(reg_cond)), cfg);
            geomio::save_cloud(r.deformed, reg_out);
            registration::save_correspondence(r.correspondence, corr_out);
            std::cout << r.summary().dump(2) << '\n';
        } else if (*st) {
            if (st_h) cfg.polycube.h = *st_h;
            cfg.validate();
            const auto ex = pipeline::run_structure(geomio::load_cloud(st_in), cfg);
            polycube::save_voxels(ex.model, st_out);
            if (st_obj) polycube::save_boundary_obj(ex.model, *st_obj);
            std::cout << pipeline::structure_summary(ex.model, ex.fill.orientation_mismatches).dump(2) << '\n';
        } else if (*hx) {
            cfg.validate();
            const auto r = pipeline::run_hexmesh(polycube::load_voxels(hx_vox), geomio::load_cloud(hx_poly),
                                                 registration::load_correspondence(hx_corr), geomio::load_mesh(hx_mesh), cfg);
            hexgen::save_vtk(r.mesh, hx_out);
            if (hx_shell) hexgen::save_shell_obj(r.mesh, *hx_shell);
            if (hx_quality) write_text(*hx_quality, r.summary().dump(2));
            std::cout << r.summary().dump(2) << '\n';
        } else if (*pipe) {
            cfg.validate();
            const auto r = pipeline::run_pipeline(pipe_mesh, cfg, pipe_out, run_opt);
            std::cout << r.report["quality"].dump(2) << '\n';
            for (const auto& [stage, s] : r.timing.items()) std::fprintf(stderr, "%-10s %.3f s\n", stage.c_str(), s.get<double>());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
