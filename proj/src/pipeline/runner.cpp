#include "polydiff/pipeline/runner.hpp"

#include "polydiff/pipeline/stages.hpp"

#include <chrono>
#include <fstream>

namespace polydiff::pipeline {

using nlohmann::json;

namespace {

std::string describe(const std::string& stage, const Error& cause, const std::vector<std::filesystem::path>& done) {
    std::string msg = "stage " + stage + " failed: " + cause.what();
    if (!done.empty()) {
        msg += "; completed artifacts:";
        for (const auto& p : done) msg += " " + p.string();
    }
    return msg;
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

class StageClock {
public:
    template <class Fn>
    auto run(const char* stage, Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record(stage, t0);
            } else {
                auto r = fn();
                record(stage, t0);
                return r;
            }
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(stage, e, done);
        }
    }

    json timing = json::object();
    std::vector<std::filesystem::path> done;

private:
    void record(const char* stage, std::chrono::steady_clock::time_point t0) {
        timing[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace

StageError::StageError(std::string stage, const Error& cause, std::vector<std::filesystem::path> done)
    : Error(describe(stage, cause, done)), stage_(std::move(stage)), done_(std::move(done)), code_(cause.exit_code()) {}

RunResult run_pipeline(const std::filesystem::path& mesh_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out, const RunOptions& opt) {
    std::filesystem::create_directories(out);
    StageClock clock;
    json report;
    auto keep = [&](const std::filesystem::path& p) { clock.done.push_back(p); };

    std::ofstream(out / "config.json") << cfg.to_json() << '\n';
    keep(out / "config.json");

    const auto mesh = clock.run("load", [&] { return geomio::load_mesh(mesh_path); });

    const auto condition = clock.run("sample", [&] {
        auto c = run_sample(mesh, cfg);
        geomio::save_cloud(c.points, out / "condition.pcd");
        geomio::save_provenance(c, out / "condition.prov");
        return c;
    });
    keep(out / "condition.pcd");
    keep(out / "condition.prov");

    const Mat poly = clock.run("generate", [&] {
        Mat p;
        if (opt.polycube) {
            p = geomio::load_cloud(*opt.polycube);
            if (p.cols() != 6) throw DimensionError("polycube cloud must have six channels");
            report["generate"] = "file";
        } else if (opt.oracle_polycube) {
            p = oracle_polycube(mesh, condition);
            report["generate"] = "oracle";
        } else {
            if (cfg.generate.checkpoint.empty())
                throw ArgumentError("generate.checkpoint is empty; pass a checkpoint or use an oracle polycube");
            p = run_generate(dualnet::Model::load(cfg.generate.checkpoint), condition.points, cfg);
            report["generate"] = "model";
        }
        geomio::save_cloud(p, out / "polycube.pcd");
        return p;
    });
    keep(out / "polycube.pcd");

    const Mat clean = clock.run("cleanup", [&] {
        cleanup::FilterReport fr;
        Mat c = run_cleanup(poly, cfg, &fr);
        report["cleanup"] = {{"input", fr.input}, {"tau", fr.tau}, {"removed_isolated", fr.removed_isolated},
                             {"removed_sparse", fr.removed_sparse}};
        geomio::save_cloud(c, out / "clean.pcd");
        return c;
    });
    keep(out / "clean.pcd");

    const auto reg = clock.run("register", [&] {
        auto r = run_register(clean, condition, cfg);
        report["registration"] = r.summary();
        geomio::save_cloud(r.deformed, out / "deformed.pcd");
        registration::save_correspondence(r.correspondence, out / "correspondence.txt");
        return r;
    });
    keep(out / "deformed.pcd");
    keep(out / "correspondence.txt");

    clock.run("structure", [&] {
        const auto ex = run_structure(clean, cfg);
        report["structure"] = structure_summary(ex.model, ex.fill.orientation_mismatches);
        polycube::save_voxels(ex.model, out / "voxels.txt");
    });
    keep(out / "voxels.txt");

    clock.run("hexmesh", [&] {
        // The standalone command starts from the voxel file, so the pipeline
        // does too; the frame must round-trip exactly.
        const auto hex = run_hexmesh(polycube::load_voxels(out / "voxels.txt"), clean, reg.correspondence, mesh, cfg);
        report["quality"] = hex.summary();
        hexgen::save_vtk(hex.mesh, out / "hex.vtk");
        hexgen::save_shell_obj(hex.mesh, out / "shell.obj");
    });
    keep(out / "hex.vtk");
    keep(out / "shell.obj");

    write_json(report, out / "report.json");
    write_json(clock.timing, out / "timing.json");
    keep(out / "report.json");
    keep(out / "timing.json");
    return {report, clock.timing, clock.done};
}

}  // namespace polydiff::pipeline
