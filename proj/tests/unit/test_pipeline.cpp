#include "polydiff/geomio/synth.hpp"
#include "polydiff/pipeline/runner.hpp"
#include "polydiff/pipeline/stages.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

using namespace polydiff;
using namespace polydiff::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polydiff_test_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config defaults survive a JSON round trip") {
    const PipelineConfig d;
    const auto text = d.to_json();
    const auto back = PipelineConfig::from_json(text);
    CHECK(back.to_json() == text);
    CHECK(back.schedule.steps == 1024);
    CHECK(back.generate.stride == 4);
    CHECK(back.registration.cpd.rank == 64);
    CHECK_FALSE(back.cleanup.tau.has_value());

    const auto partial = PipelineConfig::from_json(R"({"seed": 9, "hexgen": {"pillow": true}, "cleanup": {"tau": 0.1}})");
    CHECK(partial.seed == 9);
    CHECK(partial.hexgen.pillow);
    CHECK(partial.hexgen.smooth_iters == 20);
    REQUIRE(partial.cleanup.tau.has_value());
    CHECK(*partial.cleanup.tau == 0.1);
}

TEST_CASE("config rejects unknown keys, bad types and bad values") {
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"sed": 1})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"hexgen": {"pilow": true}})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"seed": "one"})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"seed": -1})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"generate": {"stride": 1.5}})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"generate": {"stride": 2000}})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"hexgen": {"pillow_thickness": 0.5}})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"hexgen": 3})"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json("[1, 2]"), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json("{\"seed\": "), ParseError);
    CHECK_THROWS_AS(PipelineConfig::load("/nonexistent/polydiff.json"), DataError);
}

TEST_CASE("config resolution order") {
    const auto dir = fresh_dir("resolve");
    std::ofstream(dir / "env.json") << R"({"seed": 5})";
    std::ofstream(dir / "explicit.json") << R"({"seed": 6})";
    ::unsetenv("POLYDIFF_CONFIG");
    CHECK(resolve_config(std::nullopt).seed == 0);
    ::setenv("POLYDIFF_CONFIG", (dir / "env.json").c_str(), 1);
    CHECK(resolve_config(std::nullopt).seed == 5);
    CHECK(resolve_config(dir / "explicit.json").seed == 6);
    ::unsetenv("POLYDIFF_CONFIG");
    fs::remove_all(dir);
}

TEST_CASE("stages re-run from pipeline artifacts reproduce them byte for byte") {
    const auto dir = fresh_dir("rerun");
    auto spec = geomio::ShapeSpec::l_shape();
    spec.warp_amplitude = 0.03;
    spec.rotation_deg = {0.0, 0.0, 15.0};
    spec.polycube_points = 1024;
    const auto pair = geomio::synth_pair(spec, 2);
    geomio::save_mesh(pair.mesh, dir / "shape.obj");
    geomio::save_cloud(pair.polycube.data, dir / "truth.pcd");

    PipelineConfig cfg;
    cfg.sample.points = 1024;
    cfg.seed = 3;
    RunOptions opt;
    opt.polycube = dir / "truth.pcd";
    const auto run = run_pipeline(dir / "shape.obj", cfg, dir / "out", opt);
    const fs::path out = dir / "out";
    CHECK(run.report["generate"] == "file");
    CHECK(run.report["quality"]["inverted"].get<Index>() == 0);
    CHECK(run.timing.contains("hexmesh"));
    CHECK_FALSE(run.report.contains("timing"));

    const auto mesh = geomio::load_mesh(dir / "shape.obj");
    const auto cond = run_sample(mesh, cfg);
    geomio::save_cloud(cond.points, dir / "condition.pcd");
    CHECK(slurp(dir / "condition.pcd") == slurp(out / "condition.pcd"));

    geomio::save_cloud(run_cleanup(geomio::load_cloud(out / "polycube.pcd"), cfg), dir / "clean.pcd");
    CHECK(slurp(dir / "clean.pcd") == slurp(out / "clean.pcd"));

    geomio::ConditionCloud loaded;
    loaded.points = geomio::load_cloud(out / "condition.pcd");
    geomio::load_provenance(loaded, out / "condition.prov");
    const Mat clean = geomio::load_cloud(out / "clean.pcd");
    const auto reg = run_register(clean, loaded, cfg);
    geomio::save_cloud(reg.deformed, dir / "deformed.pcd");
    registration::save_correspondence(reg.correspondence, dir / "correspondence.txt");
    CHECK(slurp(dir / "deformed.pcd") == slurp(out / "deformed.pcd"));
    CHECK(slurp(dir / "correspondence.txt") == slurp(out / "correspondence.txt"));

    polycube::save_voxels(run_structure(clean, cfg).model, dir / "voxels.txt");
    CHECK(slurp(dir / "voxels.txt") == slurp(out / "voxels.txt"));

    const auto hex = run_hexmesh(polycube::load_voxels(out / "voxels.txt"), clean,
                                 registration::load_correspondence(out / "correspondence.txt"), mesh, cfg);
    hexgen::save_vtk(hex.mesh, dir / "hex.vtk");
    CHECK(slurp(dir / "hex.vtk") == slurp(out / "hex.vtk"));
    fs::remove_all(dir);
}

TEST_CASE("a failing stage names itself and keeps earlier artifacts") {
    const auto dir = fresh_dir("failure");
    geomio::save_mesh(geomio::box_union_mesh(geomio::ShapeSpec::cube()), dir / "cube.obj");
    geomio::save_cloud(Mat::Zero(4, 3), dir / "three.pcd");
    PipelineConfig cfg;
    cfg.sample.points = 256;
    RunOptions opt;
    opt.polycube = dir / "three.pcd";
    try {
        run_pipeline(dir / "cube.obj", cfg, dir / "out", opt);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "generate");
        CHECK(e.exit_code() == DimensionError("x").exit_code());
        CHECK(e.artifacts().size() == 3);
        CHECK(fs::exists(dir / "out" / "condition.pcd"));
    }
    // No checkpoint and no oracle.
    CHECK_THROWS_AS(run_pipeline(dir / "cube.obj", cfg, dir / "out2"), StageError);
    CHECK_THROWS_AS(run_pipeline(dir / "missing.obj", cfg, dir / "out3"), StageError);
    fs::remove_all(dir);
}
