#include "polydiff/pipeline/stages.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/diffusion/diffusion.hpp"

namespace polydiff::pipeline {

using nlohmann::json;

geomio::ConditionCloud run_sample(const geomio::TriMesh& mesh, const PipelineConfig& cfg) {
    return geomio::poisson_disk_sample(mesh, cfg.sample.points, cfg.seed, cfg.sample.poisson);
}

Mat run_generate(const dualnet::Model& model, const Mat& condition, const PipelineConfig& cfg) {
    if (condition.cols() != 3) throw DimensionError("generate: condition cloud must have three channels");
    const auto norm = diffusion::CloudNormalization::fit(condition);
    const Mat z = model.encode(norm.apply(condition));
    const auto sched = diffusion::build_schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const Mat x = diffusion::sample(model.predictor(z), sched, cfg.generate.points, cfg.generate.stride, cfg.seed + 1);
    return norm.invert(x);
}

Mat oracle_polycube(const geomio::TriMesh& mesh, const geomio::ConditionCloud& condition) {
    Mat out(condition.size(), 6);
    for (Index i = 0; i < condition.size(); ++i)
        out.row(i) << condition.points.row(i), mesh.face_normal(condition.face_id[static_cast<std::size_t>(i)]).transpose();
    return out;
}

Mat run_cleanup(const Mat& polycube, const PipelineConfig& cfg, cleanup::FilterReport* report) {
    cleanup::FilterConfig fc;
    fc.tau = cfg.cleanup.tau ? *cfg.cleanup.tau : cleanup::auto_tau(polycube);
    fc.prune_k = cfg.cleanup.prune_k ? *cfg.cleanup.prune_k : cleanup::FilterConfig::default_prune_k(polycube.rows());
    return cleanup::filter(polycube, fc, report);
}

json Registration::summary() const {
    const auto& t = rigid.transform;
    json r;
    r["scale"] = t.scale;
    r["rotation"] = {{t.rotation(0, 0), t.rotation(0, 1), t.rotation(0, 2)},
                     {t.rotation(1, 0), t.rotation(1, 1), t.rotation(1, 2)},
                     {t.rotation(2, 0), t.rotation(2, 1), t.rotation(2, 2)}};
    r["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
    r["rigid_rmse"] = rigid.rmse;
    r["icp_iterations"] = rigid.iterations;
    r["cpd_iterations"] = cpd_iterations;
    r["cpd_converged"] = cpd_converged;
    double worst = 0.0, sum = 0.0;
    for (double d : correspondence.residual) {
        worst = std::max(worst, d);
        sum += d;
    }
    r["residual_max"] = worst;
    r["residual_mean"] = correspondence.size() ? sum / static_cast<double>(correspondence.size()) : 0.0;
    return r;
}

Registration run_register(const Mat& polycube, const geomio::ConditionCloud& condition, const PipelineConfig& cfg) {
    if (polycube.rows() == 0) throw DataError("register: polycube cloud is empty");
    Registration out;
    const Mat xyz = polycube.leftCols(3);
    out.rigid = registration::rigid_align(xyz, condition.points, cfg.registration.rigid);
    const Mat moved = out.rigid.transform.apply(xyz);

    if (moved.rows() < 2) {
        out.deformed = moved;
    } else {
        const auto cpd = registration::cpd_nonrigid(moved, condition.points, cfg.registration.cpd);
        out.cpd_iterations = cpd.iterations;
        out.cpd_converged = cpd.converged;
        out.deformed = cpd.deformed;
    }
    out.correspondence = registration::build_correspondence(out.deformed, condition);
    return out;
}

polycube::Extraction run_structure(const Mat& polycube, const PipelineConfig& cfg) {
    return polycube::extract_structure(polycube, cfg.polycube);
}

json structure_summary(const polycube::VoxelModel& vm, Index orientation_mismatches) {
    const auto rep = polycube::structure_report(vm);
    json r;
    r["h"] = vm.grid.h;
    r["origin"] = {vm.grid.origin.x(), vm.grid.origin.y(), vm.grid.origin.z()};
    r["voxels"] = rep.voxels;
    r["boundary_faces"] = rep.boundary_faces;
    r["euler"] = rep.euler;
    r["watertight"] = rep.watertight;
    r["volume_components"] = rep.volume_components;
    r["corners"] = rep.corners.size();
    r["orientation_mismatches"] = orientation_mismatches;
    json surfaces = json::array();
    for (const auto& s : rep.surfaces) surfaces.push_back({{"faces", s.faces}, {"euler", s.euler}, {"genus", s.genus}});
    r["surfaces"] = surfaces;
    return r;
}

json HexResult::summary() const {
    json r;
    r["cells"] = mesh.cell_count();
    r["vertices"] = mesh.vertex_count();
    r["boundary_quads"] = hexgen::boundary_quads(mesh).size();
    r["j_min"] = quality.j_min;
    r["j_avg"] = quality.j_avg;
    r["inverted"] = quality.inverted;
    r["anchored"] = anchors.anchored;
    r["unanchored"] = anchors.unanchored;
    r["pillow_applied"] = pillow_applied;
    if (!pillow_error.empty()) r["pillow_error"] = pillow_error;
    return r;
}

HexResult run_hexmesh(const polycube::VoxelModel& vm, const Mat& polycube, const registration::CorrespondenceMap& corr,
                      const geomio::TriMesh& mesh, const PipelineConfig& cfg) {
    const auto& hc = cfg.hexgen;
    HexResult out;
    hexgen::AnchorOptions ao;
    ao.k = hc.anchor_k;
    ao.max_distance = hc.anchor_max_distance;
    hexgen::HexMesh hm =
        hexgen::anchor_boundary(hexgen::extract_hexes(vm, hc.subdivision), vm.grid.h, polycube, corr, mesh, ao, &out.anchors);
    if (hc.pillow) {
        auto p = hexgen::pillow_boundary(hm, hc.pillow_thickness);
        out.pillow_applied = p.applied;
        out.pillow_error = p.error;
        hm = std::move(p.mesh);
    }
    out.mesh = hexgen::smooth_interior(hm, hc.smooth_iters, hc.smooth_step);
    out.quality = hexgen::quality(out.mesh);
    return out;
}

}  // namespace polydiff::pipeline
