#pragma once

#include "polydiff/dualnet/model.hpp"
#include "polydiff/geomio/cloud.hpp"
#include "polydiff/geomio/mesh.hpp"
#include "polydiff/hexgen/anchor.hpp"
#include "polydiff/hexgen/quality.hpp"
#include "polydiff/pipeline/config.hpp"
#include "polydiff/registration/correspondence.hpp"

#include <json.hpp>

namespace polydiff::pipeline {

// One function per stage. The standalone commands and the end-to-end runner
// both go through these, and every artifact between stages is written with
// round-trip precision, so re-running a stage from files repeats the
// pipeline bit for bit.

geomio::ConditionCloud run_sample(const geomio::TriMesh& mesh, const PipelineConfig& cfg);

/// Model route: normalize the condition, encode, run the strided sampler and
/// map the result back into the condition's frame.
Mat run_generate(const dualnet::Model& model, const Mat& condition, const PipelineConfig& cfg);

/// Ground-truth stand-in for an axis-aligned input: the condition samples
/// with their face normals.
Mat oracle_polycube(const geomio::TriMesh& mesh, const geomio::ConditionCloud& condition);

Mat run_cleanup(const Mat& polycube, const PipelineConfig& cfg, cleanup::FilterReport* report = nullptr);

struct Registration {
    registration::RigidResult rigid;
    int cpd_iterations = 0;
    bool cpd_converged = false;
    Mat deformed;  // polycube points moved onto the input surface
    registration::CorrespondenceMap correspondence;

    nlohmann::json summary() const;
};
Registration run_register(const Mat& polycube, const geomio::ConditionCloud& condition, const PipelineConfig& cfg);

polycube::Extraction run_structure(const Mat& polycube, const PipelineConfig& cfg);
/// Lattice frame, fill diagnostics and boundary topology of an extraction.
nlohmann::json structure_summary(const polycube::VoxelModel& vm, Index orientation_mismatches);

struct HexResult {
    hexgen::HexMesh mesh;
    hexgen::QualityReport quality;
    hexgen::AnchorReport anchors;
    bool pillow_applied = false;
    std::string pillow_error;

    /// Deterministic report: counts and quality figures, no timings.
    nlohmann::json summary() const;
};
HexResult run_hexmesh(const polycube::VoxelModel& vm, const Mat& polycube, const registration::CorrespondenceMap& corr,
                      const geomio::TriMesh& mesh, const PipelineConfig& cfg);

}  // namespace polydiff::pipeline
