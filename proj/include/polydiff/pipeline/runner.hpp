#pragma once

#include "polydiff/core/error.hpp"
#include "polydiff/pipeline/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace polydiff::pipeline {

struct RunOptions {
    /// Skip the model and use the condition samples with their face normals.
    bool oracle_polycube = false;
    /// Skip the model and read this six-channel cloud instead.
    std::optional<std::filesystem::path> polycube;
};

/// A stage failed. Artifacts of the stages before it stay on disk; the exit
/// code is the one of the underlying error.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause, std::vector<std::filesystem::path> done);
    const std::string& stage() const noexcept { return stage_; }
    const std::vector<std::filesystem::path>& artifacts() const noexcept { return done_; }
    int exit_code() const noexcept override { return code_; }

private:
    std::string stage_;
    std::vector<std::filesystem::path> done_;
    int code_;
};

struct RunResult {
    nlohmann::json report;  // deterministic: configuration echo excluded, no timings
    nlohmann::json timing;  // seconds per stage
    std::vector<std::filesystem::path> artifacts;
};

/// Runs sample, generate, cleanup, register, structure and hexmesh on a mesh
/// and writes into `out`:
///   config.json, condition.pcd, condition.prov, polycube.pcd, clean.pcd,
///   deformed.pcd, correspondence.txt, voxels.txt, hex.vtk, shell.obj,
///   report.json and timing.json.
RunResult run_pipeline(const std::filesystem::path& mesh_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out, const RunOptions& opt = {});

}  // namespace polydiff::pipeline
