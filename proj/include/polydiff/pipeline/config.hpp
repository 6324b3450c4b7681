#pragma once

#include "polydiff/cleanup/filter.hpp"
#include "polydiff/dualnet/train.hpp"
#include "polydiff/geomio/sampling.hpp"
#include "polydiff/polycube/voxel_model.hpp"
#include "polydiff/registration/cpd.hpp"
#include "polydiff/registration/rigid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace polydiff::pipeline {

struct ScheduleSettings {
    int steps = 1024;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct SampleSettings {
    Index points = 4096;
    geomio::PoissonOptions poisson;
};

struct GenerateSettings {
    std::string checkpoint;  // model directory; unused with an oracle polycube
    Index points = 4096;
    int stride = 4;
};

struct CleanupSettings {
    std::optional<double> tau;     // default: auto_tau of the cloud
    std::optional<Index> prune_k;  // default: ceil(0.002 M)
};

struct RegisterSettings {
    registration::RigidOptions rigid;
    registration::CpdOptions cpd = [] {
        registration::CpdOptions o;
        o.rank = 64;  // the dense solve is cubic in the point count
        return o;
    }();
};

struct HexSettings {
    int subdivision = 1;
    int anchor_k = 8;
    double anchor_max_distance = 3.0;
    int smooth_iters = 20;
    double smooth_step = 0.5;
    bool pillow = false;
    double pillow_thickness = 0.2;
};

/// Every knob of every stage in one document. Missing keys keep their
/// defaults, unknown keys are rejected and each section is checked against
/// its module's preconditions when loaded.
struct PipelineConfig {
    std::uint64_t seed = 0;
    ScheduleSettings schedule;
    SampleSettings sample;
    GenerateSettings generate;
    CleanupSettings cleanup;
    RegisterSettings registration;
    polycube::ExtractOptions polycube;
    HexSettings hexgen;
    dualnet::ModelConfig model;
    dualnet::TrainConfig train;

    void validate() const;
    static PipelineConfig from_json(const std::string& text);
    static PipelineConfig load(const std::filesystem::path& path);
    /// Full effective configuration, defaults included.
    std::string to_json() const;
};

/// Explicit path if given, else $POLYDIFF_CONFIG if set, else defaults.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path);

}  // namespace polydiff::pipeline
