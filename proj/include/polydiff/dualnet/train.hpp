#pragma once

#include "polydiff/dualnet/model.hpp"

#include <cstdint>
#include <vector>

namespace polydiff::dualnet {

struct TrainConfig {
    int batch_size = 32;
    double lr = 1e-4;
    int total_steps = 1000;  // length of the cosine decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    bool hybrid_loss = true;
    double w_low = 0.4;   // w ~ U[w_low, w_high) once per batch
    double w_high = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One training example: condition g (N x 3) and target x0 (M x 6), both
/// already in the normalized frame of g.
struct TrainPair {
    Mat condition;
    Mat target;
};

struct StepReport {
    double loss = 0.0;
    double lr = 0.0;
    double w = 1.0;
};

/// AdamW over every parameter of a model with a cosine learning-rate decay.
/// All randomness (steps, noise, loss weight) comes from one generator seeded
/// by TrainConfig::seed, so identical states produce identical updates.
class Trainer {
public:
    Trainer(Model& model, diffusion::NoiseSchedule sched, TrainConfig cfg);

    /// lr at 1-based step k: 0.5 lr0 (1 + cos(pi (k-1)/(K-1))); 0 for k > K.
    double learning_rate(int k) const;

    StepReport step(const std::vector<TrainPair>& batch);
    /// One update with caller-chosen steps, noise and loss weight (one entry
    /// of `steps` and `noise` per batch element). `step` draws these and
    /// forwards here.
    StepReport step_with(const std::vector<TrainPair>& batch, const std::vector<int>& steps,
                         const std::vector<Mat>& noise, double w);
    /// Noise-prediction L2 on fixed (seeded) draws, no parameter change.
    double evaluate_l2(const std::vector<TrainPair>& pairs, std::uint64_t seed) const;

    int iteration() const { return iteration_; }

private:
    Model& model_;
    diffusion::NoiseSchedule sched_;
    TrainConfig cfg_;
    core::Rng rng_;
    int iteration_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace polydiff::dualnet
