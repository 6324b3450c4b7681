#include "polydiff/dualnet/train.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/core/ops.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace polydiff::dualnet {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ArgumentError("train: batch_size must be positive");
    if (!(lr > 0.0)) throw ArgumentError("train: lr must be positive");
    if (total_steps < 1) throw ArgumentError("train: total_steps must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw ArgumentError("train: Adam betas must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ArgumentError("train: weight_decay must be non-negative");
    if (!(0.0 <= w_low && w_low <= w_high && w_high <= 1.0))
        throw ArgumentError("train: loss weight range must satisfy 0 <= low <= high <= 1");
}

Trainer::Trainer(Model& model, diffusion::NoiseSchedule sched, TrainConfig cfg)
    : model_(model), sched_(std::move(sched)), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    for (const auto& e : model_.parameters()) {
        m_.emplace_back(static_cast<std::size_t>(e.tensor.size()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(e.tensor.size()), 0.0);
    }
}

double Trainer::learning_rate(int k) const {
    const int total = cfg_.total_steps;
    if (k > total) return 0.0;
    if (total == 1) return cfg_.lr;
    const double frac = static_cast<double>(k - 1) / static_cast<double>(total - 1);
    return 0.5 * cfg_.lr * (1.0 + std::cos(std::numbers::pi * frac));
}

namespace {

Tensor hybrid_loss(const Tensor& pred, const Tensor& target, double w) {
    Tensor diff = core::sub(pred, target);
    Tensor l2 = core::mean(core::square(diff));
    if (w >= 1.0) return l2;
    Tensor l1 = core::mean(core::abs(diff));
    return core::add(core::scale(l2, w), core::scale(l1, 1.0 - w));
}

}  // namespace

StepReport Trainer::step(const std::vector<TrainPair>& batch) {
    if (batch.empty()) throw ArgumentError("train: empty batch");
    std::uniform_real_distribution<double> wdist(cfg_.w_low, cfg_.w_high);
    const double w = cfg_.hybrid_loss ? wdist(rng_) : 1.0;
    std::uniform_int_distribution<int> tdist(1, sched_.steps);
    std::normal_distribution<double> ndist(0.0, 1.0);
    std::vector<int> steps;
    std::vector<Mat> noise;
    for (const auto& pair : batch) {
        steps.push_back(tdist(rng_));
        Mat eps(pair.target.rows(), pair.target.cols());
        for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = ndist(rng_);
        noise.push_back(std::move(eps));
    }
    return step_with(batch, steps, noise, w);
}

StepReport Trainer::step_with(const std::vector<TrainPair>& batch, const std::vector<int>& steps,
                              const std::vector<Mat>& noise, double w) {
    if (batch.empty()) throw ArgumentError("train: empty batch");
    if (steps.size() != batch.size() || noise.size() != batch.size())
        throw DimensionError("train: one step and one noise draw needed per batch element");
    if (w < 0.0 || w > 1.0) throw ArgumentError("train: loss weight outside [0, 1]");
    StepReport rep;
    rep.w = w;

    model_.parameters().zero_grad();
    Tensor total;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& pair = batch[b];
        if (pair.condition.rows() == 0 || pair.target.rows() == 0) throw ArgumentError("train: empty cloud in batch");
        const Mat xt = diffusion::forward_sample(pair.target, steps[b], noise[b], sched_).xt;
        Tensor z_c = model_.encode_tape(Tensor::from_matrix(pair.condition));
        Tensor pred = model_.denoise_tape(Tensor::from_matrix(xt), z_c, steps[b]);
        Tensor loss = hybrid_loss(pred, Tensor::from_matrix(noise[b]), w);
        total = total.defined() ? core::add(total, loss) : loss;
    }
    total = core::scale(total, 1.0 / static_cast<double>(batch.size()));
    rep.loss = total.item();
    if (!std::isfinite(rep.loss))
        throw NumericError("train: non-finite loss at step " + std::to_string(iteration_ + 1));
    total.backward();

    ++iteration_;
    rep.lr = learning_rate(iteration_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, iteration_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, iteration_);
    std::size_t pi = 0;
    for (auto& e : model_.parameters()) {
        auto& m = m_[pi];
        auto& v = v_[pi];
        ++pi;
        auto p = e.tensor.mutable_data();
        if (!e.tensor.has_grad()) {
            // No gradient reached this entry; decay and moment bookkeeping still apply.
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] *= cfg_.beta1;
                v[i] *= cfg_.beta2;
                const double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
                p[i] -= rep.lr * (upd + cfg_.weight_decay * p[i]);
            }
            continue;
        }
        auto g = e.tensor.grad();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
            p[i] -= rep.lr * (upd + cfg_.weight_decay * p[i]);
        }
    }
    if (!model_.parameters().all_finite())
        throw NumericError("train: parameters became non-finite at step " + std::to_string(iteration_));
    return rep;
}

double Trainer::evaluate_l2(const std::vector<TrainPair>& pairs, std::uint64_t seed) const {
    if (pairs.empty()) throw ArgumentError("evaluate: no pairs");
    core::Rng rng(seed);
    std::uniform_int_distribution<int> tdist(1, sched_.steps);
    std::normal_distribution<double> ndist(0.0, 1.0);
    double acc = 0.0;
    for (const auto& pair : pairs) {
        const int t = tdist(rng);
        Mat eps(pair.target.rows(), pair.target.cols());
        for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = ndist(rng);
        const Mat xt = diffusion::forward_sample(pair.target, t, eps, sched_).xt;
        acc += diffusion::loss_l2(model_.denoise(xt, model_.encode(pair.condition), t), eps);
    }
    return acc / static_cast<double>(pairs.size());
}

}  // namespace polydiff::dualnet
