#include "polydiff/pipeline/config.hpp"

#include "polydiff/core/error.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polydiff::pipeline {

using nlohmann::json;

namespace {

// Two-way binding between a JSON object and struct fields. Reading consumes
// keys so leftovers can be reported as unknown.
class Binder {
public:
    Binder(json* doc, std::string path, bool reading) : doc_(doc), path_(std::move(path)), reading_(reading) {}

    template <class T>
    void field(const char* key, T& v) {
        if (!reading_) {
            (*doc_)[key] = v;
            return;
        }
        auto it = doc_->find(key);
        if (it == doc_->end()) return;
        try {
            v = it->template get<T>();
        } catch (const json::exception&) {
            throw ArgumentError("config: " + where(key) + " has the wrong type");
        }
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!it->is_number_integer()) throw ArgumentError("config: " + where(key) + " must be an integer");
            if (std::is_unsigned_v<T> && !it->is_number_unsigned())
                throw ArgumentError("config: " + where(key) + " must be non-negative");
        }
        doc_->erase(it);
    }

    template <class T>
    void field(const char* key, std::optional<T>& v) {
        if (!reading_) {
            (*doc_)[key] = v ? json(*v) : json(nullptr);
            return;
        }
        auto it = doc_->find(key);
        if (it == doc_->end()) return;
        if (it->is_null()) {
            v.reset();
            doc_->erase(it);
            return;
        }
        T tmp{};
        field(key, tmp);
        v = tmp;
    }

    template <class Fn>
    void section(const char* key, Fn&& fn) {
        json sub = json::object();
        if (reading_) {
            auto it = doc_->find(key);
            if (it == doc_->end()) return;
            if (!it->is_object()) throw ArgumentError("config: " + where(key) + " must be an object");
            sub = *it;
            doc_->erase(it);
        }
        Binder inner(&sub, where(key), reading_);
        fn(inner);
        if (reading_)
            inner.finish();
        else
            (*doc_)[key] = sub;
    }

    void finish() const {
        if (!doc_->empty()) throw ArgumentError("config: unknown key " + where(doc_->begin().key().c_str()));
    }

private:
    std::string where(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

    json* doc_;
    std::string path_;
    bool reading_;
};

void bind(Binder& b, PipelineConfig& c) {
    b.field("seed", c.seed);
    b.section("schedule", [&](Binder& s) {
        s.field("steps", c.schedule.steps);
        s.field("beta_start", c.schedule.beta_start);
        s.field("beta_end", c.schedule.beta_end);
    });
    b.section("sample", [&](Binder& s) {
        s.field("points", c.sample.points);
        s.field("radius_factor", c.sample.poisson.radius_factor);
        s.field("candidate_factor", c.sample.poisson.candidate_factor);
    });
    b.section("generate", [&](Binder& s) {
        s.field("checkpoint", c.generate.checkpoint);
        s.field("points", c.generate.points);
        s.field("stride", c.generate.stride);
    });
    b.section("cleanup", [&](Binder& s) {
        s.field("tau", c.cleanup.tau);
        s.field("prune_k", c.cleanup.prune_k);
    });
    b.section("registration", [&](Binder& s) {
        s.field("icp_iters", c.registration.rigid.icp_iters);
        s.field("with_scale", c.registration.rigid.with_scale);
        s.field("pca_starts", c.registration.rigid.pca_starts);
        s.field("cpd_beta", c.registration.cpd.beta);
        s.field("cpd_lambda", c.registration.cpd.lambda);
        s.field("cpd_w", c.registration.cpd.w_out);
        s.field("cpd_max_iters", c.registration.cpd.max_iters);
        s.field("cpd_tol", c.registration.cpd.tol);
        s.field("cpd_rank", c.registration.cpd.rank);
    });
    b.section("polycube", [&](Binder& s) {
        s.field("h", c.polycube.h);
        s.field("gap", c.polycube.gap);
        s.field("min_cell_fraction", c.polycube.patches.min_cell_fraction);
        s.field("reestimate_normals", c.polycube.reestimate_normals);
        s.field("normal_k", c.polycube.normal_k);
    });
    b.section("hexgen", [&](Binder& s) {
        s.field("subdivision", c.hexgen.subdivision);
        s.field("anchor_k", c.hexgen.anchor_k);
        s.field("anchor_max_distance", c.hexgen.anchor_max_distance);
        s.field("smooth_iters", c.hexgen.smooth_iters);
        s.field("smooth_step", c.hexgen.smooth_step);
        s.field("pillow", c.hexgen.pillow);
        s.field("pillow_thickness", c.hexgen.pillow_thickness);
    });
    b.section("model", [&](Binder& s) {
        auto part = [](Binder& p, auto& m) {
            p.field("blocks", m.blocks);
            p.field("layers_per_block", m.layers_per_block);
            p.field("heads", m.heads);
            p.field("d_model", m.d_model);
            p.field("latent_tokens", m.latent_tokens);
            p.field("ff_mult", m.ff_mult);
        };
        s.section("encoder", [&](Binder& e) { part(e, c.model.encoder); });
        s.section("denoiser", [&](Binder& d) { part(d, c.model.denoiser); });
    });
    b.section("train", [&](Binder& s) {
        s.field("batch_size", c.train.batch_size);
        s.field("lr", c.train.lr);
        s.field("total_steps", c.train.total_steps);
        s.field("weight_decay", c.train.weight_decay);
        s.field("hybrid_loss", c.train.hybrid_loss);
        s.field("w_low", c.train.w_low);
        s.field("w_high", c.train.w_high);
    });
}

}  // namespace

void PipelineConfig::validate() const {
    if (schedule.steps < 1) throw ArgumentError("config: schedule.steps must be positive");
    if (!(schedule.beta_start > 0.0 && schedule.beta_start <= schedule.beta_end && schedule.beta_end < 1.0))
        throw ArgumentError("config: need 0 < beta_start <= beta_end < 1");
    if (sample.points < 1) throw ArgumentError("config: sample.points must be positive");
    if (!(sample.poisson.radius_factor >= 0.0) || !(sample.poisson.candidate_factor > 0.0))
        throw ArgumentError("config: sample factors must be positive");
    if (generate.points < 1) throw ArgumentError("config: generate.points must be positive");
    if (generate.stride < 1 || generate.stride > schedule.steps)
        throw ArgumentError("config: generate.stride must lie in [1, schedule.steps]");
    if (cleanup.tau && !(*cleanup.tau > 0.0)) throw ArgumentError("config: cleanup.tau must be positive");
    if (cleanup.prune_k && *cleanup.prune_k < 0) throw ArgumentError("config: cleanup.prune_k must be non-negative");
    if (registration.rigid.icp_iters < 0) throw ArgumentError("config: registration.icp_iters must be non-negative");
    registration.cpd.validate();
    if (polycube.h && !(*polycube.h > 0.0)) throw ArgumentError("config: polycube.h must be positive");
    if (polycube.gap && !(*polycube.gap > 0.0)) throw ArgumentError("config: polycube.gap must be positive");
    if (!(polycube.patches.min_cell_fraction >= 0.0)) throw ArgumentError("config: polycube.min_cell_fraction must be non-negative");
    if (polycube.normal_k < 3) throw ArgumentError("config: polycube.normal_k must be at least 3");
    if (hexgen.subdivision < 1) throw ArgumentError("config: hexgen.subdivision must be positive");
    if (hexgen.anchor_k < 1) throw ArgumentError("config: hexgen.anchor_k must be positive");
    if (!(hexgen.anchor_max_distance > 0.0)) throw ArgumentError("config: hexgen.anchor_max_distance must be positive");
    if (hexgen.smooth_iters < 0) throw ArgumentError("config: hexgen.smooth_iters must be non-negative");
    if (!(hexgen.smooth_step >= 0.0 && hexgen.smooth_step <= 1.0))
        throw ArgumentError("config: hexgen.smooth_step must lie in [0, 1]");
    if (!(hexgen.pillow_thickness > 0.0 && hexgen.pillow_thickness < 0.5))
        throw ArgumentError("config: hexgen.pillow_thickness must lie in (0, 0.5)");
    model.validate();
    train.validate();
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ArgumentError("config: top level must be an object");
    PipelineConfig c;
    Binder b(&doc, "", true);
    bind(b, c);
    b.finish();
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string PipelineConfig::to_json() const {
    json doc = json::object();
    PipelineConfig copy = *this;
    Binder b(&doc, "", false);
    bind(b, copy);
    return doc.dump(2);
}

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path) {
    if (path) return PipelineConfig::load(*path);
    if (const char* env = std::getenv("POLYDIFF_CONFIG"); env && *env) return PipelineConfig::load(env);
    return PipelineConfig{};
}

}  // namespace polydiff::pipeline
