#include "polydiff/dualnet/model.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/core/instrumentation.hpp"
#include "polydiff/core/kernels.hpp"
#include "polydiff/core/ops.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace polydiff::dualnet {

namespace ops = core;
namespace kernels = core::kernels;

namespace {

// Rows of x folded into the streaming read attention per pass.
constexpr Index kReadChunk = 2048;
// Rows of x per independent write-attention task.
constexpr Index kWriteChunk = 256;

void require_positive(long long v, const char* what) {
    if (v <= 0) throw ArgumentError(std::string("model config: ") + what + " must be positive");
}

}  // namespace

void EncoderConfig::validate() const {
    require_positive(blocks, "encoder.blocks");
    require_positive(layers_per_block, "encoder.layers_per_block");
    require_positive(heads, "encoder.heads");
    require_positive(d_model, "encoder.d_model");
    require_positive(latent_tokens, "encoder.latent_tokens");
    require_positive(input_channels, "encoder.input_channels");
    require_positive(ff_mult, "encoder.ff_mult");
    if (d_model % heads != 0) throw ArgumentError("model config: encoder.d_model not divisible by heads");
}

void DenoiserConfig::validate() const {
    require_positive(blocks, "denoiser.blocks");
    require_positive(layers_per_block, "denoiser.layers_per_block");
    require_positive(heads, "denoiser.heads");
    require_positive(d_model, "denoiser.d_model");
    require_positive(latent_tokens, "denoiser.latent_tokens");
    require_positive(input_channels, "denoiser.input_channels");
    require_positive(output_channels, "denoiser.output_channels");
    require_positive(ff_mult, "denoiser.ff_mult");
    if (d_model % heads != 0) throw ArgumentError("model config: denoiser.d_model not divisible by heads");
    if (d_model % 2 != 0) throw ArgumentError("model config: denoiser.d_model must be even for the time embedding");
}

void ModelConfig::validate() const {
    encoder.validate();
    denoiser.validate();
    if (encoder.d_model != denoiser.d_model)
        throw DimensionError("model config: encoder and denoiser widths differ (" +
                             std::to_string(encoder.d_model) + " vs " + std::to_string(denoiser.d_model) + ")");
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.encoder = {2, 2, 2, 16, 8, 3, 4};
    c.denoiser = {2, 2, 2, 16, 8, 6, 6, 4};
    return c;
}

TwoStreamBlock TwoStreamBlock::create(core::ParameterStore& store, const std::string& name, Index d,
                                      int heads, int layers, int ff_mult, core::Rng& rng) {
    TwoStreamBlock b;
    b.read_ln_latent = core::LayerNorm::create(store, name + ".read.ln_z", d, rng);
    b.read_ln_data = core::LayerNorm::create(store, name + ".read.ln_x", d, rng);
    b.read = core::AttentionProjections::create(store, name + ".read", d, heads, rng);
    for (int i = 0; i < layers; ++i)
        b.layers.push_back(
            core::TransformerLayer::create(store, name + ".layer" + std::to_string(i), d, heads, ff_mult, rng));
    b.write_ln_data = core::LayerNorm::create(store, name + ".write.ln_x", d, rng);
    b.write_ln_latent = core::LayerNorm::create(store, name + ".write.ln_z", d, rng);
    b.write = core::AttentionProjections::create(store, name + ".write", d, heads, rng, core::Init::Zeros);
    return b;
}

std::pair<Tensor, Tensor> TwoStreamBlock::forward(const Tensor& x, const Tensor& z) const {
    if (x.cols() != z.cols()) throw DimensionError("two-stream block: data and latent widths differ");
    Tensor zh = ops::add(z, read.forward(read_ln_latent.forward(z), read_ln_data.forward(x)));
    for (const auto& layer : layers) zh = layer.forward(zh);
    Tensor xn = ops::add(x, write.forward(write_ln_data.forward(x), write_ln_latent.forward(zh)));
    return {xn, zh};
}

void TwoStreamBlock::infer(Mat& x, Mat& z) const {
    if (x.rows() == 0) throw ArgumentError("two-stream block: empty data stream");
    if (x.cols() != z.cols()) throw DimensionError("two-stream block: data and latent widths differ");

    kernels::OnlineAttention reader(read.q.infer(read_ln_latent.infer(z)), read.heads);
    for (Index r0 = 0; r0 < x.rows(); r0 += kReadChunk) {
        const Index n = std::min(kReadChunk, x.rows() - r0);
        Mat xn = read_ln_data.infer(x.middleRows(r0, n));
        reader.absorb(read.k.infer(xn), read.v.infer(xn));
    }
    z += read.out.infer(reader.finish());

    for (const auto& layer : layers) layer.infer(z);

    const Mat zn = write_ln_latent.infer(z);
    const Mat keys = write.k.infer(zn);
    const Mat values = write.v.infer(zn);
    const Index chunks = (x.rows() + kWriteChunk - 1) / kWriteChunk;
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < chunks; ++c) {
        const Index r0 = c * kWriteChunk;
        const Index n = std::min(kWriteChunk, x.rows() - r0);
        Mat queries = write.q.infer(write_ln_data.infer(x.middleRows(r0, n)));
        Mat attended(n, x.cols());
        kernels::attention_block(queries, keys, values, write.heads, attended);
        x.middleRows(r0, n) += write.out.infer(attended);
    }
}

RowVec sinusoid(double t, Index d) {
    if (d <= 0 || d % 2 != 0) throw ArgumentError("sinusoid: width must be positive and even");
    RowVec e(d);
    const Index pairs = d / 2;
    for (Index i = 0; i < pairs; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(pairs));
        e(2 * i) = std::sin(t * freq);
        e(2 * i + 1) = std::cos(t * freq);
    }
    return e;
}

PointEmbedding PointEmbedding::create(core::ParameterStore& store, const std::string& name, Index in, Index d,
                                      core::Rng& rng) {
    return {core::Linear::create(store, name + ".fc1", in, d, rng),
            core::Linear::create(store, name + ".fc2", d, d, rng)};
}

Tensor PointEmbedding::forward(const Tensor& x) const { return fc2.forward(ops::gelu(fc1.forward(x))); }

Mat PointEmbedding::infer(const Eigen::Ref<const Mat>& x) const {
    Mat h = fc1.infer(x);
    kernels::gelu_inplace(h);
    return fc2.infer(h);
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    core::Rng rng(seed);
    const auto& e = cfg_.encoder;
    const auto& dn = cfg_.denoiser;

    enc_embed_ = PointEmbedding::create(store_, "enc.embed", e.input_channels, e.d_model, rng);
    enc_latent_init_ = store_.add("enc.z_init", {e.latent_tokens, e.d_model}, core::Init::Normal, rng);
    for (int b = 0; b < e.blocks; ++b)
        enc_blocks_.push_back(TwoStreamBlock::create(store_, "enc.block" + std::to_string(b), e.d_model, e.heads,
                                                     e.layers_per_block, e.ff_mult, rng));

    den_embed_ = PointEmbedding::create(store_, "den.embed", dn.input_channels, dn.d_model, rng);
    den_latent_init_ = store_.add("den.z_init", {dn.latent_tokens, dn.d_model}, core::Init::Normal, rng);
    time_affine_ = core::Linear::create(store_, "den.time", dn.d_model, dn.d_model, rng);
    for (int b = 0; b < dn.blocks; ++b)
        den_blocks_.push_back(TwoStreamBlock::create(store_, "den.block" + std::to_string(b), dn.d_model,
                                                     dn.heads, dn.layers_per_block, dn.ff_mult, rng));
    head_ln_ = core::LayerNorm::create(store_, "den.head.ln", dn.d_model, rng);
    head_ = core::Linear::create(store_, "den.head", dn.d_model, dn.output_channels, rng, core::Init::Zeros);
}

void Model::check_points(Index rows, Index cols, Index channels, const char* what) const {
    if (rows == 0) throw ArgumentError(std::string(what) + ": empty point cloud");
    if (cols != channels)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(channels) + " channels, got " +
                             std::to_string(cols));
}

void Model::check_code(Index rows, Index cols) const {
    if (rows != cfg_.encoder.latent_tokens || cols != cfg_.denoiser.d_model)
        throw DimensionError("denoise: condition code is " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", model expects " + std::to_string(cfg_.encoder.latent_tokens) + "x" +
                             std::to_string(cfg_.denoiser.d_model));
}

Mat Model::encode(const Mat& condition) const {
    check_points(condition.rows(), condition.cols(), cfg_.encoder.input_channels, "encode");
    Mat x = enc_embed_.infer(condition);
    Mat z = enc_latent_init_.to_matrix();
    for (const auto& block : enc_blocks_) block.infer(x, z);
    return z;
}

Tensor Model::encode_tape(const Tensor& condition) const {
    check_points(condition.rows(), condition.cols(), cfg_.encoder.input_channels, "encode");
    Tensor x = enc_embed_.forward(condition);
    Tensor z = enc_latent_init_;
    for (const auto& block : enc_blocks_) std::tie(x, z) = block.forward(x, z);
    return z;
}

Mat Model::embed_time(int t) const {
    if (t < 0) throw ArgumentError("embed_time: negative step");
    return time_affine_.infer(sinusoid(t, cfg_.denoiser.d_model));
}

Tensor Model::embed_time_tape(int t) const {
    if (t < 0) throw ArgumentError("embed_time: negative step");
    return time_affine_.forward(Tensor::from_matrix(sinusoid(t, cfg_.denoiser.d_model)));
}

Mat Model::denoise(const Mat& x_t, const Mat& z_c, int t) const {
    check_points(x_t.rows(), x_t.cols(), cfg_.denoiser.input_channels, "denoise");
    check_code(z_c.rows(), z_c.cols());
    if (t < 1) throw ArgumentError("denoise: step must be at least 1");
    core::instrumentation().denoiser_calls.fetch_add(1, std::memory_order_relaxed);

    const Index d = cfg_.denoiser.d_model;
    Mat z(cfg_.denoiser.latent_width(cfg_.encoder), d);
    z.topRows(z_c.rows()) = z_c;
    z.middleRows(z_c.rows(), cfg_.denoiser.latent_tokens) = den_latent_init_.matrix();
    z.bottomRows(1) = embed_time(t);

    Mat x = den_embed_.infer(x_t);
    for (const auto& block : den_blocks_) block.infer(x, z);
    return head_.infer(head_ln_.infer(x));
}

Tensor Model::denoise_tape(const Tensor& x_t, const Tensor& z_c, int t) const {
    check_points(x_t.rows(), x_t.cols(), cfg_.denoiser.input_channels, "denoise");
    check_code(z_c.rows(), z_c.cols());
    if (t < 1) throw ArgumentError("denoise: step must be at least 1");
    core::instrumentation().denoiser_calls.fetch_add(1, std::memory_order_relaxed);

    Tensor z = ops::concat_rows({z_c, den_latent_init_, embed_time_tape(t)});
    Tensor x = den_embed_.forward(x_t);
    for (const auto& block : den_blocks_) std::tie(x, z) = block.forward(x, z);
    return head_.forward(head_ln_.forward(x));
}

diffusion::NoisePredictor Model::predictor(Mat z_c) const {
    check_code(z_c.rows(), z_c.cols());
    return [this, code = std::move(z_c)](const Mat& x_t, int t) { return denoise(x_t, code, t); };
}

namespace {

template <class F>
void visit_fields(ModelConfig& c, F&& f) {
    f("encoder.blocks", c.encoder.blocks);
    f("encoder.layers_per_block", c.encoder.layers_per_block);
    f("encoder.heads", c.encoder.heads);
    f("encoder.d_model", c.encoder.d_model);
    f("encoder.latent_tokens", c.encoder.latent_tokens);
    f("encoder.input_channels", c.encoder.input_channels);
    f("encoder.ff_mult", c.encoder.ff_mult);
    f("denoiser.blocks", c.denoiser.blocks);
    f("denoiser.layers_per_block", c.denoiser.layers_per_block);
    f("denoiser.heads", c.denoiser.heads);
    f("denoiser.d_model", c.denoiser.d_model);
    f("denoiser.latent_tokens", c.denoiser.latent_tokens);
    f("denoiser.input_channels", c.denoiser.input_channels);
    f("denoiser.output_channels", c.denoiser.output_channels);
    f("denoiser.ff_mult", c.denoiser.ff_mult);
}

}  // namespace

void write_model_config(const ModelConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model config " + path.string());
    out << "# polydiff model config v1\n";
    ModelConfig copy = cfg;
    visit_fields(copy, [&](const char* key, auto& v) { out << key << ' ' << v << '\n'; });
    if (!out) throw DataError("failed writing model config " + path.string());
}

ModelConfig read_model_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model config " + path.string());
    std::map<std::string, long long> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        long long v = 0;
        if (!(ls >> key >> v)) throw ParseError("model config: malformed line", line_no);
        if (!values.emplace(key, v).second) throw ParseError("model config: duplicate key " + key, line_no);
    }
    ModelConfig cfg;
    std::size_t used = 0;
    visit_fields(cfg, [&](const char* key, auto& field) {
        auto it = values.find(key);
        if (it == values.end()) throw ParseError(std::string("model config: missing key ") + key);
        field = static_cast<std::remove_reference_t<decltype(field)>>(it->second);
        ++used;
    });
    if (used != values.size()) throw ParseError("model config: unknown keys present");
    cfg.validate();
    return cfg;
}

void Model::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_model_config(cfg_, dir / "model.cfg");
    core::save_parameters(store_, dir / "params.bin", dir / "params.manifest");
}

Model Model::load(const std::filesystem::path& dir) {
    Model m(read_model_config(dir / "model.cfg"), 0);
    core::load_parameters(m.store_, dir / "params.bin", dir / "params.manifest");
    return m;
}

}  // namespace polydiff::dualnet
