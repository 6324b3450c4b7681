#pragma once

#include "polydiff/core/nn.hpp"
#include "polydiff/core/params.hpp"
#include "polydiff/diffusion/diffusion.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace polydiff::dualnet {

using core::Tensor;

struct EncoderConfig {
    int blocks = 6;
    int layers_per_block = 6;
    int heads = 8;
    Index d_model = 256;
    Index latent_tokens = 64;
    Index input_channels = 3;
    int ff_mult = 4;

    void validate() const;
};

struct DenoiserConfig {
    int blocks = 6;
    int layers_per_block = 4;
    int heads = 8;
    Index d_model = 256;
    Index latent_tokens = 256;
    Index input_channels = 6;
    Index output_channels = 6;
    int ff_mult = 4;

    void validate() const;
    /// Tokens in every latent self-attention: condition + own latents + time.
    Index latent_width(const EncoderConfig& enc) const { return enc.latent_tokens + latent_tokens + 1; }
};

struct ModelConfig {
    EncoderConfig encoder;
    DenoiserConfig denoiser;

    /// d=16, 2 blocks, 2 layers per block, 2 heads, 8 latent tokens each.
    static ModelConfig tiny();
    void validate() const;
};

/// One read / process / write unit over a data stream x and a latent stream z:
///   z_hat = z + Attn(LN(z), LN(x))
///   z'    = z_hat after H pre-norm transformer layers
///   x'    = x + Attn(LN(x), LN(z'))
/// The write projection starts at zero, so a fresh block leaves x unchanged.
struct TwoStreamBlock {
    core::LayerNorm read_ln_latent;
    core::LayerNorm read_ln_data;
    core::AttentionProjections read;
    std::vector<core::TransformerLayer> layers;
    core::LayerNorm write_ln_data;
    core::LayerNorm write_ln_latent;
    core::AttentionProjections write;

    static TwoStreamBlock create(core::ParameterStore& store, const std::string& name, Index d, int heads,
                                 int layers, int ff_mult, core::Rng& rng);

    std::pair<Tensor, Tensor> forward(const Tensor& x, const Tensor& z) const;
    /// Tape-free route. The read attention streams over x in chunks; the
    /// write attention splits x into row blocks across threads.
    void infer(Mat& x, Mat& z) const;
};

/// Interleaved sin/cos pairs at frequencies 10000^(-i/(d/2)), i = 0..d/2-1.
RowVec sinusoid(double t, Index d);

/// Two affine maps with GELU between, used to lift raw point channels.
struct PointEmbedding {
    core::Linear fc1;
    core::Linear fc2;

    static PointEmbedding create(core::ParameterStore& store, const std::string& name, Index in, Index d,
                                 core::Rng& rng);
    Tensor forward(const Tensor& x) const;
    Mat infer(const Eigen::Ref<const Mat>& x) const;
};

class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);
    // Blocks hold handles into the parameter store, so copies would alias.
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ModelConfig& config() const { return cfg_; }
    core::ParameterStore& parameters() { return store_; }
    const core::ParameterStore& parameters() const { return store_; }

    /// Condition cloud N x 3 to the latent code z^c (latent_tokens x d).
    Mat encode(const Mat& condition) const;
    Tensor encode_tape(const Tensor& condition) const;

    /// Noise prediction for x_t (M x 6) at step t given z^c.
    Mat denoise(const Mat& x_t, const Mat& z_c, int t) const;
    Tensor denoise_tape(const Tensor& x_t, const Tensor& z_c, int t) const;

    /// Learned time token: sinusoid(t) through an affine map.
    Mat embed_time(int t) const;
    Tensor embed_time_tape(int t) const;

    /// Binds a condition code into a sampler callable.
    diffusion::NoisePredictor predictor(Mat z_c) const;

    void save(const std::filesystem::path& dir) const;
    static Model load(const std::filesystem::path& dir);

private:
    void check_code(Index rows, Index cols) const;
    void check_points(Index rows, Index cols, Index channels, const char* what) const;

    ModelConfig cfg_;
    core::ParameterStore store_;

    PointEmbedding enc_embed_;
    Tensor enc_latent_init_;
    std::vector<TwoStreamBlock> enc_blocks_;

    PointEmbedding den_embed_;
    Tensor den_latent_init_;
    core::Linear time_affine_;
    std::vector<TwoStreamBlock> den_blocks_;
    core::LayerNorm head_ln_;
    core::Linear head_;
};

ModelConfig read_model_config(const std::filesystem::path& path);
void write_model_config(const ModelConfig& cfg, const std::filesystem::path& path);

}  // namespace polydiff::dualnet
