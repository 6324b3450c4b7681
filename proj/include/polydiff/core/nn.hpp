#pragma once

#include "polydiff/core/params.hpp"
#include "polydiff/core/tensor.hpp"

#include <string>

// Network building blocks. Every block offers two routes over the same
// parameters: `forward` records on the tape, `infer` runs the tape-free
// kernels.
namespace polydiff::core {

/// Multi-head scaled dot-product attention,
/// per head softmax(Q K^T / sqrt(d/heads)) V, heads concatenated.
/// With recording on it is composed from primitives so gradients flow to all
/// three inputs; otherwise it dispatches to the blocked kernel.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // out

    static Linear create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
                         Init weight_init = Init::Normal);
    Tensor forward(const Tensor& x) const;
    Mat infer(const Eigen::Ref<const Mat>& x) const;
};

struct LayerNorm {
    Tensor gain;
    Tensor bias;

    static LayerNorm create(ParameterStore& store, const std::string& name, Index width, Rng& rng);
    Tensor forward(const Tensor& x) const;
    Mat infer(const Eigen::Ref<const Mat>& x) const;
};

/// Two affine maps with GELU between; hidden width = hidden_mult * d.
struct FeedForward {
    Linear fc1;
    Linear fc2;

    static FeedForward create(ParameterStore& store, const std::string& name, Index d, int hidden_mult,
                              Rng& rng, Init out_init = Init::Normal);
    Tensor forward(const Tensor& x) const;
    Mat infer(const Eigen::Ref<const Mat>& x) const;
};

/// Projections around an attention call: queries from one token set,
/// keys/values from another (the same set for self-attention).
struct AttentionProjections {
    Linear q, k, v, out;
    int heads = 1;

    static AttentionProjections create(ParameterStore& store, const std::string& name, Index d, int heads,
                                       Rng& rng, Init out_init = Init::Normal);
    Tensor forward(const Tensor& query_tokens, const Tensor& context_tokens) const;
};

/// Pre-norm residual transformer layer on one token set:
/// z += SelfAttn(LN(z)); z += FF(LN(z)).
struct TransformerLayer {
    LayerNorm ln_attn;
    AttentionProjections attn;
    LayerNorm ln_ff;
    FeedForward ff;

    static TransformerLayer create(ParameterStore& store, const std::string& name, Index d, int heads,
                                   int hidden_mult, Rng& rng);
    Tensor forward(const Tensor& z) const;
    void infer(Mat& z) const;
};

/// Row-wise view of a rank-1 parameter.
inline Eigen::Map<const RowVec> row_of(const Tensor& t) { return {t.data().data(), t.size()}; }

}  // namespace polydiff::core
