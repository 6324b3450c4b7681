#include "polydiff/core/nn.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/core/instrumentation.hpp"
#include "polydiff/core/kernels.hpp"
#include "polydiff/core/ops.hpp"

#include <cmath>

namespace polydiff::core {

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    kernels::validate_attention_shapes(q.rows(), q.cols(), k.rows(), k.cols(), v.rows(), v.cols(), heads);
    const bool record = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
    if (!record) {
        Mat out;
        kernels::attention(q.to_matrix(), k.to_matrix(), v.to_matrix(), heads, out);
        return Tensor::from_matrix(out);
    }

    const Index dh = q.cols() / heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> per_head;
    per_head.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor w = softmax_rows(scale(matmul(qh, transpose(kh)), s));
        if (instrumentation().attention_weights_hook) instrumentation().attention_weights_hook(w.to_matrix());
        per_head.push_back(matmul(w, vh));
    }
    return heads == 1 ? per_head.front() : concat_cols(per_head);
}

Linear Linear::create(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
                      Init weight_init) {
    Linear l;
    l.weight = store.add(name + ".w", {in, out}, weight_init, rng);
    l.bias = store.add(name + ".b", {out}, Init::Zeros, rng);
    return l;
}

Tensor Linear::forward(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

Mat Linear::infer(const Eigen::Ref<const Mat>& x) const {
    return kernels::affine(x, weight.matrix(), row_of(bias));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, Index width, Rng& rng) {
    LayerNorm ln;
    ln.gain = store.add(name + ".g", {width}, Init::Ones, rng);
    ln.bias = store.add(name + ".b", {width}, Init::Zeros, rng);
    return ln;
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias); }

Mat LayerNorm::infer(const Eigen::Ref<const Mat>& x) const {
    return kernels::layer_norm_rows(x, row_of(gain), row_of(bias));
}

FeedForward FeedForward::create(ParameterStore& store, const std::string& name, Index d, int hidden_mult,
                                Rng& rng, Init out_init) {
    if (hidden_mult <= 0) throw ArgumentError("feed_forward: hidden_mult must be positive");
    FeedForward ff;
    ff.fc1 = Linear::create(store, name + ".fc1", d, hidden_mult * d, rng);
    ff.fc2 = Linear::create(store, name + ".fc2", hidden_mult * d, d, rng, out_init);
    return ff;
}

Tensor FeedForward::forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }

Mat FeedForward::infer(const Eigen::Ref<const Mat>& x) const {
    Mat h = fc1.infer(x);
    kernels::gelu_inplace(h);
    return fc2.infer(h);
}

AttentionProjections AttentionProjections::create(ParameterStore& store, const std::string& name, Index d,
                                                  int heads, Rng& rng, Init out_init) {
    if (heads <= 0 || d % heads != 0)
        throw DimensionError("attention '" + name + "': width " + std::to_string(d) +
                             " not divisible by heads");
    AttentionProjections a;
    a.q = Linear::create(store, name + ".q", d, d, rng);
    a.k = Linear::create(store, name + ".k", d, d, rng);
    a.v = Linear::create(store, name + ".v", d, d, rng);
    a.out = Linear::create(store, name + ".o", d, d, rng, out_init);
    a.heads = heads;
    return a;
}

Tensor AttentionProjections::forward(const Tensor& query_tokens, const Tensor& context_tokens) const {
    Tensor attended =
        scaled_dot_attention(q.forward(query_tokens), k.forward(context_tokens), v.forward(context_tokens), heads);
    return out.forward(attended);
}

TransformerLayer TransformerLayer::create(ParameterStore& store, const std::string& name, Index d, int heads,
                                          int hidden_mult, Rng& rng) {
    TransformerLayer t;
    t.ln_attn = LayerNorm::create(store, name + ".ln1", d, rng);
    t.attn = AttentionProjections::create(store, name + ".attn", d, heads, rng);
    t.ln_ff = LayerNorm::create(store, name + ".ln2", d, rng);
    t.ff = FeedForward::create(store, name + ".ff", d, hidden_mult, rng);
    return t;
}

Tensor TransformerLayer::forward(const Tensor& z) const {
    instrumentation().record_self_attention(z.rows());
    Tensor zn = ln_attn.forward(z);
    Tensor z1 = add(z, attn.forward(zn, zn));
    return add(z1, ff.forward(ln_ff.forward(z1)));
}

void TransformerLayer::infer(Mat& z) const {
    instrumentation().record_self_attention(z.rows());
    Mat zn = ln_attn.infer(z);
    Mat attended;
    kernels::attention(attn.q.infer(zn), attn.k.infer(zn), attn.v.infer(zn), attn.heads, attended);
    z += attn.out.infer(attended);
    z += ff.infer(ln_ff.infer(z));
}

}  // namespace polydiff::core
