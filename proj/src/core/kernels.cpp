#include "polydiff/core/kernels.hpp"

#include "polydiff/core/error.hpp"
#include "polydiff/core/instrumentation.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace polydiff::core {

void Instrumentation::record_self_attention(Index tokens) {
    self_attention_calls.fetch_add(1, std::memory_order_relaxed);
    auto lo = self_attention_min_tokens.load();
    while (tokens < lo && !self_attention_min_tokens.compare_exchange_weak(lo, tokens)) {}
    auto hi = self_attention_max_tokens.load();
    while (tokens > hi && !self_attention_max_tokens.compare_exchange_weak(hi, tokens)) {}
}

void Instrumentation::reset() {
    self_attention_calls = 0;
    self_attention_min_tokens = INT64_MAX;
    self_attention_max_tokens = 0;
    denoiser_calls = 0;
}

Instrumentation& instrumentation() {
    static Instrumentation inst;
    return inst;
}

namespace kernels {

namespace {

constexpr Index kQueryBlock = 64;

void notify_hook(const Mat& weights) {
    auto& hook = instrumentation().attention_weights_hook;
    if (!hook) return;
#pragma omp critical(polydiff_attention_hook)
    hook(weights);
}

void softmax_rows_inplace(Mat& s) {
    for (Index i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
}

}  // namespace

void validate_attention_shapes(Index q_rows, Index q_cols, Index k_rows, Index k_cols,
                               Index v_rows, Index v_cols, int heads) {
    if (heads <= 0) throw ArgumentError("attention: heads must be positive");
    if (k_rows == 0) throw ArgumentError("attention: empty key set");
    if (q_cols != k_cols || k_cols != v_cols || k_rows != v_rows)
        throw DimensionError("attention: Q[" + std::to_string(q_rows) + "x" + std::to_string(q_cols) +
                             "] K[" + std::to_string(k_rows) + "x" + std::to_string(k_cols) + "] V[" +
                             std::to_string(v_rows) + "x" + std::to_string(v_cols) + "]");
    if (q_cols % heads != 0)
        throw DimensionError("attention: width " + std::to_string(q_cols) + " not divisible by " +
                             std::to_string(heads) + " heads");
}

void attention_reference(const Mat& q, const Mat& k, const Mat& v, int heads, Mat& out) {
    validate_attention_shapes(q.rows(), q.cols(), k.rows(), k.cols(), v.rows(), v.cols(), heads);
    const Index dh = q.cols() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    out.resize(q.rows(), q.cols());
    for (int h = 0; h < heads; ++h) {
        Mat s(q.rows(), k.rows());
        for (Index i = 0; i < q.rows(); ++i)
            for (Index j = 0; j < k.rows(); ++j) {
                double dot = 0.0;
                for (Index c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
                s(i, j) = dot * scale;
            }
        softmax_rows_inplace(s);
        notify_hook(s);
        for (Index i = 0; i < q.rows(); ++i)
            for (Index c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (Index j = 0; j < k.rows(); ++j) acc += s(i, j) * v(j, h * dh + c);
                out(i, h * dh + c) = acc;
            }
    }
}

void attention_block(const Eigen::Ref<const Mat>& q, const Mat& k, const Mat& v, int heads,
                     Eigen::Ref<Mat> out) {
    const Index dh = q.cols() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat s(q.rows(), k.rows());
    for (int h = 0; h < heads; ++h) {
        s.noalias() = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
        s *= scale;
        softmax_rows_inplace(s);
        notify_hook(s);
        out.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    }
}

void attention(const Mat& q, const Mat& k, const Mat& v, int heads, Mat& out) {
    validate_attention_shapes(q.rows(), q.cols(), k.rows(), k.cols(), v.rows(), v.cols(), heads);
    out.resize(q.rows(), q.cols());
    const Index blocks = (q.rows() + kQueryBlock - 1) / kQueryBlock;
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < blocks; ++b) {
        const Index r0 = b * kQueryBlock;
        const Index n = std::min(kQueryBlock, q.rows() - r0);
        attention_block(q.middleRows(r0, n), k, v, heads, out.middleRows(r0, n));
    }
}

OnlineAttention::OnlineAttention(Mat queries, int heads)
    : queries_(std::move(queries)), heads_(heads) {
    if (heads <= 0 || queries_.cols() % heads != 0)
        throw DimensionError("online attention: width not divisible by heads");
    head_dim_ = queries_.cols() / heads;
    scale_ = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    running_max_ = Mat::Constant(queries_.rows(), heads, -std::numeric_limits<double>::infinity());
    denominator_ = Mat::Zero(queries_.rows(), heads);
    numerator_ = Mat::Zero(queries_.rows(), queries_.cols());
}

void OnlineAttention::absorb(const Mat& keys, const Mat& values) {
    validate_attention_shapes(queries_.rows(), queries_.cols(), keys.rows(), keys.cols(),
                              values.rows(), values.cols(), heads_);
    const Index dh = head_dim_;
#pragma omp parallel for schedule(static)
    for (int h = 0; h < heads_; ++h) {
        Mat s = queries_.middleCols(h * dh, dh) * keys.middleCols(h * dh, dh).transpose();
        s *= scale_;
        for (Index i = 0; i < s.rows(); ++i) {
            const double old_max = running_max_(i, h);
            const double new_max = std::max(old_max, s.row(i).maxCoeff());
            const double rescale = std::exp(old_max - new_max);  // 0 on the first chunk
            s.row(i).array() = (s.row(i).array() - new_max).exp();
            denominator_(i, h) = denominator_(i, h) * rescale + s.row(i).sum();
            numerator_.row(i).segment(h * dh, dh) *= rescale;
            running_max_(i, h) = new_max;
        }
        numerator_.middleCols(h * dh, dh).noalias() += s * values.middleCols(h * dh, dh);
    }
    seen_ += keys.rows();
}

Mat OnlineAttention::finish() const {
    if (seen_ == 0) throw ArgumentError("attention: empty key set");
    Mat out = numerator_;
    for (int h = 0; h < heads_; ++h)
        for (Index i = 0; i < out.rows(); ++i)
            out.row(i).segment(h * head_dim_, head_dim_) /= denominator_(i, h);
    return out;
}

Mat layer_norm_rows(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const RowVec>& gain,
                    const Eigen::Ref<const RowVec>& bias) {
    Mat out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        out.row(i) = ((x.row(i).array() - mu) * inv) * gain.array() + bias.array();
    }
    return out;
}

void gelu_inplace(Mat& x) {
    // 0.5 x (1 + tanh(u)) == x / (1 + exp(-2u)); the exp form vectorizes.
    constexpr double c = 0.7978845608028654;
    auto a = x.array();
    a = a / (1.0 + (-2.0 * c * (a + 0.044715 * a.cube())).exp());
}

Mat affine(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Mat>& w,
           const Eigen::Ref<const RowVec>& b) {
    Mat out(x.rows(), w.cols());
    out.noalias() = x * w;
    out.rowwise() += b;
    return out;
}

Mat matmul_reference(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul_reference: inner dimensions differ");
    Mat out = Mat::Zero(a.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index p = 0; p < a.cols(); ++p)
            for (Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, p) * b(p, j);
    return out;
}

}  // namespace kernels
}  // namespace polydiff::core
