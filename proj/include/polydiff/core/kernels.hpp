#pragma once

#include "polydiff/core/types.hpp"

// Tape-free numeric kernels used by the inference route. Each parallel kernel
// has a plain serial twin (`*_reference`) kept for tests and benchmarks.
namespace polydiff::core::kernels {

/// out = concat over heads of softmax(Q_h K_h^T / sqrt(d/heads)) V_h.
/// Straight per-head evaluation, single-threaded.
void attention_reference(const Mat& q, const Mat& k, const Mat& v, int heads, Mat& out);

/// Same result as attention_reference; query rows are processed in blocks
/// spread over OpenMP threads.
void attention(const Mat& q, const Mat& k, const Mat& v, int heads, Mat& out);

/// Serial kernel for one block of queries; safe to call inside a parallel
/// region (no nested threading).
void attention_block(const Eigen::Ref<const Mat>& q, const Mat& k, const Mat& v, int heads,
                     Eigen::Ref<Mat> out);

/// Streaming attention: key/value rows arrive in chunks and are folded into
/// running (max, denominator, numerator) per query and head, so the full
/// score matrix is never materialized.
class OnlineAttention {
public:
    OnlineAttention(Mat queries, int heads);
    void absorb(const Mat& keys, const Mat& values);
    Mat finish() const;

private:
    Mat queries_;
    int heads_;
    Index head_dim_;
    double scale_;
    Index seen_ = 0;
    Mat running_max_;  // q x heads
    Mat denominator_;  // q x heads
    Mat numerator_;    // q x d
};

void validate_attention_shapes(Index q_rows, Index q_cols, Index k_rows, Index k_cols,
                               Index v_rows, Index v_cols, int heads);

Mat layer_norm_rows(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const RowVec>& gain,
                    const Eigen::Ref<const RowVec>& bias);
void gelu_inplace(Mat& x);
/// x * w + b (bias broadcast over rows).
Mat affine(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Mat>& w,
           const Eigen::Ref<const RowVec>& b);

/// Naive triple loop, the oracle for Eigen-backed products in tests.
Mat matmul_reference(const Mat& a, const Mat& b);

}  // namespace polydiff::core::kernels
