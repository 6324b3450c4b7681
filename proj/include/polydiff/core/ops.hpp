#pragma once

#include "polydiff/core/tensor.hpp"

#include <vector>

// Differentiable primitives. Every network module is composed from this
// closed set; each primitive owns its backward rule.
namespace polydiff::core {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a[n x m] + bias[m] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double s);
Tensor softmax_rows(const Tensor& a);
/// Per-row normalization to zero mean / unit variance (eps 1e-5 inside the
/// square root), then gain and bias per column.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
/// tanh approximation.
Tensor gelu(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Index begin, Index count);
Tensor slice_cols(const Tensor& a, Index begin, Index count);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace polydiff::core
