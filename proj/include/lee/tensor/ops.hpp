#pragma once

#include <vector>

#include "lee/tensor/kernels.hpp"
#include "lee/tensor/tensor.hpp"
#include "lee/util/rng.hpp"

namespace lee::tensor {

// Binary elementwise ops accept b with the same shape as a, a 1 x cols row
// (broadcast down the rows) or a 1 x 1 scalar. Anything else throws with both
// shapes in the message.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
/// x * w + b, with b a 1 x out row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor silu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Gradient is zero where the input is outside [lo, hi].
Tensor clamp(const Tensor& a, double lo, double hi);
/// sign(u) * log(1 + |u|)
Tensor signed_log1p(const Tensor& a);
/// sign(u) * (exp(|u|) - 1), the inverse of signed_log1p.
Tensor signed_expm1(const Tensor& a);
/// Identity value, no gradient.
Tensor stop_gradient(const Tensor& a);
/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row sums, rows x 1.
Tensor row_sum(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Mean token cross-entropy over rows whose mask entry is non-zero; rows x V
/// logits against integer targets. Throws if every row is masked.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, const std::vector<char>& mask);

/// Rows of `table` selected by `ids`; gradient scatters back.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
/// Rows of `a` selected by `idx`, repeats allowed.
Tensor gather_rows(const Tensor& a, const std::vector<Index>& idx);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Index begin, Index count);
Tensor slice_cols(const Tensor& a, Index begin, Index count);
/// Row-major reinterpretation.
Tensor reshape(const Tensor& a, Index rows, Index cols);

/// Mean over the rows of each segment [offsets[s], offsets[s+1]) whose
/// weight is non-zero; segments x cols. An empty segment pools to zero.
Tensor segment_mean(const Tensor& x, const std::vector<Index>& offsets, const std::vector<char>& include = {});

/// Fused multi-head scaled dot-product attention over packed segments.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const kernels::AttentionLayout& layout);

}  // namespace lee::tensor
