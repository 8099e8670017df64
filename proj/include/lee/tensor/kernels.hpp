#pragma once

#include <vector>

#include "lee/tensor/tensor.hpp"

namespace lee::tensor::kernels {

/// C = op(A) * op(B). The serial versions are plain loops kept as the
/// reference; the parallel ones split output rows into fixed 64-row blocks
/// across OpenMP threads, so results do not depend on the thread count.
void gemm_serial(const Matrix& a, const Matrix& b, Matrix& c);
void gemm(const Matrix& a, const Matrix& b, Matrix& c);
/// C = A^T * B
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c);
/// C = A * B^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c);

/// Packed multi-sequence attention layout. Query segment s (rows
/// q_offsets[s]..q_offsets[s+1]) attends to key segment s. Keys whose
/// key_valid entry is 0 are skipped entirely.
struct AttentionLayout {
  std::vector<Index> q_offsets;
  std::vector<Index> k_offsets;
  std::vector<char> key_valid;  // empty = all valid
  bool causal = false;          // query i sees keys <= i within its segment

  Index segments() const { return static_cast<Index>(q_offsets.size()) - 1; }
  void validate(Index q_rows, Index k_rows) const;
};

/// Softmax attention probabilities per (segment, head), row-major
/// [q_len x k_len]; kept from the forward pass for the backward pass.
struct AttentionCache {
  std::vector<Matrix> probs;  // index = segment * heads + head
};

void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, int heads, const AttentionLayout& layout,
                       Matrix& out, AttentionCache* cache);
/// Scalar-loop reference with identical semantics.
void attention_forward_serial(const Matrix& q, const Matrix& k, const Matrix& v, int heads,
                              const AttentionLayout& layout, Matrix& out);
void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, int heads, const AttentionLayout& layout,
                        const AttentionCache& cache, const Matrix& grad_out, Matrix* dq, Matrix* dk, Matrix* dv);

}  // namespace lee::tensor::kernels
