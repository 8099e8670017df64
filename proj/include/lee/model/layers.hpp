#pragma once

#include <string>
#include <vector>

#include "lee/tensor/ops.hpp"
#include "lee/util/rng.hpp"

namespace lee::model {

using tensor::Index;
using tensor::Matrix;
using tensor::Tensor;

enum class Group : std::uint8_t { Encoder, ExprDecoder, EvalDecoder };

struct Param {
  std::string name;
  Group group;
  Tensor tensor;
};

/// Owns parameter creation so names and order are deterministic.
class ParamStore {
 public:
  ParamStore(Group group, std::string prefix, Rng& rng, std::vector<Param>& out)
      : group_(group), prefix_(std::move(prefix)), rng_(rng), out_(out) {}

  ParamStore scope(const std::string& name) const { return {group_, prefix_ + name + ".", rng_, out_}; }
  Tensor normal(const std::string& name, Index rows, Index cols, double std);
  Tensor zeros(const std::string& name, Index rows, Index cols);
  Tensor ones(const std::string& name, Index rows, Index cols);

 private:
  Tensor add(const std::string& name, Matrix init);
  Group group_;
  std::string prefix_;
  Rng& rng_;
  std::vector<Param>& out_;
};

struct Linear {
  Tensor w, b;
  Linear() = default;
  /// Weight std 1/sqrt(in) * gain; zero bias.
  Linear(ParamStore ps, Index in, Index out, double gain = 1.0);
  Tensor operator()(const Tensor& x) const { return tensor::linear(x, w, b); }
};

struct LayerNorm {
  Tensor gain, bias;
  LayerNorm() = default;
  LayerNorm(ParamStore ps, Index d);
  Tensor operator()(const Tensor& x) const { return tensor::layer_norm(x, gain, bias); }
};

/// Two linear maps with SiLU between them.
struct Mlp {
  Linear in, out;
  Mlp() = default;
  Mlp(ParamStore ps, Index d_in, Index hidden, Index d_out, double out_gain = 1.0);
  Tensor operator()(const Tensor& x) const { return out(tensor::silu(in(x))); }
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore ps, Index d, int heads, double out_gain);
  Tensor operator()(const Tensor& queries, const Tensor& keys, const tensor::kernels::AttentionLayout& layout) const;
};

/// Pre-LN transformer block: self-attention, optional cross-attention,
/// feed-forward, each added back to the residual stream.
struct Block {
  LayerNorm ln_self, ln_cross, ln_ff;
  MultiHeadAttention self_attn, cross_attn;
  Mlp ff;
  bool has_cross = false;

  Block() = default;
  Block(ParamStore ps, Index d, int heads, int ffn_mult, bool cross, int depth);
  Tensor operator()(Tensor x, const tensor::kernels::AttentionLayout& self_layout, const Tensor* memory,
                    const tensor::kernels::AttentionLayout* cross_layout, double dropout, Rng* rng) const;
};

}  // namespace lee::model
