#include "lee/model/layers.hpp"

#include <cmath>

namespace lee::model {

using namespace lee::tensor;

Tensor ParamStore::add(const std::string& name, Matrix init) {
  Tensor t = Tensor::parameter(std::move(init), prefix_ + name);
  out_.push_back({prefix_ + name, group_, t});
  return t;
}

Tensor ParamStore::normal(const std::string& name, Index rows, Index cols, double std) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng_.normal();
  return add(name, std::move(m));
}

Tensor ParamStore::zeros(const std::string& name, Index rows, Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

Tensor ParamStore::ones(const std::string& name, Index rows, Index cols) {
  return add(name, Matrix::Ones(rows, cols));
}

Linear::Linear(ParamStore ps, Index in, Index out, double gain)
    : w(ps.normal("w", in, out, gain / std::sqrt(static_cast<double>(in)))), b(ps.zeros("b", 1, out)) {}

LayerNorm::LayerNorm(ParamStore ps, Index d) : gain(ps.ones("gain", 1, d)), bias(ps.zeros("bias", 1, d)) {}

Mlp::Mlp(ParamStore ps, Index d_in, Index hidden, Index d_out, double out_gain)
    : in(ps.scope("in"), d_in, hidden), out(ps.scope("out"), hidden, d_out, out_gain) {}

MultiHeadAttention::MultiHeadAttention(ParamStore ps, Index d, int h, double out_gain)
    : q(ps.scope("q"), d, d), k(ps.scope("k"), d, d), v(ps.scope("v"), d, d), o(ps.scope("o"), d, d, out_gain),
      heads(h) {}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& keys,
                                      const kernels::AttentionLayout& layout) const {
  return o(attention(q(queries), k(keys), v(keys), heads, layout));
}

Block::Block(ParamStore ps, Index d, int heads, int ffn_mult, bool cross, int depth) : has_cross(cross) {
  const double gain = 1.0 / std::sqrt(2.0 * depth);
  ln_self = LayerNorm(ps.scope("ln_self"), d);
  self_attn = MultiHeadAttention(ps.scope("self"), d, heads, gain);
  if (cross) {
    ln_cross = LayerNorm(ps.scope("ln_cross"), d);
    cross_attn = MultiHeadAttention(ps.scope("cross"), d, heads, gain);
  }
  ln_ff = LayerNorm(ps.scope("ln_ff"), d);
  ff = Mlp(ps.scope("ff"), d, d * ffn_mult, d, gain);
}

Tensor Block::operator()(Tensor x, const kernels::AttentionLayout& self_layout, const Tensor* memory,
                         const kernels::AttentionLayout* cross_layout, double p, Rng* rng) const {
  auto drop = [&](const Tensor& t) { return rng && p > 0 ? dropout(t, p, *rng) : t; };
  const Tensor h = ln_self(x);
  x = add(x, drop(self_attn(h, h, self_layout)));
  if (has_cross) x = add(x, drop(cross_attn(ln_cross(x), *memory, *cross_layout)));
  return add(x, drop(ff(ln_ff(x))));
}

}  // namespace lee::model
