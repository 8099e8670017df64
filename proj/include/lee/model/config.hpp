#pragma once

#include <string>

namespace lee::model {

/// Desk-scale defaults. The full-size layout (768/6/12 encoder, 512/8/8 and
/// 512/4/8 decoders, K=4, d_z=512) is storable in the same struct.
struct ModelConfig {
  int d_enc = 64;
  int enc_layers = 2;
  int enc_heads = 4;
  int d_expr = 64;
  int expr_layers = 2;
  int expr_heads = 4;
  int d_eval = 64;
  int eval_layers = 2;
  int eval_heads = 4;
  int ffn_mult = 4;
  double dropout = 0.0;
  int memory_tokens = 2;  // K
  int d_z = 32;
  int max_len = 64;  // tokens including BOS/EOS
  int numeric_hidden = 256;
  double coord_scale = 4.0;
  int k_max = 3;  // coordinate columns the numeric embedders accept
  double logvar_min = -8.0;
  double logvar_max = 4.0;
  double eval_output_clip = 70.0;  // bound on the log-compressed eval output
  bool variational = true;         // false: z = mu, no KL pressure on sigma

  void validate() const;

  template <class F>
  void fields(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void fields(F&& f) const {
    visit(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("d_enc", s.d_enc);
    f("enc_layers", s.enc_layers);
    f("enc_heads", s.enc_heads);
    f("d_expr", s.d_expr);
    f("expr_layers", s.expr_layers);
    f("expr_heads", s.expr_heads);
    f("d_eval", s.d_eval);
    f("eval_layers", s.eval_layers);
    f("eval_heads", s.eval_heads);
    f("ffn_mult", s.ffn_mult);
    f("dropout", s.dropout);
    f("memory_tokens", s.memory_tokens);
    f("d_z", s.d_z);
    f("max_len", s.max_len);
    f("numeric_hidden", s.numeric_hidden);
    f("coord_scale", s.coord_scale);
    f("k_max", s.k_max);
    f("logvar_min", s.logvar_min);
    f("logvar_max", s.logvar_max);
    f("eval_output_clip", s.eval_output_clip);
    f("variational", s.variational);
  }
};

}  // namespace lee::model
