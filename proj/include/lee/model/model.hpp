#pragma once

#include <span>
#include <vector>

#include "lee/datagen/scatter.hpp"
#include "lee/expr/evaluate.hpp"
#include "lee/expr/token.hpp"
#include "lee/model/config.hpp"
#include "lee/model/layers.hpp"

namespace lee::model {

/// z with the Gaussian it was drawn from. In deterministic mode z == mu.
struct Latent {
  std::vector<double> z, mu, log_var;
};

/// Row b of each matrix belongs to batch item b.
struct Gaussian {
  Tensor mu, log_var;
};

/// One encoder input. PAD tokens are dropped before packing, so an all-PAD
/// stream and an empty stream produce the same rows and the same latent.
struct EncodeItem {
  std::span<const expr::Token> tokens;
  const datagen::ScatterSet* scatter = nullptr;
};

struct ExprLogits {
  Tensor logits;             // packed rows x vocab
  std::vector<int> targets;  // next-token ids
  std::vector<char> mask;    // 0 on PAD targets
};

struct Generated {
  expr::TokenSeq tokens;  // starts with BOS; ends with EOS unless truncated
  bool truncated = false;
};

/// Signed log compression sign(u) * log(1 + |u|).
double compress(double u);

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Tensor> param_tensors() const;
  /// 1 for parameters in group g.
  std::vector<char> group_mask(Group g) const;
  std::size_t parameter_count() const;

  Gaussian encode(std::span<const EncodeItem> batch, Rng* dropout_rng = nullptr) const;
  /// z = mu + exp(log_var / 2) * eps; z = mu when the model is not variational.
  Tensor reparameterize(const Gaussian& g, Rng& rng) const;
  /// Latent rows (batch x d_z) mapped to K memory rows each.
  Tensor expr_memory(const Tensor& z) const;
  Tensor eval_memory(const Tensor& z) const;

  /// Teacher-forced logits for framed BOS..EOS targets; item b contributes
  /// len_b - 1 rows.
  ExprLogits expr_logits(const Tensor& z, std::span<const expr::TokenSeq> targets, Rng* dropout_rng = nullptr) const;
  /// Predicted y at every query row, packed over the batch (rows x 1).
  Tensor eval(const Tensor& z, std::span<const expr::MatrixView> queries, Rng* dropout_rng = nullptr) const;

  /// Autoregressive decoding of one sequence per latent row. Temperature 0
  /// is greedy. PAD, BOS, UNK and the structural tokens are never emitted.
  std::vector<Generated> generate(const Matrix& z, std::span<const double> temperatures, Rng& rng,
                                  int max_len = 0) const;

  Latent encode_one(std::span<const expr::Token> tokens, const datagen::ScatterSet& scatter, bool sample,
                    Rng* rng) const;
  std::vector<double> eval_one(std::span<const double> z, expr::MatrixView queries) const;

 private:
  Tensor numeric_embed(std::span<const EncodeItem> batch) const;
  Tensor query_embed(std::span<const expr::MatrixView> queries) const;

  ModelConfig cfg_;
  std::vector<Param> params_;

  // encoder
  Tensor tok_embed_, pos_embed_, nonfinite_embed_;
  Mlp numeric_mlp_;
  std::vector<Block> enc_blocks_;
  LayerNorm enc_norm_;
  Linear mu_head_, logvar_head_;
  // expression decoder
  Linear expr_mem_;
  Tensor dec_tok_embed_, dec_pos_embed_;
  std::vector<Block> dec_blocks_;
  LayerNorm dec_norm_;
  Linear dec_out_;
  // evaluation decoder
  Linear eval_mem_;
  Mlp query_mlp_;
  std::vector<Block> eval_blocks_;
  LayerNorm eval_norm_;
  Mlp eval_out_;
};

}  // namespace lee::model
