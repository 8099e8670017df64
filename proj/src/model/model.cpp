#include "lee/model/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lee::model {

using namespace lee::tensor;
using expr::Token;
using kernels::AttentionLayout;

namespace {

constexpr double kEmbedStd = 0.1;

bool never_emitted(Token t) {
  return t == Token::Pad || t == Token::Bos || t == Token::Unk || t == Token::Sep || t == Token::ConstMark;
}

std::vector<int> strip_pad(std::span<const Token> tokens, int max_len) {
  std::vector<int> ids;
  for (Token t : tokens) {
    if (t == Token::Pad) continue;
    if (static_cast<int>(ids.size()) == max_len) break;
    ids.push_back(expr::token_id(t));
  }
  return ids;
}

AttentionLayout self_layout(const std::vector<Index>& offsets, bool causal) {
  AttentionLayout l;
  l.q_offsets = offsets;
  l.k_offsets = offsets;
  l.causal = causal;
  return l;
}

AttentionLayout memory_layout(const std::vector<Index>& q_offsets, Index k) {
  AttentionLayout l;
  l.q_offsets = q_offsets;
  l.k_offsets.resize(q_offsets.size());
  for (std::size_t s = 0; s < q_offsets.size(); ++s) l.k_offsets[s] = static_cast<Index>(s) * k;
  return l;
}

std::vector<Index> iota_rows(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

}  // namespace

double compress(double u) { return std::copysign(std::log1p(std::fabs(u)), u); }

void ModelConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(d_z > 0, "model.d_z must be > 0");
  need(memory_tokens >= 1, "model.memory_tokens must be >= 1");
  need(d_enc > 0 && d_expr > 0 && d_eval > 0, "model dims must be > 0");
  need(enc_heads > 0 && d_enc % enc_heads == 0, "model.d_enc must be divisible by model.enc_heads");
  need(expr_heads > 0 && d_expr % expr_heads == 0, "model.d_expr must be divisible by model.expr_heads");
  need(eval_heads > 0 && d_eval % eval_heads == 0, "model.d_eval must be divisible by model.eval_heads");
  need(enc_layers >= 1 && expr_layers >= 1 && eval_layers >= 1, "model layer counts must be >= 1");
  need(ffn_mult >= 1, "model.ffn_mult must be >= 1");
  need(dropout >= 0 && dropout < 1, "model.dropout must be in [0, 1)");
  need(max_len >= 3, "model.max_len must be >= 3");
  need(numeric_hidden >= 1, "model.numeric_hidden must be >= 1");
  need(coord_scale > 0, "model.coord_scale must be > 0");
  need(k_max >= 1 && k_max <= expr::kMaxVariables, "model.k_max must be in [1, 10]");
  need(logvar_min < logvar_max, "model.logvar_min must be < model.logvar_max");
  need(eval_output_clip > 0, "model.eval_output_clip must be > 0");
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const Index v = expr::kVocabSize;
  const Index k = cfg_.k_max;

  ParamStore enc(Group::Encoder, "enc.", rng, params_);
  tok_embed_ = enc.normal("tok_embed", v, cfg_.d_enc, kEmbedStd);
  pos_embed_ = enc.normal("pos_embed", cfg_.max_len, cfg_.d_enc, kEmbedStd);
  nonfinite_embed_ = enc.normal("nonfinite_embed", 2, cfg_.d_enc, kEmbedStd);
  numeric_mlp_ = Mlp(enc.scope("numeric"), 2 * k + 1, cfg_.numeric_hidden, cfg_.d_enc);
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    enc_blocks_.emplace_back(enc.scope("block" + std::to_string(i)), cfg_.d_enc, cfg_.enc_heads, cfg_.ffn_mult, false,
                             cfg_.enc_layers);
  }
  enc_norm_ = LayerNorm(enc.scope("norm"), cfg_.d_enc);
  mu_head_ = Linear(enc.scope("mu"), cfg_.d_enc, cfg_.d_z);
  logvar_head_ = Linear(enc.scope("logvar"), cfg_.d_enc, cfg_.d_z);
  logvar_head_.w.mutable_value().setZero();  // sigma = 1 at initialization

  ParamStore dec(Group::ExprDecoder, "expr.", rng, params_);
  expr_mem_ = Linear(dec.scope("memory"), cfg_.d_z, static_cast<Index>(cfg_.memory_tokens) * cfg_.d_expr);
  dec_tok_embed_ = dec.normal("tok_embed", v, cfg_.d_expr, kEmbedStd);
  dec_pos_embed_ = dec.normal("pos_embed", cfg_.max_len, cfg_.d_expr, kEmbedStd);
  for (int i = 0; i < cfg_.expr_layers; ++i) {
    dec_blocks_.emplace_back(dec.scope("block" + std::to_string(i)), cfg_.d_expr, cfg_.expr_heads, cfg_.ffn_mult,
                             true, cfg_.expr_layers);
  }
  dec_norm_ = LayerNorm(dec.scope("norm"), cfg_.d_expr);
  dec_out_ = Linear(dec.scope("out"), cfg_.d_expr, v);

  ParamStore ev(Group::EvalDecoder, "eval.", rng, params_);
  eval_mem_ = Linear(ev.scope("memory"), cfg_.d_z, static_cast<Index>(cfg_.memory_tokens) * cfg_.d_eval);
  query_mlp_ = Mlp(ev.scope("query"), 2 * k, cfg_.numeric_hidden, cfg_.d_eval);
  for (int i = 0; i < cfg_.eval_layers; ++i) {
    eval_blocks_.emplace_back(ev.scope("block" + std::to_string(i)), cfg_.d_eval, cfg_.eval_heads, cfg_.ffn_mult,
                              true, cfg_.eval_layers);
  }
  eval_norm_ = LayerNorm(ev.scope("norm"), cfg_.d_eval);
  eval_out_ = Mlp(ev.scope("out"), cfg_.d_eval, cfg_.d_eval, 1);
}

std::vector<Tensor> Model::param_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::vector<char> Model::group_mask(Group g) const {
  std::vector<char> m;
  for (const auto& p : params_) m.push_back(p.group == g);
  return m;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.size());
  return n;
}

Tensor Model::numeric_embed(std::span<const EncodeItem> batch) const {
  const Index k_max = cfg_.k_max;
  Index rows = 0;
  for (const auto& item : batch) rows += static_cast<Index>(item.scatter->rows());
  Matrix feat = Matrix::Zero(rows, 2 * k_max + 1);
  std::vector<int> nonfinite(static_cast<std::size_t>(rows), 0);
  Index r = 0;
  for (const auto& item : batch) {
    const auto& s = *item.scatter;
    for (std::size_t i = 0; i < s.rows(); ++i, ++r) {
      for (std::size_t j = 0; j < s.k; ++j) {
        feat(r, static_cast<Index>(j)) = compress(s.at(i, j)) / cfg_.coord_scale;
        feat(r, k_max + static_cast<Index>(j)) = 1.0;
      }
      const double y = s.y[i];
      if (std::isfinite(y)) {
        feat(r, 2 * k_max) = compress(y);
      } else {
        nonfinite[static_cast<std::size_t>(r)] = 1;
      }
    }
  }
  return add(numeric_mlp_(Tensor::constant(std::move(feat))), embedding(nonfinite_embed_, nonfinite));
}

Gaussian Model::encode(std::span<const EncodeItem> batch, Rng* dropout_rng) const {
  if (batch.empty()) throw std::invalid_argument("encode: empty batch");
  std::vector<int> ids;
  std::vector<Index> positions;
  std::vector<Index> sym_len, num_len;
  for (const auto& item : batch) {
    if (!item.scatter || item.scatter->rows() == 0) throw std::invalid_argument("encode: empty scatter set");
    if (item.scatter->k > static_cast<std::size_t>(cfg_.k_max)) {
      throw std::invalid_argument("encode: scatter has " + std::to_string(item.scatter->k) +
                                  " columns, model accepts at most " + std::to_string(cfg_.k_max));
    }
    const auto kept = strip_pad(item.tokens, cfg_.max_len);
    for (std::size_t p = 0; p < kept.size(); ++p) positions.push_back(static_cast<Index>(p));
    ids.insert(ids.end(), kept.begin(), kept.end());
    sym_len.push_back(static_cast<Index>(kept.size()));
    num_len.push_back(static_cast<Index>(item.scatter->rows()));
  }
  const Tensor num = numeric_embed(batch);
  Tensor x = num;
  std::vector<Index> offsets{0};
  if (!ids.empty()) {
    const Tensor sym = add(embedding(tok_embed_, ids), gather_rows(pos_embed_, positions));
    const Index sym_total = static_cast<Index>(ids.size());
    std::vector<Index> order;
    Index s0 = 0, n0 = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (Index i = 0; i < sym_len[b]; ++i) order.push_back(s0 + i);
      for (Index i = 0; i < num_len[b]; ++i) order.push_back(sym_total + n0 + i);
      s0 += sym_len[b];
      n0 += num_len[b];
    }
    x = gather_rows(concat_rows({sym, num}), order);
  }
  for (std::size_t b = 0; b < batch.size(); ++b) offsets.push_back(offsets.back() + sym_len[b] + num_len[b]);

  const AttentionLayout layout = self_layout(offsets, false);
  for (const auto& blk : enc_blocks_) x = blk(x, layout, nullptr, nullptr, cfg_.dropout, dropout_rng);
  const Tensor pooled = segment_mean(enc_norm_(x), offsets);
  return {mu_head_(pooled), clamp(logvar_head_(pooled), cfg_.logvar_min, cfg_.logvar_max)};
}

Tensor Model::reparameterize(const Gaussian& g, Rng& rng) const {
  if (!cfg_.variational) return g.mu;
  Matrix eps(g.mu.rows(), g.mu.cols());
  for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
  return add(g.mu, mul(exp(scale(g.log_var, 0.5)), Tensor::constant(std::move(eps))));
}

Tensor Model::expr_memory(const Tensor& z) const {
  return reshape(expr_mem_(z), z.rows() * cfg_.memory_tokens, cfg_.d_expr);
}

Tensor Model::eval_memory(const Tensor& z) const {
  return reshape(eval_mem_(z), z.rows() * cfg_.memory_tokens, cfg_.d_eval);
}

ExprLogits Model::expr_logits(const Tensor& z, std::span<const expr::TokenSeq> targets, Rng* dropout_rng) const {
  if (static_cast<Index>(targets.size()) != z.rows()) {
    throw std::invalid_argument("expr_logits: " + std::to_string(targets.size()) + " targets for latent " +
                                z.shape_str());
  }
  ExprLogits out;
  std::vector<int> inputs;
  std::vector<Index> positions, offsets{0};
  for (const auto& seq : targets) {
    const std::size_t len = std::min<std::size_t>(seq.size(), static_cast<std::size_t>(cfg_.max_len));
    if (len < 2) throw std::invalid_argument("expr_logits: target needs at least BOS and one token");
    for (std::size_t j = 0; j + 1 < len; ++j) {
      inputs.push_back(expr::token_id(seq[j]));
      positions.push_back(static_cast<Index>(j));
      out.targets.push_back(expr::token_id(seq[j + 1]));
      out.mask.push_back(seq[j + 1] != Token::Pad);
    }
    offsets.push_back(static_cast<Index>(inputs.size()));
  }
  Tensor x = add(embedding(dec_tok_embed_, inputs), gather_rows(dec_pos_embed_, positions));
  const Tensor memory = expr_memory(z);
  const AttentionLayout self = self_layout(offsets, true);
  const AttentionLayout cross = memory_layout(offsets, cfg_.memory_tokens);
  for (const auto& blk : dec_blocks_) x = blk(x, self, &memory, &cross, cfg_.dropout, dropout_rng);
  out.logits = dec_out_(dec_norm_(x));
  return out;
}

Tensor Model::query_embed(std::span<const expr::MatrixView> queries) const {
  const Index k_max = cfg_.k_max;
  Index rows = 0;
  for (const auto& q : queries) rows += static_cast<Index>(q.rows);
  Matrix feat = Matrix::Zero(rows, 2 * k_max);
  Index r = 0;
  for (const auto& q : queries) {
    if (q.cols > static_cast<std::size_t>(k_max)) {
      throw std::invalid_argument("eval: query width " + std::to_string(q.cols) + " exceeds model k_max " +
                                  std::to_string(k_max));
    }
    for (std::size_t i = 0; i < q.rows; ++i, ++r) {
      for (std::size_t j = 0; j < q.cols; ++j) {
        feat(r, static_cast<Index>(j)) = compress(q(i, j)) / cfg_.coord_scale;
        feat(r, k_max + static_cast<Index>(j)) = 1.0;
      }
    }
  }
  return query_mlp_(Tensor::constant(std::move(feat)));
}

Tensor Model::eval(const Tensor& z, std::span<const expr::MatrixView> queries, Rng* dropout_rng) const {
  if (static_cast<Index>(queries.size()) != z.rows()) {
    throw std::invalid_argument("eval: " + std::to_string(queries.size()) + " query sets for latent " + z.shape_str());
  }
  std::vector<Index> offsets{0};
  for (const auto& q : queries) offsets.push_back(offsets.back() + static_cast<Index>(q.rows));
  Tensor x = query_embed(queries);
  const Tensor memory = eval_memory(z);
  const AttentionLayout self = self_layout(offsets, false);
  const AttentionLayout cross = memory_layout(offsets, cfg_.memory_tokens);
  for (const auto& blk : eval_blocks_) x = blk(x, self, &memory, &cross, cfg_.dropout, dropout_rng);
  const Tensor raw = eval_out_(eval_norm_(x));
  return signed_expm1(clamp(raw, -cfg_.eval_output_clip, cfg_.eval_output_clip));
}

std::vector<Generated> Model::generate(const Matrix& z, std::span<const double> temperatures, Rng& rng,
                                       int max_len) const {
  if (static_cast<Index>(temperatures.size()) != z.rows()) {
    throw std::invalid_argument("generate: one temperature per latent row required");
  }
  if (!z.allFinite()) throw std::invalid_argument("generate: latent is not finite");
  const int limit = max_len > 0 ? std::min(max_len, cfg_.max_len) : cfg_.max_len;
  NoGradGuard no_grad;
  const Index batch = z.rows();
  const Tensor memory_all = expr_memory(Tensor::constant(z));
  std::vector<Generated> out(static_cast<std::size_t>(batch));
  for (auto& g : out) g.tokens = {Token::Bos};
  std::vector<Index> active = iota_rows(batch);

  while (!active.empty()) {
    std::vector<int> inputs;
    std::vector<Index> positions, offsets{0}, mem_rows;
    for (Index b : active) {
      const auto& seq = out[static_cast<std::size_t>(b)].tokens;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        inputs.push_back(expr::token_id(seq[j]));
        positions.push_back(static_cast<Index>(j));
      }
      offsets.push_back(static_cast<Index>(inputs.size()));
      for (int m = 0; m < cfg_.memory_tokens; ++m) mem_rows.push_back(b * cfg_.memory_tokens + m);
    }
    Tensor x = add(embedding(dec_tok_embed_, inputs), gather_rows(dec_pos_embed_, positions));
    const Tensor memory = gather_rows(memory_all, mem_rows);
    const AttentionLayout self = self_layout(offsets, true);
    const AttentionLayout cross = memory_layout(offsets, cfg_.memory_tokens);
    for (const auto& blk : dec_blocks_) x = blk(x, self, &memory, &cross, 0.0, nullptr);
    std::vector<Index> last;
    for (std::size_t s = 1; s < offsets.size(); ++s) last.push_back(offsets[s] - 1);
    const Matrix logits = dec_out_(dec_norm_(gather_rows(x, last))).value();

    std::vector<Index> still;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const Index b = active[a];
      const double tau = temperatures[static_cast<std::size_t>(b)];
      int pick = -1;
      if (tau <= 0.0) {
        double best = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < expr::kVocabSize; ++t) {
          if (never_emitted(expr::token_from_id(t))) continue;
          if (logits(static_cast<Index>(a), t) > best) {
            best = logits(static_cast<Index>(a), t);
            pick = t;
          }
        }
      } else {
        double mx = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < expr::kVocabSize; ++t) {
          if (!never_emitted(expr::token_from_id(t))) mx = std::max(mx, logits(static_cast<Index>(a), t) / tau);
        }
        std::vector<double> w(static_cast<std::size_t>(expr::kVocabSize), 0.0);
        for (int t = 0; t < expr::kVocabSize; ++t) {
          if (!never_emitted(expr::token_from_id(t))) {
            w[static_cast<std::size_t>(t)] = std::exp(logits(static_cast<Index>(a), t) / tau - mx);
          }
        }
        pick = static_cast<int>(rng.categorical(w));
      }
      auto& g = out[static_cast<std::size_t>(b)];
      g.tokens.push_back(expr::token_from_id(pick));
      if (g.tokens.back() == Token::Eos) continue;
      if (static_cast<int>(g.tokens.size()) >= limit) {
        g.truncated = true;
        continue;
      }
      still.push_back(b);
    }
    active = std::move(still);
  }
  return out;
}

Latent Model::encode_one(std::span<const Token> tokens, const datagen::ScatterSet& scatter, bool sample,
                         Rng* rng) const {
  NoGradGuard no_grad;
  const EncodeItem item{tokens, &scatter};
  const Gaussian g = encode(std::span<const EncodeItem>(&item, 1));
  Latent out;
  const Matrix& mu = g.mu.value();
  const Matrix& lv = g.log_var.value();
  out.mu.assign(mu.data(), mu.data() + mu.size());
  out.log_var.assign(lv.data(), lv.data() + lv.size());
  out.z = out.mu;
  if (sample && cfg_.variational) {
    if (!rng) throw std::invalid_argument("encode_one: sample mode needs an rng");
    for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] += std::exp(0.5 * out.log_var[i]) * rng->normal();
  }
  return out;
}

std::vector<double> Model::eval_one(std::span<const double> z, expr::MatrixView queries) const {
  NoGradGuard no_grad;
  Matrix zm(1, static_cast<Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) zm(0, static_cast<Index>(i)) = z[i];
  const Tensor y = eval(Tensor::constant(std::move(zm)), std::span<const expr::MatrixView>(&queries, 1));
  return std::vector<double>(y.value().data(), y.value().data() + y.size());
}

}  // namespace lee::model
