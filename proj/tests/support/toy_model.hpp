#pragma once

// A tiny model trained just long enough to emit mostly well-formed
// expressions. Built once per test binary.

#include "lee/datagen/corpus.hpp"
#include "lee/train/trainer.hpp"

namespace lee::testing {

inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.d_enc = c.d_expr = c.d_eval = 32;
  c.enc_heads = c.expr_heads = c.eval_heads = 2;
  c.enc_layers = c.expr_layers = c.eval_layers = 1;
  c.ffn_mult = 2;
  c.numeric_hidden = 32;
  c.d_z = 8;
  c.max_len = 32;
  return c;
}

inline const model::Model& toy_model() {
  static const model::Model* m = [] {
    datagen::GrammarConfig g;
    g.b_max = 1;
    g.u_max = 1;
    g.k_max = 2;
    datagen::CorpusOptions opts;
    opts.n_total = 400;
    opts.seed = 1;
    const auto corpus = datagen::build_corpus(g, opts);
    auto* model = new model::Model(tiny_config(), 2);
    train::TrainConfig tc;
    tc.steps_basic = 400;
    tc.steps_align = tc.steps_refine = tc.steps_freeze = tc.steps_unfreeze = 0;
    tc.batch_size = 16;
    tc.subsample_min = tc.subsample_max = 24;
    tc.lr_max = 3e-3;
    tc.lr_min = 3e-4;
    const auto ex = train::make_examples(corpus, datagen::Split::Train, tc, model->config().max_len);
    train::Trainer(*model, tc).run(ex, {});
    return model;
  }();
  return *m;
}

}  // namespace lee::testing
