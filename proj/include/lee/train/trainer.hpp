#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "lee/datagen/corpus.hpp"
#include "lee/model/model.hpp"
#include "lee/tensor/optim.hpp"
#include "lee/train/losses.hpp"
#include "lee/train/phases.hpp"

namespace lee::train {

struct TrainConfig {
  long steps_basic = 5000;
  long steps_align = 3000;
  long steps_refine = 5000;
  long steps_freeze = 3000;
  long steps_unfreeze = 4000;
  int batch_size = 32;
  double lr_max = 3e-4;
  double lr_min = 1e-5;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // global gradient norm; 0 disables
  int subsample_min = 128;
  int subsample_max = 200;
  int min_finite = 32;  // records with fewer finite rows are dropped
  bool permute_vars = true;
  double p_drop = 0.15;
  double p_swap = 0.10;
  int log_every = 100;
  int val_examples = 64;
  int skip_window = 500;
  double skip_limit = 0.01;  // abort when more than this share of a window is skipped
  std::uint64_t seed = 0;

  PhasePlan plan() const;
  datagen::CorruptionConfig corruption() const;
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
    f("steps_basic", s.steps_basic);
    f("steps_align", s.steps_align);
    f("steps_refine", s.steps_refine);
    f("steps_freeze", s.steps_freeze);
    f("steps_unfreeze", s.steps_unfreeze);
    f("batch_size", s.batch_size);
    f("lr_max", s.lr_max);
    f("lr_min", s.lr_min);
    f("weight_decay", s.weight_decay);
    f("clip_norm", s.clip_norm);
    f("subsample_min", s.subsample_min);
    f("subsample_max", s.subsample_max);
    f("min_finite", s.min_finite);
    f("permute_vars", s.permute_vars);
    f("p_drop", s.p_drop);
    f("p_swap", s.p_swap);
    f("log_every", s.log_every);
    f("val_examples", s.val_examples);
    f("skip_window", s.skip_window);
    f("skip_limit", s.skip_limit);
    f("seed", s.seed);
  }
};

/// One training record: framed tokens and its scatter.
struct Example {
  expr::TokenSeq tokens;
  datagen::ScatterSet scatter;
};

/// Examples of one split. Records with too few finite rows or a framed
/// sequence longer than max_len are dropped and counted.
std::vector<Example> make_examples(const datagen::Corpus& corpus, datagen::Split split, const TrainConfig& cfg,
                                   int max_len, std::size_t* dropped = nullptr);

/// Row subsampling and, for k >= 2, a random relabelling of the variables
/// applied to tokens and columns alike.
Example augment(const Example& ex, const TrainConfig& cfg, Rng& rng);

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct LossTerms {
  double expr = kNotComputed;
  double eval = kNotComputed;
  double kl = kNotComputed;
  double align = kNotComputed;
  double refine = kNotComputed;
  double total = kNotComputed;
  std::size_t empty_eval_sets = 0;
};

struct BatchLoss {
  Tensor total;
  LossTerms terms;
};

/// Weighted objective of one batch. Terms with zero weight are not built.
/// With `sample_rng` latents are sampled and dropout is live; without it
/// encoding is deterministic. `corrupt_rng` drives the refinement corruption.
BatchLoss batch_loss(const model::Model& m, std::span<const Example> batch, const LossWeights& w,
                     const datagen::CorruptionConfig& corruption, Rng* sample_rng, Rng& corrupt_rng);

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainSummary {
  long steps = 0;
  long skipped_steps = 0;
  std::size_t empty_eval_sets = 0;
  LossTerms last_train, last_val;
};

class Trainer {
 public:
  Trainer(model::Model& m, TrainConfig cfg);

  /// One optimizer update on `batch`. Returns the terms; `skipped` is set
  /// when the total was non-finite and no parameter moved.
  LossTerms step(std::span<const Example> batch, const Phase& phase, double lr, bool* skipped = nullptr);
  /// Deterministic, dropout-free losses.
  LossTerms validate(std::span<const Example> batch, const LossWeights& w) const;

  /// Full schedule. Writes newline-delimited JSON metrics to `log` when given.
  TrainSummary run(std::span<const Example> train, std::span<const Example> val, std::ostream* log = nullptr);

  tensor::AdamW& optimizer() { return opt_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  void note_step(bool skipped, long step);

  model::Model& model_;
  TrainConfig cfg_;
  datagen::CorruptionConfig corruption_;
  tensor::AdamW opt_;
  Rng sample_rng_, corrupt_rng_;
  std::deque<char> window_;
  long window_skipped_ = 0;
  long skipped_total_ = 0;
};

}  // namespace lee::train
