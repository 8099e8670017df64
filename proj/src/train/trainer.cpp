#include "lee/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include "json.hpp"

#include "lee/expr/codec.hpp"

namespace lee::train {

using namespace lee::tensor;
using model::Gaussian;

PhasePlan TrainConfig::plan() const {
  return PhasePlan::standard({steps_basic, steps_align, steps_refine, steps_freeze, steps_unfreeze});
}

datagen::CorruptionConfig TrainConfig::corruption() const {
  datagen::CorruptionConfig c;
  c.p_drop = p_drop;
  c.p_swap = p_swap;
  c.p_keep = 1.0 - p_drop - p_swap;
  return c;
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(batch_size >= 1, "train.batch_size must be >= 1");
  need(lr_max > 0 && lr_min >= 0 && lr_min <= lr_max, "train: need 0 <= lr_min <= lr_max, lr_max > 0");
  need(subsample_min >= 1 && subsample_min <= subsample_max, "train: need 1 <= subsample_min <= subsample_max");
  need(min_finite >= 1, "train.min_finite must be >= 1");
  need(log_every >= 1, "train.log_every must be >= 1");
  need(skip_window >= 1 && skip_limit >= 0, "train: bad skip window");
  need(clip_norm >= 0 && weight_decay >= 0, "train: clip_norm and weight_decay must be >= 0");
  corruption().validate();
}

std::vector<Example> make_examples(const datagen::Corpus& corpus, datagen::Split split, const TrainConfig& cfg,
                                   int max_len, std::size_t* dropped) {
  std::vector<Example> out;
  std::size_t skipped = 0;
  for (const auto* r : corpus.split(split)) {
    expr::TokenSeq tokens = expr::tokenize(expr::parse_text(r->text));
    if (r->scatter.finite_count() < static_cast<std::size_t>(cfg.min_finite) ||
        static_cast<int>(tokens.size()) > max_len) {
      ++skipped;
      continue;
    }
    out.push_back({std::move(tokens), r->scatter});
  }
  if (dropped) *dropped = skipped;
  return out;
}

Example augment(const Example& ex, const TrainConfig& cfg, Rng& rng) {
  Example out;
  const int n = rng.uniform_int(cfg.subsample_min, cfg.subsample_max);
  const auto rows = rng.sample_without_replacement(ex.scatter.rows(), static_cast<std::size_t>(n));
  out.scatter = ex.scatter.select_rows(rows);
  out.tokens = ex.tokens;
  if (cfg.permute_vars && ex.scatter.k >= 2) {
    std::vector<int> perm(ex.scatter.k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    out.tokens = datagen::permute_tokens(out.tokens, perm);
    out.scatter = datagen::permute_columns(out.scatter, perm);
  }
  return out;
}

BatchLoss batch_loss(const model::Model& m, std::span<const Example> batch, const LossWeights& w,
                     const datagen::CorruptionConfig& corruption, Rng* sample_rng, Rng& corrupt_rng) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  std::vector<model::EncodeItem> joint, scatter_only;
  std::vector<expr::TokenSeq> targets;
  std::vector<const datagen::ScatterSet*> scatters;
  for (const auto& ex : batch) {
    joint.push_back({ex.tokens, &ex.scatter});
    scatter_only.push_back({{}, &ex.scatter});
    targets.push_back(ex.tokens);
    scatters.push_back(&ex.scatter);
  }

  BatchLoss out;
  Tensor total = Tensor::scalar(0.0);
  auto accumulate = [&](double weight, const Tensor& term, double& slot) {
    slot = term.item();
    total = add(total, scale(term, weight));
  };

  const bool need_z = w.expr != 0.0 || w.eval != 0.0;
  const Gaussian q = m.encode(joint, sample_rng);
  if (need_z) {
    const Tensor z = sample_rng ? m.reparameterize(q, *sample_rng) : q.mu;
    if (w.expr != 0.0) accumulate(w.expr, loss_expr(m.expr_logits(z, targets, sample_rng)), out.terms.expr);
    if (w.eval != 0.0) {
      std::vector<expr::MatrixView> queries;
      std::vector<double> y;
      std::vector<Index> offsets{0};
      for (const auto& ex : batch) {
        queries.push_back(ex.scatter.view());
        y.insert(y.end(), ex.scatter.y.begin(), ex.scatter.y.end());
        offsets.push_back(offsets.back() + static_cast<Index>(ex.scatter.rows()));
      }
      const EvalLoss le = loss_eval(m.eval(z, queries, sample_rng), y, offsets);
      out.terms.empty_eval_sets = le.empty_sets;
      accumulate(w.eval, le.value, out.terms.eval);
    }
  }
  if (w.kl != 0.0) accumulate(w.kl, loss_kl(q), out.terms.kl);
  if (w.align != 0.0) {
    // The scatter-only branch is a stop-gradient target; no graph needed.
    Gaussian p;
    {
      NoGradGuard no_grad;
      p = m.encode(scatter_only, sample_rng);
    }
    accumulate(w.align, loss_align(q, p), out.terms.align);
  }
  if (w.refine != 0.0) {
    std::vector<expr::TokenSeq> corrupted;
    for (const auto& ex : batch) corrupted.push_back(datagen::corrupt(ex.tokens, corrupt_rng, corruption));
    accumulate(w.refine, loss_refine(m, corrupted, scatters, targets, sample_rng), out.terms.refine);
  }
  out.terms.total = total.item();
  out.total = total;
  return out;
}

Trainer::Trainer(model::Model& m, TrainConfig cfg)
    : model_(m),
      cfg_(cfg),
      corruption_(cfg.corruption()),
      opt_(m.param_tensors(), AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay}),
      sample_rng_(mix_seed(cfg.seed, seed_stream::kInit)),
      corrupt_rng_(mix_seed(cfg.seed, seed_stream::kData)) {
  cfg_.validate();
}

LossTerms Trainer::step(std::span<const Example> batch, const Phase& phase, double lr, bool* skipped) {
  opt_.zero_grad();
  const BatchLoss bl = batch_loss(model_, batch, phase.weights, corruption_, &sample_rng_, corrupt_rng_);
  const bool bad = !std::isfinite(bl.terms.total);
  if (skipped) *skipped = bad;
  if (bad) return bl.terms;
  backward(bl.total);

  std::vector<char> active(opt_.params().size(), 1);
  if (phase.freeze_decoders) active = model_.group_mask(model::Group::Encoder);
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Tensor& p = opt_.params()[i];
      if (active[i] && p.has_grad()) sq += p.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (std::isfinite(norm) && norm > cfg_.clip_norm) {
      const double f = cfg_.clip_norm / norm;
      for (const auto& p : opt_.params()) {
        if (p.has_grad()) p.node()->grad *= f;
      }
    }
  }
  opt_.step(lr, &active);
  opt_.zero_grad();
  return bl.terms;
}

LossTerms Trainer::validate(std::span<const Example> batch, const LossWeights& w) const {
  NoGradGuard no_grad;
  Rng corrupt(mix_seed(cfg_.seed, seed_stream::kScoring));
  return batch_loss(model_, batch, w, corruption_, nullptr, corrupt).terms;
}

void Trainer::note_step(bool skipped, long step) {
  window_.push_back(skipped);
  window_skipped_ += skipped;
  skipped_total_ += skipped;
  if (static_cast<int>(window_.size()) > cfg_.skip_window) {
    window_skipped_ -= window_.front();
    window_.pop_front();
  }
  if (static_cast<double>(window_skipped_) > cfg_.skip_limit * cfg_.skip_window) {
    throw TrainingAborted(fmt::format(
        "training aborted at step {}: {} of the last {} steps had a non-finite loss ({} skipped in total)", step,
        window_skipped_, window_.size(), skipped_total_));
  }
}

namespace {

nlohmann::json metrics_record(long step, const std::string& phase, const char* split, const LossTerms& t,
                              double lr) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"step", step},           {"phase", phase},           {"split", split},
          {"loss_expr", num(t.expr)}, {"loss_eval", num(t.eval)}, {"loss_kl", num(t.kl)},
          {"loss_align", num(t.align)}, {"loss_refine", num(t.refine)}, {"total", num(t.total)},
          {"lr", lr}};
}

}  // namespace

TrainSummary Trainer::run(std::span<const Example> train, std::span<const Example> val, std::ostream* log) {
  if (train.empty()) throw std::invalid_argument("train: no usable training examples");
  const PhasePlan plan = cfg_.plan();
  const long total = plan.total_steps();
  Rng data_rng(mix_seed(cfg_.seed, seed_stream::kShuffle));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::span<const Example> val_set = val.subspan(0, std::min<std::size_t>(val.size(), cfg_.val_examples));

  TrainSummary summary;
  std::vector<Example> batch;
  for (long s = 0; s < total; ++s) {
    const Phase& phase = plan.phases[plan.phase_at(s)];
    const double lr = cosine_lr(s, total, cfg_.lr_max, cfg_.lr_min);
    batch.clear();
    for (int b = 0; b < cfg_.batch_size; ++b) {
      if (cursor == order.size()) {
        data_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(augment(train[order[cursor++]], cfg_, data_rng));
    }
    bool skipped = false;
    summary.last_train = step(batch, phase, lr, &skipped);
    summary.empty_eval_sets += summary.last_train.empty_eval_sets;
    note_step(skipped, s);
    summary.steps = s + 1;

    const bool boundary = s + 1 == total || plan.phase_at(s + 1) != plan.phase_at(s);
    if ((s + 1) % cfg_.log_every == 0 || boundary) {
      if (log) *log << metrics_record(s + 1, phase.name, "train", summary.last_train, lr).dump() << '\n';
      if (!val_set.empty()) {
        summary.last_val = validate(val_set, phase.weights);
        if (log) *log << metrics_record(s + 1, phase.name, "val", summary.last_val, lr).dump() << '\n';
      }
      if (log) log->flush();
    }
  }
  summary.skipped_steps = skipped_total_;
  return summary;
}

}  // namespace lee::train
