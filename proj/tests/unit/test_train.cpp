#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "lee/datagen/grammar.hpp"
#include "lee/expr/codec.hpp"
#include "lee/train/trainer.hpp"

using namespace lee;
using namespace lee::train;
using namespace lee::tensor;

namespace {

model::ModelConfig tiny() {
  model::ModelConfig c;
  c.d_enc = c.d_expr = c.d_eval = 16;
  c.enc_heads = c.expr_heads = c.eval_heads = 2;
  c.enc_layers = c.expr_layers = c.eval_layers = 1;
  c.ffn_mult = 2;
  c.numeric_hidden = 16;
  c.d_z = 8;
  c.max_len = 40;
  return c;
}

std::vector<Example> small_batch(std::uint64_t seed, std::size_t n, int rows) {
  Rng rng(seed);
  datagen::GrammarConfig g;
  g.b_max = 2;
  g.k_max = 2;
  std::vector<Example> out;
  while (out.size() < n) {
    const int k = rng.uniform_int(1, 2);
    const auto e = expr::parse(expr::tokenize(datagen::sample_expression(rng, g, k)));
    auto tokens = expr::tokenize(e);
    if (tokens.size() > 40) continue;
    out.push_back({tokens, datagen::sample_scatter(e, rng, static_cast<std::size_t>(rows), k, g)});
  }
  return out;
}

double scalar_eval_loss(double y_hat, double y) {
  const double yv[] = {y};
  const Index off[] = {0, 1};
  return loss_eval(Tensor::constant(Matrix::Constant(1, 1, y_hat)), yv, off).value.item();
}

model::Gaussian gaussian(const Matrix& mu, const Matrix& lv) { return {Tensor::variable(mu), Tensor::variable(lv)}; }

}  // namespace

TEST_CASE("scale-invariant MAE hand cases") {
  CHECK(scalar_eval_loss(3.0, 2.0) == 0.5);
  CHECK(scalar_eval_loss(0.2, 0.1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(scalar_eval_loss(0.2, 0.1) == std::fabs(0.2 - 0.1));
  CHECK(scalar_eval_loss(7.0, 7.0) == 0.0);
}

TEST_CASE("loss_eval masks non-finite rows and counts empty sets") {
  const double nan = std::nan("");
  const std::vector<double> y = {2.0, nan, 4.0, nan, nan};
  const std::vector<Index> off = {0, 3, 5};
  Matrix pred(5, 1);
  pred << 3.0, 1e300, 2.0, 5.0, 6.0;
  const EvalLoss l = loss_eval(Tensor::constant(pred), y, off);
  CHECK(l.empty_sets == 1);
  // item 0: (0.5 + 0.5)/2, item 1 contributes 0; mean over 2 items
  CHECK(l.value.item() == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> all_nan = {nan, nan};
  const std::vector<Index> off2 = {0, 2};
  const EvalLoss none = loss_eval(Tensor::constant(Matrix::Zero(2, 1)), all_nan, off2);
  CHECK(none.empty_sets == 1);
  CHECK(none.value.item() == 0.0);
}

TEST_CASE("KL to the standard normal") {
  CHECK(loss_kl(gaussian(Matrix::Zero(1, 4), Matrix::Zero(1, 4))).item() == 0.0);
  CHECK(loss_kl(gaussian(Matrix::Ones(1, 1), Matrix::Zero(1, 1))).item() == 0.5);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    Matrix mu(3, 5), lv(3, 5);
    for (Index i = 0; i < mu.size(); ++i) {
      mu.data()[i] = 3 * rng.normal();
      lv.data()[i] = rng.uniform(-8, 4);
    }
    CHECK(loss_kl(gaussian(mu, lv)).item() >= 0.0);
  }
}

TEST_CASE("alignment KL matches the general Gaussian closed form") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Index d = 6;
    Matrix mq(1, d), lq(1, d), mp(1, d), lp(1, d);
    for (Index i = 0; i < d; ++i) {
      mq(0, i) = rng.normal();
      mp(0, i) = rng.normal();
      lq(0, i) = rng.uniform(-3, 2);
      lp(0, i) = rng.uniform(-3, 2);
    }
    // Dense-matrix form: 0.5 [tr(Sp^-1 Sq) + dm' Sp^-1 dm - d + ln det Sp - ln det Sq]
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(d, d), sp = Eigen::MatrixXd::Zero(d, d);
    for (Index i = 0; i < d; ++i) {
      sq(i, i) = std::exp(lq(0, i));
      sp(i, i) = std::exp(lp(0, i));
    }
    const Eigen::VectorXd dm = (mp - mq).transpose();
    const Eigen::MatrixXd sp_inv = sp.inverse();
    const double ref = 0.5 * ((sp_inv * sq).trace() + dm.dot(sp_inv * dm) - static_cast<double>(d) +
                              std::log(sp.determinant()) - std::log(sq.determinant()));
    const double got = loss_align(gaussian(mq, lq), gaussian(mp, lp)).item();
    CHECK(got == doctest::Approx(ref).epsilon(1e-12));
  }
  const Matrix mu = Matrix::Constant(2, 3, 0.7), lv = Matrix::Constant(2, 3, -0.3);
  CHECK(loss_align(gaussian(mu, lv), gaussian(mu, lv)).item() == 0.0);
}

TEST_CASE("alignment gradient never reaches the scatter-only branch") {
  Rng rng(3);
  Matrix mq(2, 4), mp(2, 4);
  for (Index i = 0; i < mq.size(); ++i) {
    mq.data()[i] = rng.normal();
    mp.data()[i] = rng.normal();
  }
  const auto q = gaussian(mq, Matrix::Zero(2, 4));
  const auto p = gaussian(mp, Matrix::Constant(2, 4, 0.5));
  backward(loss_align(q, p));
  CHECK(q.mu.has_grad());
  CHECK(q.log_var.has_grad());
  CHECK_FALSE(p.mu.has_grad());
  CHECK_FALSE(p.log_var.has_grad());

  // Same contract through the shared encoder: only the posterior branch
  // contributes parameter gradient.
  model::Model m(tiny(), 4);
  const auto batch = small_batch(5, 3, 24);
  std::vector<model::EncodeItem> joint, only;
  for (const auto& ex : batch) {
    joint.push_back({ex.tokens, &ex.scatter});
    only.push_back({{}, &ex.scatter});
  }
  const model::Gaussian gp = m.encode(only);
  backward(loss_align(m.encode(joint), gp));
  std::vector<Matrix> with_p;
  for (const auto& par : m.params()) with_p.push_back(par.tensor.has_grad() ? par.tensor.grad() : Matrix());
  for (const auto& par : m.params()) const_cast<Tensor&>(par.tensor).zero_grad();
  model::Gaussian gp_const;
  {
    NoGradGuard ng;
    gp_const = m.encode(only);
  }
  backward(loss_align(m.encode(joint), gp_const));
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const Tensor& t = m.params()[i].tensor;
    REQUIRE(t.has_grad() == (with_p[i].size() != 0));
    if (t.has_grad()) CHECK(t.grad() == with_p[i]);
  }
}

TEST_CASE("loss_expr masking") {
  model::Model m(tiny(), 6);
  auto batch = small_batch(7, 4, 16);
  std::vector<expr::TokenSeq> targets;
  for (const auto& ex : batch) targets.push_back(ex.tokens);
  Matrix z = Matrix::Random(4, 8);
  const double base = loss_expr(m.expr_logits(Tensor::constant(z), targets)).item();
  // Trailing PAD targets change nothing.
  auto padded = targets;
  for (auto& t : padded) t.insert(t.end(), 3, expr::Token::Pad);
  const double with_pad = loss_expr(m.expr_logits(Tensor::constant(z), padded)).item();
  CHECK(with_pad == doctest::Approx(base).epsilon(1e-12));
  model::ExprLogits all_pad;
  all_pad.logits = Tensor::constant(Matrix::Zero(2, expr::kVocabSize));
  all_pad.targets = {0, 0};
  all_pad.mask = {0, 0};
  CHECK_THROWS(loss_expr(all_pad));
}

TEST_CASE("refinement with zero corruption equals the reconstruction loss") {
  model::Model m(tiny(), 8);
  auto batch = small_batch(9, 4, 20);
  std::vector<expr::TokenSeq> clean;
  std::vector<const datagen::ScatterSet*> sc;
  std::vector<model::EncodeItem> items;
  for (const auto& ex : batch) {
    clean.push_back(ex.tokens);
    sc.push_back(&ex.scatter);
    items.push_back({ex.tokens, &ex.scatter});
  }
  Rng rng(10);
  datagen::CorruptionConfig none{0.0, 0.0, 1.0};
  std::vector<expr::TokenSeq> corrupted;
  for (const auto& t : clean) corrupted.push_back(datagen::corrupt(t, rng, none));
  const double refine = loss_refine(m, corrupted, sc, clean, nullptr).item();
  const double expr_loss = loss_expr(m.expr_logits(m.encode(items).mu, clean)).item();
  CHECK(refine == expr_loss);
}

TEST_CASE("phase table") {
  const auto& w = phase_weights();
  CHECK(w[0] == LossWeights{1.0, 5.0, 0.001, 0.0, 0.0});
  CHECK(w[1] == LossWeights{1.0, 5.0, 0.001, 2.0, 0.0});
  CHECK(w[2] == LossWeights{1.0, 5.0, 0.001, 2.0, 1.0});
  CHECK(w[3] == LossWeights{0.0, 0.0, 0.001, 5.0, 0.0});
  CHECK(w[4] == LossWeights{1.0, 5.0, 0.001, 2.0, 1.0});
  const auto full = PhasePlan::full_scale();
  CHECK(full.total_steps() == 200000);
  CHECK(full.phases[3].freeze_decoders);
  for (std::size_t i : {0, 1, 2, 4}) CHECK_FALSE(full.phases[i].freeze_decoders);
  const auto desk = PhasePlan::desk();
  CHECK(desk.total_steps() == 20000);
  CHECK(desk.phase_at(0) == 0);
  CHECK(desk.phase_at(4999) == 0);
  CHECK(desk.phase_at(5000) == 1);
  CHECK(desk.phase_at(19999) == 4);
  CHECK(desk.phase_at(50000) == 4);
}

TEST_CASE("total is the weighted sum of the recomputed terms") {
  model::Model m(tiny(), 11);
  const auto batch = small_batch(12, 4, 24);
  TrainConfig tc;
  for (const auto& w : phase_weights()) {
    Rng c1(13), c2(13);
    const BatchLoss bl = batch_loss(m, batch, w, tc.corruption(), nullptr, c1);
    // Each term again, separately.
    std::vector<model::EncodeItem> joint, only;
    std::vector<expr::TokenSeq> targets;
    std::vector<const datagen::ScatterSet*> sc;
    std::vector<expr::MatrixView> views;
    std::vector<double> y;
    std::vector<Index> off{0};
    for (const auto& ex : batch) {
      joint.push_back({ex.tokens, &ex.scatter});
      only.push_back({{}, &ex.scatter});
      targets.push_back(ex.tokens);
      sc.push_back(&ex.scatter);
      views.push_back(ex.scatter.view());
      y.insert(y.end(), ex.scatter.y.begin(), ex.scatter.y.end());
      off.push_back(off.back() + static_cast<Index>(ex.scatter.rows()));
    }
    const auto q = m.encode(joint);
    double expect = 0.0;
    if (w.expr) expect += w.expr * loss_expr(m.expr_logits(q.mu, targets)).item();
    if (w.eval) expect += w.eval * loss_eval(m.eval(q.mu, views), y, off).value.item();
    expect += w.kl * loss_kl(q).item();
    if (w.align) expect += w.align * loss_align(q, m.encode(only)).item();
    if (w.refine) {
      std::vector<expr::TokenSeq> corrupted;
      for (const auto& t : targets) corrupted.push_back(datagen::corrupt(t, c2, tc.corruption()));
      expect += w.refine * loss_refine(m, corrupted, sc, targets, nullptr).item();
    }
    CHECK(bl.terms.total == doctest::Approx(expect).epsilon(1e-6));
    CHECK(std::isnan(bl.terms.align) == (w.align == 0.0));
  }
}

TEST_CASE("freeze phase leaves decoders untouched") {
  model::Model m(tiny(), 14);
  TrainConfig tc;
  tc.weight_decay = 0.01;
  Trainer tr(m, tc);
  const auto batch = small_batch(15, 4, 24);
  const auto plan = tc.plan();
  tr.step(batch, plan.phases[0], 1e-3);  // give the optimizer state for every group
  std::vector<Matrix> before;
  for (const auto& p : m.params()) before.push_back(p.tensor.value());
  for (int s = 0; s < 5; ++s) tr.step(batch, plan.phases[3], 1e-3);
  std::size_t enc_changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& p = m.params()[i];
    if (p.group == model::Group::Encoder) {
      enc_changed += p.tensor.value() != before[i];
    } else {
      CHECK_MESSAGE(p.tensor.value() == before[i], p.name);
    }
  }
  CHECK(enc_changed > 0);
}

TEST_CASE("augmentation keeps the expression and the scatter paired") {
  const auto batch = small_batch(16, 20, 200);
  TrainConfig tc;
  Rng rng(17);
  for (const auto& ex : batch) {
    const Example a = augment(ex, tc, rng);
    CHECK(a.scatter.rows() >= 128);
    CHECK(a.scatter.rows() <= 200);
    const auto e = expr::parse(a.tokens);
    const auto y = expr::evaluate(e, a.scatter.view()).y;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (std::isfinite(a.scatter.y[i])) CHECK(y[i] == a.scatter.y[i]);
    }
  }
}

TEST_CASE("training run writes metrics and aborts on persistent non-finite losses") {
  model::Model m(tiny(), 18);
  TrainConfig tc;
  tc.steps_basic = 3;
  tc.steps_align = tc.steps_refine = tc.steps_freeze = tc.steps_unfreeze = 1;
  tc.batch_size = 2;
  tc.subsample_min = tc.subsample_max = 16;
  tc.log_every = 2;
  const auto data = small_batch(19, 6, 40);
  std::ostringstream log;
  Trainer tr(m, tc);
  const auto summary = tr.run(data, std::span(data).subspan(0, 2), &log);
  CHECK(summary.steps == 7);
  CHECK(summary.skipped_steps == 0);
  std::istringstream lines(log.str());
  std::string line;
  int records = 0;
  while (std::getline(lines, line)) {
    ++records;
    CHECK(line.find("\"loss_expr\"") != std::string::npos);
    CHECK(line.find("\"lr\"") != std::string::npos);
  }
  CHECK(records >= 10);

  // A poisoned parameter makes every step non-finite and trips the window.
  model::Model bad(tiny(), 20);
  for (const auto& p : bad.params()) {
    if (p.name.find("mu") != std::string::npos) const_cast<Tensor&>(p.tensor).mutable_value().setConstant(std::nan(""));
  }
  TrainConfig tb = tc;
  tb.skip_window = 10;
  Trainer tr_bad(bad, tb);
  CHECK_THROWS_AS(tr_bad.run(data, {}, nullptr), TrainingAborted);
}
