#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fd_check.hpp"
#include "lee/datagen/grammar.hpp"
#include "lee/expr/codec.hpp"
#include "lee/model/checkpoint.hpp"
#include "lee/model/model.hpp"

using namespace lee;
using namespace lee::model;
using expr::Token;
using lee::testing::grad_check;
using namespace lee::tensor;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.d_enc = c.d_expr = c.d_eval = 16;
  c.enc_heads = c.expr_heads = c.eval_heads = 2;
  c.enc_layers = c.expr_layers = c.eval_layers = 1;
  c.ffn_mult = 2;
  c.numeric_hidden = 16;
  c.d_z = 8;
  c.max_len = 24;
  return c;
}

datagen::ScatterSet scatter_for(const expr::Expr& e, int k, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return datagen::sample_scatter(e, rng, n, k, datagen::GrammarConfig{});
}

expr::Expr sin_x0() { return expr::Expr::unary(expr::Op::Sin, expr::Expr::variable(0)); }

}  // namespace

TEST_CASE("log compression") {
  CHECK(compress(0.0) == 0.0);
  CHECK(std::fabs(compress(std::numbers::e - 1.0) - 1.0) < 1e-15);
  CHECK(std::fabs(compress(99.0) - 4.605170185988091) < 1e-12);
  CHECK(std::fabs(compress(99.0) / 4.0 - 1.1512925464970228) < 1e-12);
  CHECK(compress(-99.0) == -compress(99.0));
}

TEST_CASE("encoder determinism and scatter-only equivalence") {
  Model m(tiny(), 1);
  const auto s = scatter_for(sin_x0(), 1, 30, 2);
  const auto tokens = expr::tokenize(sin_x0());
  const Latent a = m.encode_one(tokens, s, false, nullptr);
  const Latent b = m.encode_one(tokens, s, false, nullptr);
  CHECK(a.z == b.z);
  CHECK(a.z == a.mu);
  const expr::TokenSeq pads(7, Token::Pad);
  const Latent only = m.encode_one({}, s, false, nullptr);
  const Latent padded = m.encode_one(pads, s, false, nullptr);
  CHECK(only.mu == padded.mu);
  CHECK(only.log_var == padded.log_var);
  CHECK_THROWS_AS(m.encode_one(tokens, datagen::ScatterSet{}, false, nullptr), std::invalid_argument);
}

TEST_CASE("untrained sigma is one, so KL is half the squared mean") {
  Model m(tiny(), 3);
  const auto s = scatter_for(sin_x0(), 1, 20, 4);
  const Latent l = m.encode_one(expr::tokenize(sin_x0()), s, false, nullptr);
  double kl = 0.0, half_mu2 = 0.0;
  for (std::size_t i = 0; i < l.mu.size(); ++i) {
    CHECK(l.log_var[i] == 0.0);
    kl += 0.5 * (l.mu[i] * l.mu[i] + std::exp(l.log_var[i]) - l.log_var[i] - 1.0);
    half_mu2 += 0.5 * l.mu[i] * l.mu[i];
  }
  CHECK(std::fabs(kl - half_mu2) < 1e-12);
}

TEST_CASE("generation") {
  Model m(tiny(), 5);
  Rng rng(6);
  Matrix z(3, 8);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  const std::vector<double> greedy(3, 0.0);
  auto g1 = m.generate(z, greedy, rng);
  auto g2 = m.generate(z, greedy, rng);
  for (int i = 0; i < 3; ++i) {
    CHECK(g1[i].tokens == g2[i].tokens);
    CHECK(g1[i].tokens.front() == Token::Bos);
    for (Token t : g1[i].tokens) CHECK(t != Token::Pad);
    CHECK((g1[i].truncated || g1[i].tokens.back() == Token::Eos));
    if (g1[i].truncated) CHECK(g1[i].tokens.size() == 24);
  }
  // Very low temperature collapses onto the greedy path.
  const std::vector<double> cold(3, 1e-6);
  auto g3 = m.generate(z, cold, rng);
  for (int i = 0; i < 3; ++i) CHECK(g3[i].tokens == g1[i].tokens);
  auto short_run = m.generate(z, greedy, rng, 5);
  for (const auto& g : short_run) CHECK(g.tokens.size() <= 5);
}

TEST_CASE("eval decoder shape and query permutation equivariance") {
  Model m(tiny(), 7);
  Rng rng(8);
  std::vector<double> z(8);
  for (double& v : z) v = rng.normal();
  std::vector<double> q(2 * 9);
  for (double& v : q) v = rng.uniform(-10, 10);
  const auto y = m.eval_one(z, {q, 9, 2});
  CHECK(y.size() == 9);
  std::vector<std::size_t> perm = {3, 0, 8, 1, 2, 7, 5, 4, 6};
  std::vector<double> qp(q.size());
  for (std::size_t i = 0; i < 9; ++i) {
    qp[2 * i] = q[2 * perm[i]];
    qp[2 * i + 1] = q[2 * perm[i] + 1];
  }
  const auto yp = m.eval_one(z, {qp, 9, 2});
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::fabs(yp[i] - y[perm[i]]) <= 1e-12 * std::max(1.0, std::fabs(y[perm[i]])));
}

TEST_CASE("gradient w.r.t. z through the eval decoder") {
  Model m(tiny(), 9);
  Rng rng(10);
  std::vector<double> q(12);
  for (double& v : q) v = rng.uniform(-3, 3);
  std::vector<double> target(12);
  for (double& v : target) v = rng.normal();
  const expr::MatrixView view{q, 12, 1};
  auto zt = Tensor::variable(lee::testing::random_matrix(rng, 1, 8));
  FreezeParamsGuard freeze;
  auto r = grad_check({zt}, [&](const std::vector<Tensor>& l) {
    const Tensor y = m.eval(l[0], std::span<const expr::MatrixView>(&view, 1));
    Matrix t = Eigen::Map<const Matrix>(target.data(), 12, 1);
    return sum(square(sub(y, Tensor::constant(t))));
  });
  CHECK(r.max_rel < 1e-4);
  for (const auto& p : m.params()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("end-to-end gradients are finite") {
  Model m(tiny(), 11);
  Rng rng(12);
  const auto s = scatter_for(sin_x0(), 1, 16, 13);
  const auto tokens = expr::tokenize(sin_x0());
  const EncodeItem item{tokens, &s};
  const Gaussian g = m.encode(std::span<const EncodeItem>(&item, 1));
  const Tensor z = m.reparameterize(g, rng);
  const auto view = s.view();
  const Tensor y = m.eval(z, std::span<const expr::MatrixView>(&view, 1));
  const ExprLogits lg = m.expr_logits(z, std::span<const expr::TokenSeq>(&tokens, 1));
  backward(add(sum(y), cross_entropy(lg.logits, lg.targets, lg.mask)));
  std::size_t with_grad = 0;
  for (const auto& p : m.params()) {
    if (!p.tensor.has_grad()) continue;
    ++with_grad;
    CHECK(p.tensor.grad().allFinite());
  }
  CHECK(with_grad > m.params().size() / 2);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = tiny();
  Model m(cfg, 14);
  const auto path = std::filesystem::temp_directory_path() / "lee_ckpt_test.bin";
  save_checkpoint(m, path, 14, "seed = 14\n");
  CheckpointInfo info;
  auto back = load_checkpoint(path, &info);
  CHECK(info.provenance == "seed = 14\n");
  CHECK(info.config.d_z == cfg.d_z);
  REQUIRE(back->params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const Matrix& a = m.params()[i].tensor.value();
    const Matrix& b = back->params()[i].tensor.value();
    CHECK(m.params()[i].name == back->params()[i].name);
    CHECK((a.cast<float>().cast<double>() - b).cwiseAbs().maxCoeff() == 0.0);
  }
  // Corrupt the magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}
