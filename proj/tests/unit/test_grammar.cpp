#include "doctest.h"

#include <cmath>
#include <numbers>

#include "lee/datagen/grammar.hpp"
#include "lee/expr/codec.hpp"

using namespace lee;
using namespace lee::datagen;
using expr::Expr;
using expr::Op;
using expr::Token;

namespace {
int count_ops(const Expr& e, int want_arity) {
  int n = 0;
  expr::visit_prefix(e, [&](const Expr& node) {
    if (!node.is_leaf() && expr::arity(node.op()) == want_arity) ++n;
  });
  return n;
}
}  // namespace

TEST_CASE("config validation") {
  GrammarConfig g;
  CHECK_NOTHROW(g.validate());
  g.p_integer = 0.7;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = GrammarConfig{};
  g.b_max = 0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  CorruptionConfig c;
  CHECK_NOTHROW(c.validate());
  c.p_keep = 0.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("constant mixture frequencies") {
  Rng rng(1);
  GrammarConfig cfg;
  const auto& cat = physics_constants();
  CHECK(std::find(cat.begin(), cat.end(), std::numbers::pi) != cat.end());
  CHECK(std::find(cat.begin(), cat.end(), std::numbers::e) != cat.end());
  // Classify draws: integers, catalogue entries, log-uniform magnitudes.
  const int n = 1'000'000;
  int integers = 0, catalogue = 0, loguni = 0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_constant(rng, cfg);
    if (std::find(cat.begin(), cat.end(), v) != cat.end() && v != 0.5) {
      ++catalogue;
    } else if (v == std::round(v) && std::fabs(v) <= 10) {
      ++integers;
    } else {
      ++loguni;
      REQUIRE(std::fabs(v) >= 0.01);
      REQUIRE(std::fabs(v) <= 100);
    }
  }
  // 0.5 is left in the log-uniform bucket: 6/7 of catalogue draws are counted here.
  const double fi = static_cast<double>(integers) / n;
  CHECK(fi >= 0.59);
  CHECK(fi <= 0.61);
  // chi-square over three cells (catalogue cell uses its identifiable share).
  const double pc = 0.1 * 6.0 / 7.0;
  const double expected[3] = {0.6 * n, pc * n, (1.0 - 0.6 - pc) * n};
  const double observed[3] = {double(integers), double(catalogue), double(loguni)};
  double chi2 = 0;
  for (int i = 0; i < 3; ++i) chi2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  CHECK(chi2 < 9.21);  // p > 0.01 at 2 dof
}

TEST_CASE("sampled expressions respect caps and cover variables") {
  GrammarConfig cfg;
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    SampleStats stats;
    const Expr e = sample_expression(rng, cfg, 3, &stats);
    CHECK(count_ops(e, 2) >= 1);
    CHECK(count_ops(e, 2) <= cfg.b_max);
    CHECK(count_ops(e, 1) <= cfg.u_max);
    bool seen[3] = {false, false, false};
    expr::visit_prefix(e, [&](const Expr& n) {
      if (n.is_variable()) seen[n.variable_index()] = true;
    });
    REQUIRE((seen[0] && seen[1] && seen[2]));
    CHECK_FALSE(stats.coverage_relaxed);
  }
}

TEST_CASE("sampling is deterministic per seed") {
  GrammarConfig cfg;
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 50; ++i) {
    const Expr ea = sample_expression(a, cfg, 2);
    CHECK(ea == sample_expression(b, cfg, 2));
    differs |= !(ea == sample_expression(c, cfg, 2));
  }
  CHECK(differs);
}

TEST_CASE("query grid size") {
  CHECK(query_grid(1, -10, 10).size() == 64);
  CHECK(query_grid(2, -10, 10).size() == 32 * 32 * 2);
  CHECK(query_grid(3, -10, 10).size() == 10 * 10 * 10 * 3);
}

TEST_CASE("scatter sampling") {
  GrammarConfig cfg;
  Rng rng(4);
  auto s = sample_scatter(Expr::constant(5), rng, 50, 1, cfg);
  for (double y : s.y) CHECK(y == 5.0);
  auto s2 = sample_scatter(Expr::variable(1), rng, 200, 2, cfg);
  CHECK(s2.rows() == 200);
  CHECK(s2.x.size() == 400);
  for (double v : s2.x) CHECK((v > -10 && v < 10));
  // Pole at zero: force a row onto it.
  auto pole = Expr::binary(Op::Div, Expr::constant(1), Expr::variable(0));
  auto s3 = sample_scatter(pole, rng, 10, 1, cfg);
  s3.x[0] = 0.0;
  auto ev = expr::evaluate(pole, s3.view());
  CHECK_FALSE(ev.finite_mask[0]);
  CHECK_THROWS_AS(sample_scatter(Expr::variable(2), rng, 5, 2, cfg), std::invalid_argument);
}

TEST_CASE("corruption") {
  Rng rng(6);
  expr::TokenSeq t = {Token::Bos};
  for (int i = 0; i < 20000; ++i) t.push_back(Token::X0);
  t.push_back(Token::Eos);
  CorruptionConfig none{0.0, 0.0, 1.0};
  CHECK(corrupt(t, rng, none) == t);
  CorruptionConfig cfg;
  const auto out = corrupt(t, rng, cfg);
  REQUIRE(out.front() == Token::Bos);
  REQUIRE(out.back() == Token::Eos);
  for (std::size_t i = 1; i + 1 < out.size(); ++i) {
    CHECK(out[i] != Token::Pad);
    CHECK(out[i] != Token::Bos);
    CHECK(out[i] != Token::Eos);
  }
  // A swap lands back on x0 with probability 1/42, so the kept share sits near 0.752.
  Rng r3(7);
  const auto out3 = corrupt(t, r3, cfg);
  int same = 0;
  for (std::size_t i = 1; i + 1 < out3.size(); ++i) same += out3[i] == Token::X0;
  CHECK(std::fabs(same / 20000.0 - 0.75) < 0.02);
  const expr::TokenSeq empty = {Token::Bos, Token::Eos};
  CHECK(corrupt(empty, rng, cfg) == empty);
}

TEST_CASE("variable permutation keeps the pairing") {
  GrammarConfig cfg;
  Rng rng(8);
  const Expr e = Expr::binary(Op::Sub, Expr::variable(0), Expr::unary(Op::Sq, Expr::variable(1)));
  auto s = sample_scatter(e, rng, 30, 2, cfg);
  const std::vector<int> perm = {1, 0};
  const auto tokens = permute_tokens(expr::tokenize(e), perm);
  const auto moved = permute_columns(s, perm);
  const auto ev = expr::evaluate(expr::parse(tokens), moved.view());
  for (std::size_t i = 0; i < 30; ++i) CHECK(ev.y[i] == s.y[i]);
}
