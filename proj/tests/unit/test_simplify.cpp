#include "doctest.h"

#include <cmath>

#include "lee/datagen/grammar.hpp"
#include "lee/expr/evaluate.hpp"
#include "lee/expr/simplify.hpp"

using namespace lee::expr;

namespace {
Expr x(int i) { return Expr::variable(i); }
Expr c(double v) { return Expr::constant(v); }
}  // namespace

TEST_CASE("identity rules") {
  CHECK(simplify(Expr::binary(Op::Add, x(0), c(0))) == x(0));
  CHECK(simplify(Expr::binary(Op::Mul, c(1), Expr::unary(Op::Sin, x(0)))) == Expr::unary(Op::Sin, x(0)));
  CHECK(simplify(Expr::unary(Op::Neg, Expr::unary(Op::Neg, x(0)))) == x(0));
  CHECK(simplify(Expr::binary(Op::Sub, x(1), x(1))) == c(0));
  CHECK(simplify(Expr::binary(Op::Div, x(1), x(1))) == c(1));
  CHECK(simplify(Expr::unary(Op::Sq, c(3))) == c(9));
  CHECK(simplify(Expr::unary(Op::Cube, c(-2))) == c(-8));
  CHECK(simplify(Expr::binary(Op::Mul, x(0), c(0))) == c(0));
  // Folding that would not be finite is left alone.
  const Expr bad = Expr::unary(Op::Log, c(-1));
  CHECK(simplify(bad) == bad);
}

TEST_CASE("complexity") {
  CHECK(complexity(x(0)) == 1);
  CHECK(complexity(Expr::binary(Op::Add, x(0), c(0))) == 1);
  CHECK(complexity(Expr::binary(Op::Add, Expr::binary(Op::Mul, x(0), x(1)), c(2))) == 5);
}

TEST_CASE("idempotent, non-increasing and functionally equal on sampled trees") {
  lee::Rng rng(9);
  lee::datagen::GrammarConfig cfg;
  for (int n = 0; n < 1000; ++n) {
    const int k = 1 + n % 3;
    const Expr e = lee::datagen::sample_expression(rng, cfg, k);
    const Expr s = simplify(e);
    REQUIRE(simplify(s) == s);
    CHECK(complexity(e) <= e.node_count());
    std::vector<double> pts(static_cast<std::size_t>(50 * k));
    for (double& v : pts) v = rng.uniform(-10, 10);
    const MatrixView view{pts, 50, static_cast<std::size_t>(k)};
    if (s.max_variable() >= k) continue;
    const auto a = evaluate(e, view);
    const auto b = evaluate(s, view);
    for (std::size_t i = 0; i < 50; ++i) {
      if (a.finite_mask[i] && b.finite_mask[i]) {
        CHECK(std::fabs(a.y[i] - b.y[i]) <= 1e-9 * std::max(1.0, std::fabs(a.y[i])));
      }
    }
  }
}
