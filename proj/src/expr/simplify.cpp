#include "lee/expr/simplify.hpp"

#include <cmath>

#include "lee/expr/evaluate.hpp"

namespace lee::expr {
namespace {

constexpr int kMaxPasses = 20;

bool is_const(const Expr& e, double v) { return e.is_constant() && e.constant_value() == v; }

std::optional<Expr> fold(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  return Expr::constant(v);
}

Expr rewrite(const Expr& e, bool& changed) {
  switch (e.kind()) {
    case Expr::Kind::Variable:
    case Expr::Kind::Constant:
      return e;
    case Expr::Kind::Unary: {
      Expr c = rewrite(e.child(0), changed);
      if (c.is_constant()) {
        if (auto f = fold(apply_unary(e.op(), c.constant_value()))) {
          changed = true;
          return *f;
        }
      }
      if (e.op() == Op::Neg && c.kind() == Expr::Kind::Unary && c.op() == Op::Neg) {
        changed = true;
        return c.child(0);
      }
      if (c == e.child(0)) return e;
      return Expr::unary(e.op(), std::move(c));
    }
    case Expr::Kind::Binary: {
      Expr l = rewrite(e.child(0), changed);
      Expr r = rewrite(e.child(1), changed);
      if (l.is_constant() && r.is_constant()) {
        if (auto f = fold(apply_binary(e.op(), l.constant_value(), r.constant_value()))) {
          changed = true;
          return *f;
        }
      }
      std::optional<Expr> out;
      switch (e.op()) {
        case Op::Add:
          if (is_const(r, 0.0)) out = l;
          else if (is_const(l, 0.0)) out = r;
          break;
        case Op::Sub:
          if (is_const(r, 0.0)) out = l;
          else if (is_const(l, 0.0)) out = Expr::unary(Op::Neg, r);
          else if (l == r) out = Expr::constant(0.0);
          break;
        case Op::Mul:
          if (is_const(r, 1.0)) out = l;
          else if (is_const(l, 1.0)) out = r;
          else if (is_const(l, 0.0) || is_const(r, 0.0)) out = Expr::constant(0.0);
          break;
        case Op::Div:
          if (is_const(r, 1.0)) out = l;
          else if (is_const(l, 0.0)) out = Expr::constant(0.0);
          else if (l == r) out = Expr::constant(1.0);
          break;
        default:
          break;
      }
      if (out) {
        changed = true;
        return *out;
      }
      if (l == e.child(0) && r == e.child(1)) return e;
      return Expr::binary(e.op(), std::move(l), std::move(r));
    }
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr cur = e;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    bool changed = false;
    cur = rewrite(cur, changed);
    if (!changed) break;
  }
  return cur;
}

std::size_t complexity(const Expr& e) { return simplify(e).node_count(); }

}  // namespace lee::expr
