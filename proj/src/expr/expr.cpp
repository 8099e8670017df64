#include "lee/expr/expr.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "lee/expr/codec.hpp"

namespace lee::expr {
namespace {

constexpr std::array<std::string_view, kNumOps> kOpNames = {
    "add", "sub", "mul", "div", "sin", "cos", "tan", "tanh",
    "exp", "log", "sqrt", "sq", "cube", "abs", "neg",
};

}  // namespace

int arity(Op op) { return op <= Op::Div ? 2 : 1; }

Token op_token(Op op) { return static_cast<Token>(token_id(Token::Add) + static_cast<int>(op)); }

std::optional<Op> token_op(Token t) {
  if (t < Token::Add || t > Token::Neg) return std::nullopt;
  return static_cast<Op>(token_id(t) - token_id(Token::Add));
}

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

Expr Expr::variable(int index) {
  if (index < 0 || index >= kMaxVariables) {
    throw std::invalid_argument("variable index out of range: " + std::to_string(index));
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->var = index;
  return Expr(std::move(n));
}

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("constant must be finite");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr operand) {
  if (arity(op) != 1) throw std::invalid_argument("operator is not unary");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Unary;
  n->op = op;
  n->size = 1 + operand.node_count();
  n->children.push_back(std::move(operand));
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  if (arity(op) != 2) throw std::invalid_argument("operator is not binary");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->op = op;
  n->size = 1 + lhs.node_count() + rhs.node_count();
  n->children.push_back(std::move(lhs));
  n->children.push_back(std::move(rhs));
  return Expr(std::move(n));
}

std::size_t Expr::num_children() const { return node_->children.size(); }

int Expr::max_variable() const {
  int m = -1;
  visit_prefix(*this, [&](const Expr& e) {
    if (e.is_variable()) m = std::max(m, e.variable_index());
  });
  return m;
}

std::size_t Expr::constant_count() const {
  std::size_t c = 0;
  visit_prefix(*this, [&](const Expr& e) { c += e.is_constant(); });
  return c;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind() || a.node_count() != b.node_count()) return false;
  switch (a.kind()) {
    case Expr::Kind::Variable: return a.variable_index() == b.variable_index();
    case Expr::Kind::Constant: return a.constant_value() == b.constant_value();
    case Expr::Kind::Unary: return a.op() == b.op() && a.child(0) == b.child(0);
    case Expr::Kind::Binary:
      return a.op() == b.op() && a.child(0) == b.child(0) && a.child(1) == b.child(1);
  }
  return false;
}

Expr Expr::with_constants(const std::vector<double>& values) const {
  std::size_t next = 0;
  std::function<Expr(const Expr&)> rebuild = [&](const Expr& e) -> Expr {
    switch (e.kind()) {
      case Kind::Constant:
        if (next >= values.size()) throw std::invalid_argument("too few constants");
        return Expr::constant(values[next++]);
      case Kind::Variable: return e;
      case Kind::Unary: return Expr::unary(e.op(), rebuild(e.child(0)));
      case Kind::Binary: {
        Expr l = rebuild(e.child(0));
        Expr r = rebuild(e.child(1));
        return Expr::binary(e.op(), std::move(l), std::move(r));
      }
    }
    return e;
  };
  Expr out = rebuild(*this);
  if (next != values.size()) throw std::invalid_argument("too many constants");
  return out;
}

std::vector<double> Expr::constants() const {
  std::vector<double> out;
  visit_prefix(*this, [&](const Expr& e) {
    if (e.is_constant()) out.push_back(e.constant_value());
  });
  return out;
}

std::string Expr::to_infix() const {
  switch (kind()) {
    case Kind::Variable: return "x" + std::to_string(variable_index());
    case Kind::Constant: {
      std::ostringstream s;
      s.precision(6);
      s << constant_value();
      return s.str();
    }
    case Kind::Unary: {
      const std::string a = child(0).to_infix();
      switch (op()) {
        case Op::Sq: return "(" + a + ")^2";
        case Op::Cube: return "(" + a + ")^3";
        case Op::Neg: return "-(" + a + ")";
        default: return std::string(op_name(op())) + "(" + a + ")";
      }
    }
    case Kind::Binary: {
      static constexpr std::array<const char*, 4> sym = {" + ", " - ", " * ", " / "};
      return "(" + child(0).to_infix() + sym[static_cast<std::size_t>(op())] + child(1).to_infix() + ")";
    }
  }
  return {};
}

}  // namespace lee::expr
