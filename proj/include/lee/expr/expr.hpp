#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lee/expr/token.hpp"

namespace lee::expr {

enum class Op : std::uint8_t {
  Add, Sub, Mul, Div,
  Sin, Cos, Tan, Tanh, Exp, Log, Sqrt, Sq, Cube, Abs, Neg,
};

inline constexpr int kNumOps = 15;

int arity(Op op);
Token op_token(Op op);
std::optional<Op> token_op(Token t);
std::string_view op_name(Op op);

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  enum class Kind : std::uint8_t { Binary, Unary, Variable, Constant };

  static Expr variable(int index);
  /// Throws std::invalid_argument if value is not finite.
  static Expr constant(double value);
  static Expr unary(Op op, Expr operand);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  Kind kind() const { return node_->kind; }
  bool is_leaf() const { return kind() == Kind::Variable || kind() == Kind::Constant; }
  bool is_constant() const { return kind() == Kind::Constant; }
  bool is_variable() const { return kind() == Kind::Variable; }
  Op op() const { return node_->op; }
  int variable_index() const { return node_->var; }
  double constant_value() const { return node_->value; }
  const Expr& child(std::size_t i) const { return node_->children[i]; }
  std::size_t num_children() const;

  std::size_t node_count() const { return node_->size; }
  /// -1 if the expression has no variables.
  int max_variable() const;
  std::size_t constant_count() const;

  /// Structural equality with exact constant comparison.
  friend bool operator==(const Expr& a, const Expr& b);

  /// Same tree with constants replaced, in prefix order.
  Expr with_constants(const std::vector<double>& values) const;
  std::vector<double> constants() const;

  /// Infix rendering for reports, e.g. `sin((x0 * 2.5))`.
  std::string to_infix() const;

 private:
  struct Node {
    Kind kind;
    Op op = Op::Add;
    int var = 0;
    double value = 0.0;
    std::vector<Expr> children;
    std::size_t size = 1;
  };
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

/// Applies `fn` to every node in prefix order.
template <typename Fn>
void visit_prefix(const Expr& e, Fn&& fn) {
  fn(e);
  for (std::size_t i = 0; i < e.num_children(); ++i) visit_prefix(e.child(i), fn);
}

}  // namespace lee::expr
