#pragma once

#include <cstddef>

#include "lee/expr/expr.hpp"

namespace lee::expr {

/// Bottom-up rewrite to a fixpoint (at most 20 passes): constant folding,
/// identity and annihilator elements, double negation, x-x and x/x.
/// Note that x/x -> 1 and x*0 -> 0 widen the domain of the expression.
Expr simplify(const Expr& e);

/// Node count of the simplified tree.
std::size_t complexity(const Expr& e);

}  // namespace lee::expr
