#include "lee/expr/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lee::expr {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kBlockRows = 256;

inline double guard(double v) { return (std::fabs(v) <= kOverflowGuard) ? v : kNaN; }

}  // namespace

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Sin: return guard(std::sin(a));
    case Op::Cos: return guard(std::cos(a));
    case Op::Tan: return guard(std::tan(a));
    case Op::Tanh: return guard(std::tanh(a));
    case Op::Exp: return guard(std::exp(a));
    case Op::Log: return guard(std::log(a));
    case Op::Sqrt: return guard(std::sqrt(a));
    case Op::Sq: return guard(a * a);
    case Op::Cube: return guard(a * a * a);
    case Op::Abs: return guard(std::fabs(a));
    case Op::Neg: return guard(-a);
    default: return kNaN;
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return guard(a + b);
    case Op::Sub: return guard(a - b);
    case Op::Mul: return guard(a * b);
    case Op::Div: return guard(a / b);
    default: return kNaN;
  }
}

Program::Program(const Expr& e) {
  std::size_t depth = 0;
  // Postfix emission; tracks the stack high-water mark.
  auto emit = [&](auto&& self, const Expr& n) -> void {
    switch (n.kind()) {
      case Expr::Kind::Variable:
        code_.push_back({0, Op::Add, n.variable_index()});
        max_var_ = std::max(max_var_, n.variable_index());
        max_depth_ = std::max(max_depth_, ++depth);
        return;
      case Expr::Kind::Constant:
        code_.push_back({1, Op::Add, static_cast<int>(constants_.size())});
        constants_.push_back(n.constant_value());
        max_depth_ = std::max(max_depth_, ++depth);
        return;
      case Expr::Kind::Unary:
        self(self, n.child(0));
        code_.push_back({2, n.op(), 0});
        return;
      case Expr::Kind::Binary:
        self(self, n.child(0));
        self(self, n.child(1));
        code_.push_back({3, n.op(), 0});
        --depth;
        return;
    }
  };
  emit(emit, e);
}

void Program::run_block(MatrixView x, std::span<const double> constants, std::size_t begin,
                        std::size_t end, std::span<double> out, std::vector<double>& stack) const {
  const std::size_t n = end - begin;
  stack.assign(max_depth_ * n, 0.0);
  std::size_t sp = 0;
  for (const Instr& ins : code_) {
    switch (ins.kind) {
      case 0: {
        double* dst = stack.data() + sp * n;
        for (std::size_t r = 0; r < n; ++r) dst[r] = x(begin + r, static_cast<std::size_t>(ins.index));
        ++sp;
        break;
      }
      case 1: {
        double* dst = stack.data() + sp * n;
        std::fill(dst, dst + n, constants[static_cast<std::size_t>(ins.index)]);
        ++sp;
        break;
      }
      case 2: {
        double* a = stack.data() + (sp - 1) * n;
        for (std::size_t r = 0; r < n; ++r) a[r] = apply_unary(ins.op, a[r]);
        break;
      }
      default: {
        double* a = stack.data() + (sp - 2) * n;
        const double* b = stack.data() + (sp - 1) * n;
        for (std::size_t r = 0; r < n; ++r) a[r] = apply_binary(ins.op, a[r], b[r]);
        --sp;
        break;
      }
    }
  }
  std::copy(stack.begin(), stack.begin() + static_cast<std::ptrdiff_t>(n), out.begin() + static_cast<std::ptrdiff_t>(begin));
}

void Program::run_serial(MatrixView x, std::span<const double> constants, std::span<double> out) const {
  std::vector<double> stack;
  if (x.rows) run_block(x, constants, 0, x.rows, out, stack);
}

void Program::run(MatrixView x, std::span<const double> constants, std::span<double> out) const {
  const std::size_t nblocks = (x.rows + kBlockRows - 1) / kBlockRows;
  if (nblocks <= 1) {
    run_serial(x, constants, out);
    return;
  }
#pragma omp parallel
  {
    std::vector<double> stack;
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < nblocks; ++b) {
      const std::size_t begin = b * kBlockRows;
      const std::size_t end = std::min(x.rows, begin + kBlockRows);
      run_block(x, constants, begin, end, out, stack);
    }
  }
}

namespace {

Evaluation finish(std::vector<double> y) {
  Evaluation ev;
  ev.finite_mask.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool ok = std::isfinite(y[i]);
    ev.finite_mask[i] = ok;
    if (!ok) y[i] = kNaN;
  }
  ev.y = std::move(y);
  return ev;
}

void check_width(const Program& p, MatrixView x) {
  if (p.max_variable() >= static_cast<int>(x.cols)) {
    throw std::invalid_argument("expression uses x" + std::to_string(p.max_variable()) + " but data has " +
                                std::to_string(x.cols) + " columns");
  }
}

}  // namespace

Evaluation evaluate(const Expr& e, MatrixView x) {
  const Program p(e);
  check_width(p, x);
  std::vector<double> y(x.rows);
  p.run(x, p.constants(), y);
  return finish(std::move(y));
}

Evaluation evaluate_serial(const Expr& e, MatrixView x) {
  const Program p(e);
  check_width(p, x);
  std::vector<double> y(x.rows);
  p.run_serial(x, p.constants(), y);
  return finish(std::move(y));
}

}  // namespace lee::expr
