#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lee/expr/expr.hpp"

namespace lee::expr {

/// Any intermediate with magnitude above this is treated as non-finite.
inline constexpr double kOverflowGuard = 1e30;

/// Row-major N x k view over sample coordinates.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Evaluation {
  std::vector<double> y;          // NaN wherever finite_mask is false
  std::vector<bool> finite_mask;
};

/// Postfix program compiled from an Expr. Constants live in a separate table
/// so the constant fitter can re-evaluate with new values without recompiling.
class Program {
 public:
  explicit Program(const Expr& e);

  std::size_t num_constants() const { return constants_.size(); }
  const std::vector<double>& constants() const { return constants_; }
  int max_variable() const { return max_var_; }

  /// Serial reference kernel: one column buffer per stack slot, rows in order.
  void run_serial(MatrixView x, std::span<const double> constants, std::span<double> out) const;
  /// OpenMP kernel: row blocks evaluated independently. Bitwise identical to
  /// run_serial.
  void run(MatrixView x, std::span<const double> constants, std::span<double> out) const;

 private:
  struct Instr {
    std::uint8_t kind;  // 0 var, 1 const, 2 unary, 3 binary
    Op op;
    int index;
  };
  void run_block(MatrixView x, std::span<const double> constants, std::size_t begin,
                 std::size_t end, std::span<double> out, std::vector<double>& stack) const;

  std::vector<Instr> code_;
  std::vector<double> constants_;
  std::size_t max_depth_ = 0;
  int max_var_ = -1;
};

/// Guarded evaluation; never aborts. Throws std::invalid_argument when the
/// expression references a variable column that does not exist.
Evaluation evaluate(const Expr& e, MatrixView x);
Evaluation evaluate_serial(const Expr& e, MatrixView x);

/// Scalar op application with the overflow guard; NaN marks non-finite.
double apply_unary(Op op, double a);
double apply_binary(Op op, double a, double b);

}  // namespace lee::expr
