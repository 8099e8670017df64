#pragma once

#include <cstddef>
#include <vector>

#include "lee/datagen/scatter.hpp"
#include "lee/expr/expr.hpp"
#include "lee/util/rng.hpp"

namespace lee::constfit {

/// Constants of an expression in prefix order, with a shared box.
struct ConstSlots {
  std::vector<double> initial;
  double lower = -1e4;
  double upper = 1e4;

  static ConstSlots of(const expr::Expr& e, double bound = 1e4);
  std::size_t size() const { return initial.size(); }
};

struct FitConfig {
  std::size_t row_cap = 1000;
  double fd_step = 1e-4;  // relative: h = fd_step * max(|c|, 1)
  int memory = 10;
  double pg_tol = 1e-8;  // infinity norm of the projected gradient
  double bound = 1e4;
};

struct FitResult {
  expr::Expr expr;
  double mse_before = 0.0;
  double mse_after = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool improved = false;
  bool failed = false;  // objective non-finite at the start
};

/// Uniform subsample without replacement of min(N, cap) rows; rows keep
/// their original order when N <= cap.
datagen::ScatterSet subsample_rows(const datagen::ScatterSet& data, std::size_t cap, Rng& rng);

/// Iteration budget for round r of R (1-based): linear from lo at r = 1 to hi
/// at r = R.
int budget_for_round(int round, int rounds, int lo = 100, int hi = 300);

/// Box-constrained quasi-Newton fit of the constants to the finite rows of
/// `data` (MSE), with central-difference gradients. Returns the input
/// unchanged when it has no constants, when the start is non-finite, or when
/// no improvement was found.
FitResult fit_constants(const expr::Expr& e, const datagen::ScatterSet& data, int budget, Rng& rng,
                        const FitConfig& cfg = {});

/// Mean squared error over rows with finite y; +inf when a prediction on such
/// a row is non-finite or no row is usable.
double mse(const expr::Expr& e, const datagen::ScatterSet& data);

}  // namespace lee::constfit
