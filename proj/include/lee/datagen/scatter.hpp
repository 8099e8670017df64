#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lee/expr/evaluate.hpp"

namespace lee::datagen {

/// Observation set {(x_i, y_i)}. Rows with non-finite y stay in the set and
/// are flagged.
struct ScatterSet {
  std::size_t k = 0;
  std::vector<double> x;  // row-major, rows() x k
  std::vector<double> y;
  std::vector<bool> finite;
  std::string provenance;

  std::size_t rows() const { return y.size(); }
  expr::MatrixView view() const { return {x, rows(), k}; }
  double at(std::size_t r, std::size_t c) const { return x[r * k + c]; }
  std::size_t finite_count() const;
  ScatterSet select_rows(std::span<const std::size_t> rows) const;
  /// Recomputes the finite flags from y.
  void refresh_flags();
};

ScatterSet make_scatter(std::size_t k, std::vector<double> x, std::vector<double> y, std::string provenance = {});

}  // namespace lee::datagen
