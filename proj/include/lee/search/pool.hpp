#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "lee/expr/expr.hpp"
#include "lee/util/rng.hpp"

namespace lee::search {

enum class Origin { Init, Iter, Refresh, Grad, Cma };
std::string_view origin_name(Origin o);

struct Candidate {
  explicit Candidate(expr::Expr e) : expr(std::move(e)) {}

  expr::Expr expr;  // constants fitted
  std::string text;  // canonical token text, constants at 3 significant figures
  double score = 0.0;
  double r2_train = 0.0;
  double r2_val = std::numeric_limits<double>::quiet_NaN();
  std::size_t complexity = 0;
  Origin origin = Origin::Init;
  int iteration = 0;
};

/// clip(r2, -1, 1) - alpha * complexity.
double score_value(double r2_train, std::size_t complexity, double alpha);

/// Pool order: score desc, then complexity asc, then text.
bool ranks_before(const Candidate& a, const Candidate& b);

/// Complexity bucket: [0,5), [5,10), [10,20), [20,inf).
int bucket_of(std::size_t complexity);

class Pool {
 public:
  explicit Pool(std::size_t capacity);

  /// Adds candidates, dedups by text (higher rank wins), then keeps the best
  /// in rank order subject to capacity and the per-bucket cap. The overall
  /// best is always kept.
  void merge(std::vector<Candidate> incoming);

  const std::vector<Candidate>& ranked() const { return items_; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t bucket_cap() const { return (capacity_ + 3) / 4; }
  const Candidate& best() const { return items_.front(); }
  /// Highest validation R^2 (ties by rank); null when empty.
  const Candidate* best_validation() const;

 private:
  std::size_t capacity_;
  std::vector<Candidate> items_;
};

/// k draws with replacement; rank r (1-based) has weight 1/(r+1).
std::vector<const Candidate*> select_parents(const Pool& pool, int k, Rng& rng);

}  // namespace lee::search
