#pragma once

#include <cstdint>
#include <vector>

#include "lee/datagen/scatter.hpp"
#include "lee/expr/expr.hpp"
#include "lee/expr/token.hpp"
#include "lee/util/rng.hpp"

namespace lee::datagen {

struct GrammarConfig {
  int b_max = 4;
  int u_max = 4;
  int k_max = 3;
  // Constant mixture: integer in [-10, 10], log-uniform magnitude, catalogue.
  double p_integer = 0.6;
  double p_log_uniform = 0.3;
  double p_physics = 0.1;
  double p_constant_leaf = 0.25;
  double domain_lo = -10.0;
  double domain_hi = 10.0;
  int n_scatter = 200;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;

  template <class F>
  void fields(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void fields(F&& f) const {
    visit(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("b_max", s.b_max);
    f("u_max", s.u_max);
    f("k_max", s.k_max);
    f("p_integer", s.p_integer);
    f("p_log_uniform", s.p_log_uniform);
    f("p_physics", s.p_physics);
    f("p_constant_leaf", s.p_constant_leaf);
    f("domain_lo", s.domain_lo);
    f("domain_hi", s.domain_hi);
    f("n_scatter", s.n_scatter);
  }
};

struct CorruptionConfig {
  double p_drop = 0.15;
  double p_swap = 0.10;
  double p_keep = 0.75;

  void validate() const;
};

/// pi, e, 2*pi, 1/2, sqrt(2), ln 2, g.
const std::vector<double>& physics_constants();

double sample_constant(Rng& rng, const GrammarConfig& cfg);

struct SampleStats {
  int attempts = 0;
  bool coverage_relaxed = false;
};

/// Scaffold of b binary operators, then u unary operators, then leaves.
/// Every one of the k variables appears at least once; trees that are finite
/// on fewer than 25% of the query grid are re-sampled (100 attempts, after
/// which coverage is relaxed).
expr::Expr sample_expression(Rng& rng, const GrammarConfig& cfg, int k, SampleStats* stats = nullptr);

/// Row-major grid over the domain box: per-axis count is 64 for k=1 and
/// floor(1024^(1/k)) otherwise, so the grid never exceeds 1,024 rows.
std::vector<double> query_grid(int k, double lo, double hi);

/// X uniform on the configured box, y = evaluate(expr, X).
ScatterSet sample_scatter(const expr::Expr& e, Rng& rng, std::size_t n, int k, const GrammarConfig& cfg);

/// Independently drops, swaps (uniform over the vocabulary minus
/// PAD/BOS/EOS) or keeps each token between the BOS/EOS framing.
expr::TokenSeq corrupt(const expr::TokenSeq& tokens, Rng& rng, const CorruptionConfig& cfg);

/// Relabels variable tokens x_i -> x_perm[i] and moves X column i to perm[i].
expr::TokenSeq permute_tokens(const expr::TokenSeq& tokens, const std::vector<int>& perm);
ScatterSet permute_columns(const ScatterSet& s, const std::vector<int>& perm);

}  // namespace lee::datagen
