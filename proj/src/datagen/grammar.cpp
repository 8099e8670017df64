#include "lee/datagen/grammar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "lee/expr/codec.hpp"
#include "lee/expr/evaluate.hpp"

namespace lee::datagen {

using expr::Expr;
using expr::Op;
using expr::Token;
using expr::TokenSeq;

namespace {

constexpr int kMaxAttempts = 100;
constexpr double kMinFiniteFraction = 0.25;

constexpr std::array<Op, 4> kBinaryOps = {Op::Add, Op::Sub, Op::Mul, Op::Div};
constexpr std::array<double, 4> kBinaryWeights = {0.3, 0.2, 0.3, 0.2};
constexpr std::array<Op, 11> kUnaryOps = {Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Exp, Op::Log,
                                          Op::Sqrt, Op::Sq, Op::Cube, Op::Abs, Op::Neg};

bool close_to_one(double s) { return std::fabs(s - 1.0) < 1e-9; }

// Mutable skeleton used while sampling; converted to an immutable Expr.
struct Skeleton {
  enum Kind { Binary, Unary, Leaf } kind = Leaf;
  Op op = Op::Add;
  std::unique_ptr<Skeleton> a, b;
  int var = -1;  // leaf: -1 means constant
  double value = 0.0;
};

std::unique_ptr<Skeleton> scaffold(Rng& rng, int internal) {
  auto n = std::make_unique<Skeleton>();
  if (internal == 0) return n;
  n->kind = Skeleton::Binary;
  n->op = kBinaryOps[rng.categorical(kBinaryWeights)];
  const int left = rng.uniform_int(0, internal - 1);
  n->a = scaffold(rng, left);
  n->b = scaffold(rng, internal - 1 - left);
  return n;
}

void collect(std::unique_ptr<Skeleton>& slot, std::vector<std::unique_ptr<Skeleton>*>& out) {
  out.push_back(&slot);
  if (slot->a) collect(slot->a, out);
  if (slot->b) collect(slot->b, out);
}

void collect_leaves(Skeleton& n, std::vector<Skeleton*>& out) {
  if (n.kind == Skeleton::Leaf) {
    out.push_back(&n);
    return;
  }
  if (n.a) collect_leaves(*n.a, out);
  if (n.b) collect_leaves(*n.b, out);
}

Expr to_expr(const Skeleton& n) {
  switch (n.kind) {
    case Skeleton::Binary: return Expr::binary(n.op, to_expr(*n.a), to_expr(*n.b));
    case Skeleton::Unary: return Expr::unary(n.op, to_expr(*n.a));
    case Skeleton::Leaf: return n.var >= 0 ? Expr::variable(n.var) : Expr::constant(n.value);
  }
  return Expr::constant(0.0);
}

double finite_fraction(const Expr& e, const std::vector<double>& grid, int k) {
  const std::size_t rows = grid.size() / static_cast<std::size_t>(k);
  const auto ev = expr::evaluate_serial(e, {grid, rows, static_cast<std::size_t>(k)});
  std::size_t ok = 0;
  for (bool f : ev.finite_mask) ok += f;
  return rows ? static_cast<double>(ok) / static_cast<double>(rows) : 0.0;
}

}  // namespace

void GrammarConfig::validate() const {
  if (b_max < 1) throw std::invalid_argument("grammar.b_max must be >= 1");
  if (u_max < 0) throw std::invalid_argument("grammar.u_max must be >= 0");
  if (k_max < 1 || k_max > expr::kMaxVariables) throw std::invalid_argument("grammar.k_max must be in [1, 10]");
  if (p_integer < 0 || p_log_uniform < 0 || p_physics < 0 || !close_to_one(p_integer + p_log_uniform + p_physics)) {
    throw std::invalid_argument("grammar constant mixture weights must be non-negative and sum to 1");
  }
  if (p_constant_leaf < 0 || p_constant_leaf >= 1) throw std::invalid_argument("grammar.p_constant_leaf must be in [0, 1)");
  if (!(domain_lo < domain_hi)) throw std::invalid_argument("grammar domain must satisfy lo < hi");
  if (n_scatter < 1) throw std::invalid_argument("grammar.n_scatter must be >= 1");
}

void CorruptionConfig::validate() const {
  if (p_drop < 0 || p_swap < 0 || p_keep < 0 || !close_to_one(p_drop + p_swap + p_keep)) {
    throw std::invalid_argument("corruption probabilities must be non-negative and sum to 1");
  }
}

const std::vector<double>& physics_constants() {
  static const std::vector<double> c = {std::numbers::pi, std::numbers::e, 2.0 * std::numbers::pi, 0.5,
                                        std::numbers::sqrt2, std::numbers::ln2, 9.81};
  return c;
}

double sample_constant(Rng& rng, const GrammarConfig& cfg) {
  const double u = rng.uniform();
  if (u < cfg.p_integer) return static_cast<double>(rng.uniform_int(-10, 10));
  if (u < cfg.p_integer + cfg.p_log_uniform) {
    const double mag = std::pow(10.0, rng.uniform(-2.0, 2.0));
    return rng.bernoulli(0.5) ? mag : -mag;
  }
  const auto& cat = physics_constants();
  return cat[rng.index(cat.size())];
}

std::vector<double> query_grid(int k, double lo, double hi) {
  int per_axis = 64;
  if (k > 1) {
    per_axis = 1;
    while (std::pow(per_axis + 1, k) <= 1024.0) ++per_axis;
  }
  std::size_t rows = 1;
  for (int i = 0; i < k; ++i) rows *= static_cast<std::size_t>(per_axis);
  std::vector<double> grid(rows * static_cast<std::size_t>(k));
  const double step = (hi - lo) / (per_axis - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t rem = r;
    for (int c = k - 1; c >= 0; --c) {
      grid[r * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] =
          lo + step * static_cast<double>(rem % static_cast<std::size_t>(per_axis));
      rem /= static_cast<std::size_t>(per_axis);
    }
  }
  return grid;
}

Expr sample_expression(Rng& rng, const GrammarConfig& cfg, int k, SampleStats* stats) {
  if (k < 1 || k > cfg.k_max) throw std::invalid_argument("sample_expression: k out of range");
  const std::vector<double> grid = query_grid(k, cfg.domain_lo, cfg.domain_hi);
  const bool coverable = k - 1 <= cfg.b_max;
  // Best-so-far by grid finiteness; returned if nothing clears the bar.
  std::optional<Expr> fallback;
  double fallback_fraction = -1.0;
  bool fallback_covered = false;
  for (int attempt = 0; attempt < 10 * kMaxAttempts; ++attempt) {
    const bool relax = attempt >= kMaxAttempts || !coverable;
    const int b = rng.uniform_int(std::max(1, relax ? 1 : k - 1), std::max(1, cfg.b_max));
    std::unique_ptr<Skeleton> root = scaffold(rng, b);

    const int u = rng.uniform_int(0, cfg.u_max);
    for (int i = 0; i < u; ++i) {
      std::vector<std::unique_ptr<Skeleton>*> slots;
      collect(root, slots);
      std::unique_ptr<Skeleton>& slot = *slots[rng.index(slots.size())];
      auto wrap = std::make_unique<Skeleton>();
      wrap->kind = Skeleton::Unary;
      wrap->op = kUnaryOps[rng.index(kUnaryOps.size())];
      wrap->a = std::move(slot);
      slot = std::move(wrap);
    }

    std::vector<Skeleton*> leaves;
    collect_leaves(*root, leaves);
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (Skeleton* leaf : leaves) {
      if (rng.bernoulli(cfg.p_constant_leaf)) {
        leaf->var = -1;
        leaf->value = sample_constant(rng, cfg);
      } else {
        leaf->var = rng.uniform_int(0, k - 1);
        seen[static_cast<std::size_t>(leaf->var)] = true;
      }
    }
    const bool covered = std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
    if (!covered && !relax) continue;

    Expr e = to_expr(*root);
    const double frac = finite_fraction(e, grid, k);
    if (frac >= kMinFiniteFraction) {
      if (stats) {
        stats->attempts = attempt + 1;
        stats->coverage_relaxed = !covered;
      }
      return e;
    }
    if (frac > fallback_fraction) {
      fallback = e;
      fallback_fraction = frac;
      fallback_covered = covered;
    }
  }
  if (stats) {
    stats->attempts = 10 * kMaxAttempts;
    stats->coverage_relaxed = !fallback_covered;
  }
  if (!fallback) return Expr::variable(0);
  return *fallback;
}

ScatterSet sample_scatter(const Expr& e, Rng& rng, std::size_t n, int k, const GrammarConfig& cfg) {
  if (e.max_variable() >= k) throw std::invalid_argument("sample_scatter: expression uses more than k variables");
  std::vector<double> x(n * static_cast<std::size_t>(k));
  for (double& v : x) {
    do {
      v = rng.uniform(cfg.domain_lo, cfg.domain_hi);
    } while (v == cfg.domain_lo);  // open interval
  }
  auto ev = expr::evaluate(e, {x, n, static_cast<std::size_t>(k)});
  ScatterSet s;
  s.k = static_cast<std::size_t>(k);
  s.x = std::move(x);
  s.y = std::move(ev.y);
  s.finite = std::move(ev.finite_mask);
  return s;
}

TokenSeq corrupt(const TokenSeq& tokens, Rng& rng, const CorruptionConfig& cfg) {
  std::size_t begin = 0, end = tokens.size();
  if (begin < end && tokens.front() == Token::Bos) ++begin;
  if (begin < end && tokens.back() == Token::Eos) --end;
  TokenSeq out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(begin));
  // Swap targets: everything except PAD/BOS/EOS.
  constexpr int first = expr::token_id(Token::Unk);
  for (std::size_t i = begin; i < end; ++i) {
    const double u = rng.uniform();
    if (u < cfg.p_drop) continue;
    if (u < cfg.p_drop + cfg.p_swap) {
      out.push_back(expr::token_from_id(rng.uniform_int(first, expr::kVocabSize - 1)));
    } else {
      out.push_back(tokens[i]);
    }
  }
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(end), tokens.end());
  return out;
}

TokenSeq permute_tokens(const TokenSeq& tokens, const std::vector<int>& perm) {
  TokenSeq out = tokens;
  for (Token& t : out) {
    if (expr::is_variable(t)) {
      const int i = expr::variable_index(t);
      if (i < static_cast<int>(perm.size())) t = expr::variable_token(perm[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

ScatterSet permute_columns(const ScatterSet& s, const std::vector<int>& perm) {
  ScatterSet out = s;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < perm.size() && c < s.k; ++c) {
      out.x[r * s.k + static_cast<std::size_t>(perm[c])] = s.x[r * s.k + c];
    }
  }
  return out;
}

}  // namespace lee::datagen
