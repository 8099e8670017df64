#include "lee/bench/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

#include "lee/expr/codec.hpp"
#include "lee/expr/evaluate.hpp"

namespace lee::bench {

using tensor::Matrix;

Matrix encode_records(const model::Model& m, std::span<const datagen::CorpusRecord* const> records,
                      std::size_t batch) {
  tensor::NoGradGuard no_grad;
  Matrix out(static_cast<Eigen::Index>(records.size()), m.config().d_z);
  for (std::size_t start = 0; start < records.size(); start += batch) {
    const std::size_t end = std::min(records.size(), start + batch);
    std::vector<expr::TokenSeq> tokens;
    tokens.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) tokens.push_back(expr::tokenize(expr::parse_text(records[i]->text)));
    std::vector<model::EncodeItem> items;
    for (std::size_t i = start; i < end; ++i) items.push_back({tokens[i - start], &records[i]->scatter});
    const model::Gaussian g = m.encode(items);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = g.mu.value();
  }
  return out;
}

namespace {

bool contains_op(const expr::Expr& e, std::initializer_list<expr::Op> ops) {
  bool hit = false;
  expr::visit_prefix(e, [&](const expr::Expr& n) {
    if (n.kind() == expr::Expr::Kind::Binary || n.kind() == expr::Expr::Kind::Unary) {
      hit = hit || std::find(ops.begin(), ops.end(), n.op()) != ops.end();
    }
  });
  return hit;
}

}  // namespace

std::vector<Labeler> standard_labelers(int high_dim_k) {
  using expr::Op;
  std::vector<Labeler> out;
  out.push_back({"has-trig", [](const expr::Expr& e, int) { return int(contains_op(e, {Op::Sin, Op::Cos, Op::Tan})); }});
  out.push_back({"has-log-exp", [](const expr::Expr& e, int) { return int(contains_op(e, {Op::Log, Op::Exp})); }});
  out.push_back({"has-sq-cube", [](const expr::Expr& e, int) { return int(contains_op(e, {Op::Sq, Op::Cube})); }});
  out.push_back({"has-division", [](const expr::Expr& e, int) { return int(contains_op(e, {Op::Div})); }});
  out.push_back({"is-polynomial", [](const expr::Expr& e, int) {
                   return int(!contains_op(e, {Op::Div, Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Exp, Op::Log,
                                                Op::Sqrt, Op::Abs}));
                 }});
  out.push_back({"high-dim", [high_dim_k](const expr::Expr&, int k) { return int(k >= high_dim_k); }});
  out.push_back({"num-variables", [](const expr::Expr&, int k) { return k; }, true});
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over ties, then the rank-sum statistic.
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) rank[order[q]] = r;
    i = j + 1;
  }
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      ++pos;
      rank_sum += rank[i];
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: needs both classes");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

ProbeResult linear_probe(const Matrix& features, std::span<const int> labels, ProbeTask task, const ProbeConfig& cfg) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("linear_probe: one label per feature row");
  }
  ProbeResult res;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  res.classes = by_class.size();
  if (task == ProbeTask::Binary && !by_class.empty() && (by_class.size() > 2 || by_class.begin()->first < 0 || by_class.rbegin()->first > 1)) {
    throw std::invalid_argument("linear_probe: binary labels must be 0 or 1");
  }
  if (by_class.size() < 2) {
    res.skipped = true;
    res.reason = "single class";
    return res;
  }

  Rng rng(mix_seed(cfg.seed, seed_stream::kProbe));
  std::vector<std::size_t> train, test;
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx);
    std::size_t n_test = static_cast<std::size_t>(std::lround(cfg.test_fraction * idx.size()));
    if (idx.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    else n_test = 0;
    test.insert(test.end(), idx.begin(), idx.begin() + n_test);
    train.insert(train.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  res.n_train = train.size();
  res.n_test = test.size();
  if (test.empty()) {
    res.skipped = true;
    res.reason = "empty test split";
    return res;
  }

  // Class index per label, in label order.
  std::map<int, int> class_of;
  for (const auto& [label, idx] : by_class) class_of.emplace(label, static_cast<int>(class_of.size()));
  const bool binary = task == ProbeTask::Binary;
  const Eigen::Index d = features.cols();
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index outs = binary ? 1 : static_cast<Eigen::Index>(by_class.size());

  Matrix xtr(n, d);
  for (Eigen::Index i = 0; i < n; ++i) xtr.row(i) = features.row(static_cast<Eigen::Index>(train[i]));
  const Eigen::RowVectorXd mean = xtr.colwise().mean();
  Eigen::RowVectorXd sd = ((xtr.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  auto standardize = [&](const Matrix& x) -> Matrix { return (x.rowwise() - mean).array().rowwise() / sd.array(); };
  xtr = standardize(xtr);

  Matrix target = Matrix::Zero(n, outs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = class_of.at(labels[train[i]]);
    if (binary) target(i, 0) = c;
    else target(i, c) = 1.0;
  }

  // Mean log-loss plus ||W||^2 / (2 C n); the intercept is not penalized.
  Matrix w = Matrix::Zero(d, outs);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(outs);
  const double l2 = 1.0 / (cfg.c * static_cast<double>(n));
  auto probs = [&](const Matrix& x) -> Matrix {
    Matrix logits = (x * w).rowwise() + b;
    if (binary) return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
    Eigen::VectorXd mx = logits.rowwise().maxCoeff();
    Matrix e = (logits.colwise() - mx).array().exp();
    Eigen::VectorXd s = e.rowwise().sum();
    return e.array().colwise() / s.array();
  };
  for (int it = 0; it < cfg.iterations; ++it) {
    const Matrix err = (probs(xtr) - target) / static_cast<double>(n);
    w -= cfg.lr * (xtr.transpose() * err + l2 * w);
    b -= cfg.lr * err.colwise().sum();
  }

  Matrix xte(static_cast<Eigen::Index>(test.size()), d);
  for (std::size_t i = 0; i < test.size(); ++i) xte.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(test[i]));
  const Matrix p = probs(standardize(xte));
  std::vector<int> truth(test.size());
  std::map<int, std::size_t> test_counts;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth[i] = class_of.at(labels[test[i]]);
    ++test_counts[truth[i]];
    int pred = 0;
    if (binary) pred = p(static_cast<Eigen::Index>(i), 0) >= 0.5;
    else p.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    correct += pred == truth[i];
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  std::size_t top = 0;
  for (const auto& [c, count] : test_counts) top = std::max(top, count);
  res.majority = static_cast<double>(top) / static_cast<double>(test.size());
  if (binary) {
    if (test_counts.size() == 2) {
      std::vector<double> scores(p.data(), p.data() + p.rows());
      res.auc = roc_auc(scores, truth);
    }
  }
  return res;
}

std::vector<InterpStep> interpolate(const model::Model& m, const expr::Expr& a, const datagen::ScatterSet& sa,
                                    const expr::Expr& b, const datagen::ScatterSet& sb, expr::MatrixView queries,
                                    const InterpConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("interpolate: samples must be >= 1");
  const expr::TokenSeq ta = expr::tokenize(a), tb = expr::tokenize(b);
  const std::vector<double> za = m.encode_one(ta, sa, false, nullptr).mu;
  const std::vector<double> zb = m.encode_one(tb, sb, false, nullptr).mu;
  const expr::Evaluation fa = expr::evaluate(a, queries), fb = expr::evaluate(b, queries);

  Rng rng(mix_seed(cfg.seed, seed_stream::kInterp));
  std::vector<InterpStep> out;
  for (double t : cfg.ts) {
    InterpStep step;
    step.t = t;
    step.z.resize(za.size());
    for (std::size_t i = 0; i < za.size(); ++i) step.z[i] = (1 - t) * za[i] + t * zb[i];

    std::vector<double> blend(queries.rows);
    std::vector<char> use(queries.rows, 0);
    std::size_t n_use = 0;
    for (std::size_t r = 0; r < queries.rows; ++r) {
      blend[r] = (1 - t) * fa.y[r] + t * fb.y[r];
      use[r] = std::isfinite(blend[r]);
      n_use += use[r];
    }

    Matrix zs(cfg.samples, static_cast<Eigen::Index>(step.z.size()));
    for (int s = 0; s < cfg.samples; ++s)
      for (std::size_t i = 0; i < step.z.size(); ++i) zs(s, static_cast<Eigen::Index>(i)) = step.z[i];
    std::vector<double> temps(static_cast<std::size_t>(cfg.samples), cfg.temperature);
    temps[0] = 0.0;
    const auto gen = m.generate(zs, temps, rng, cfg.max_len);

    step.mae = std::numeric_limits<double>::infinity();
    for (const auto& g : gen) {
      const auto parsed = expr::try_parse(g.tokens);
      if (!parsed || parsed.expr->max_variable() >= static_cast<int>(queries.cols)) continue;
      ++step.parsed;
      if (n_use == 0) continue;
      const expr::Evaluation y = expr::evaluate(*parsed.expr, queries);
      double err = 0.0;
      for (std::size_t r = 0; r < queries.rows && std::isfinite(err); ++r) {
        if (use[r]) err += y.finite_mask[r] ? std::abs(y.y[r] - blend[r]) : std::numeric_limits<double>::infinity();
      }
      err /= static_cast<double>(n_use);
      if (err < step.mae) {
        step.mae = err;
        step.best = *parsed.expr;
      }
    }
    out.push_back(std::move(step));
  }
  return out;
}

}  // namespace lee::bench
