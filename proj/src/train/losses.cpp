#include "lee/train/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace lee::train {

using namespace lee::tensor;

Tensor loss_expr(const model::ExprLogits& logits) {
  return cross_entropy(logits.logits, logits.targets, logits.mask);
}

EvalLoss loss_eval(const Tensor& y_hat, std::span<const double> y, std::span<const Index> offsets) {
  if (static_cast<Index>(y.size()) != y_hat.rows() || y_hat.cols() != 1) {
    throw std::invalid_argument("loss_eval: prediction " + y_hat.shape_str() + " against " +
                                std::to_string(y.size()) + " targets");
  }
  if (offsets.size() < 2 || offsets.back() != y_hat.rows()) throw std::invalid_argument("loss_eval: bad offsets");
  const std::size_t items = offsets.size() - 1;
  EvalLoss out;
  std::vector<Index> rows;
  std::vector<double> target, weight;
  for (std::size_t b = 0; b < items; ++b) {
    std::size_t n = 0;
    for (Index r = offsets[b]; r < offsets[b + 1]; ++r) n += std::isfinite(y[static_cast<std::size_t>(r)]);
    if (n == 0) {
      ++out.empty_sets;
      continue;
    }
    for (Index r = offsets[b]; r < offsets[b + 1]; ++r) {
      const double v = y[static_cast<std::size_t>(r)];
      if (!std::isfinite(v)) continue;
      rows.push_back(r);
      target.push_back(v);
      weight.push_back(1.0 / (std::max(std::fabs(v), 1.0) * static_cast<double>(n) * static_cast<double>(items)));
    }
  }
  if (rows.empty()) {
    out.value = Tensor::scalar(0.0);
    return out;
  }
  const Index m = static_cast<Index>(rows.size());
  const Tensor picked = gather_rows(y_hat, rows);
  const Tensor err = abs(sub(picked, Tensor::constant(Eigen::Map<const Matrix>(target.data(), m, 1))));
  out.value = sum(mul(err, Tensor::constant(Eigen::Map<const Matrix>(weight.data(), m, 1))));
  return out;
}

Tensor loss_kl(const model::Gaussian& q) {
  // mu^2 + exp(lv) - lv - 1
  const Tensor terms = add_scalar(sub(add(square(q.mu), exp(q.log_var)), q.log_var), -1.0);
  return scale(sum(terms), 0.5 / static_cast<double>(q.mu.rows()));
}

Tensor loss_align(const model::Gaussian& q, const model::Gaussian& p) {
  const Tensor mu_p = stop_gradient(p.mu);
  const Tensor lv_p = stop_gradient(p.log_var);
  const Tensor inv_var_p = exp(scale(lv_p, -1.0));
  const Tensor ratio = mul(add(exp(q.log_var), square(sub(q.mu, mu_p))), inv_var_p);
  const Tensor terms = add_scalar(add(sub(lv_p, q.log_var), ratio), -1.0);
  return scale(sum(terms), 0.5 / static_cast<double>(q.mu.rows()));
}

Tensor loss_refine(const model::Model& m, std::span<const expr::TokenSeq> corrupted,
                   std::span<const datagen::ScatterSet* const> scatter, std::span<const expr::TokenSeq> clean,
                   Rng* rng) {
  if (corrupted.size() != scatter.size() || corrupted.size() != clean.size()) {
    throw std::invalid_argument("loss_refine: batch parts disagree in size");
  }
  std::vector<model::EncodeItem> items;
  for (std::size_t b = 0; b < corrupted.size(); ++b) items.push_back({corrupted[b], scatter[b]});
  const model::Gaussian g = m.encode(items);
  const Tensor z = rng ? m.reparameterize(g, *rng) : g.mu;
  return loss_expr(m.expr_logits(z, clean));
}

}  // namespace lee::train
