#include "lee/tensor/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lee::tensor {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  t_per_param_.assign(params_.size(), 0);
}

void AdamW::step(double lr, const std::vector<char>* active) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (active && !(*active)[i]) continue;
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix& g = p.grad();
    if (!g.allFinite()) {
      ++skipped_;
      continue;
    }
    // Bias correction follows each tensor's own update count, so a frozen
    // stretch does not distort the correction once it resumes.
    const long t = ++t_per_param_[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    Matrix& w = p.mutable_value();
    if (cfg_.weight_decay != 0.0) w *= 1.0 - lr * cfg_.weight_decay;
    w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(long step, long total, double lr_max, double lr_min) {
  if (total <= 1) return lr_max;
  const double f = static_cast<double>(std::clamp(step, 0L, total - 1)) / static_cast<double>(total - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * f));
}

}  // namespace lee::tensor
