#include "lee/search/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lee::search {

Cmaes::Cmaes(Eigen::VectorXd mean, double sigma, int lambda, std::uint64_t seed)
    : n_(static_cast<int>(mean.size())), lambda_(lambda), mean_(std::move(mean)), sigma_(sigma), rng_(seed),
      best_f_(std::numeric_limits<double>::infinity()) {
  if (n_ < 1 || lambda_ < 2 || !(sigma > 0)) throw std::invalid_argument("cmaes: bad dimension, lambda or sigma");
  const double n = n_;
  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) weights_[i] = std::log(mu_ + 0.5) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();
  c_sigma_ = (mu_eff_ + 2.0) / (n + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n + 1.0)) - 1.0) + c_sigma_;
  c_c_ = (4.0 + mu_eff_ / n) / (n + 4.0 + 2.0 * mu_eff_ / n);
  c_1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((n + 2.0) * (n + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  p_sigma_ = Eigen::VectorXd::Zero(n_);
  p_c_ = Eigen::VectorXd::Zero(n_);
  cov_ = Eigen::MatrixXd::Identity(n_, n_);
  basis_ = Eigen::MatrixXd::Identity(n_, n_);
  scales_ = Eigen::VectorXd::Ones(n_);
  inv_sqrt_ = Eigen::MatrixXd::Identity(n_, n_);
  best_x_ = mean_;
}

void Cmaes::decompose() {
  cov_ = 0.5 * (cov_ + cov_.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  basis_ = eig.eigenvectors();
  scales_ = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
  inv_sqrt_ = basis_ * scales_.cwiseInverse().asDiagonal() * basis_.transpose();
}

const std::vector<Eigen::VectorXd>& Cmaes::ask() {
  samples_.clear();
  for (int k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n_);
    for (int i = 0; i < n_; ++i) z[i] = rng_.normal();
    samples_.push_back(mean_ + sigma_ * (basis_ * scales_.cwiseProduct(z)));
  }
  return samples_;
}

void Cmaes::tell(const std::vector<double>& fitness) {
  if (static_cast<int>(fitness.size()) != lambda_ || samples_.size() != fitness.size()) {
    throw std::invalid_argument("cmaes: tell() needs one fitness per sample of the last ask()");
  }
  evals_ += lambda_;
  ++generation_;
  std::vector<int> order(lambda_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });
  if (fitness[order[0]] < best_f_) {
    best_f_ = fitness[order[0]];
    best_x_ = samples_[order[0]];
  }

  const Eigen::VectorXd old_mean = mean_;
  mean_.setZero();
  for (int i = 0; i < mu_; ++i) mean_ += weights_[i] * samples_[order[i]];
  const Eigen::VectorXd step = (mean_ - old_mean) / sigma_;

  const double n = n_;
  p_sigma_ = (1.0 - c_sigma_) * p_sigma_ + std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * (inv_sqrt_ * step);
  const double ps_norm = p_sigma_.norm();
  const double decay = 1.0 - std::pow(1.0 - c_sigma_, 2.0 * static_cast<double>(generation_));
  const bool h_sigma = ps_norm / std::sqrt(decay) / chi_n_ < 1.4 + 2.0 / (n + 1.0);
  p_c_ = (1.0 - c_c_) * p_c_ + (h_sigma ? std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) : 0.0) * step;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < mu_; ++i) {
    const Eigen::VectorXd d = (samples_[order[i]] - old_mean) / sigma_;
    rank_mu += weights_[i] * d * d.transpose();
  }
  const double h_corr = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  cov_ = (1.0 - c_1_ - c_mu_) * cov_ + c_1_ * (p_c_ * p_c_.transpose() + h_corr * cov_) + c_mu_ * rank_mu;
  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0));
  decompose();
}

}  // namespace lee::search
