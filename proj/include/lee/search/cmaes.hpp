#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lee/util/rng.hpp"

namespace lee::search {

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one
/// plus rank-mu covariance updates. Minimizes.
class Cmaes {
 public:
  Cmaes(Eigen::VectorXd mean, double sigma, int lambda, std::uint64_t seed);

  /// Draws lambda points from the current search distribution.
  const std::vector<Eigen::VectorXd>& ask();
  /// Fitness (lower is better) for the points of the last ask().
  void tell(const std::vector<double>& fitness);

  const Eigen::VectorXd& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  int lambda() const { return lambda_; }
  long evaluations() const { return evals_; }
  const Eigen::VectorXd& best() const { return best_x_; }
  double best_fitness() const { return best_f_; }

 private:
  void decompose();

  int n_, lambda_, mu_;
  Eigen::VectorXd weights_;
  double mu_eff_, c_sigma_, d_sigma_, c_c_, c_1_, c_mu_, chi_n_;
  Eigen::VectorXd mean_, p_sigma_, p_c_;
  Eigen::MatrixXd cov_, basis_;
  Eigen::VectorXd scales_;
  Eigen::MatrixXd inv_sqrt_;
  double sigma_;
  Rng rng_;
  std::vector<Eigen::VectorXd> samples_;
  long evals_ = 0;
  long generation_ = 0;
  Eigen::VectorXd best_x_;
  double best_f_;
};

}  // namespace lee::search
