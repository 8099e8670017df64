#pragma once

#include <cstddef>
#include <vector>

#include "lee/tensor/tensor.hpp"

namespace lee::tensor {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay. Moments are kept per parameter in the
/// order given at construction.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg = {});

  /// Updates every parameter whose `active` entry is set (all when null) and
  /// that holds a gradient. A tensor with a non-finite gradient is left alone
  /// and counted in skipped().
  void step(double lr, const std::vector<char>* active = nullptr);
  void zero_grad();

  long steps() const { return t_; }
  std::size_t skipped() const { return skipped_; }
  const std::vector<Tensor>& params() const { return params_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_, v_;
  std::vector<long> t_per_param_;
  AdamWConfig cfg_;
  long t_ = 0;
  std::size_t skipped_ = 0;
};

/// Cosine decay from lr_max at step 0 to lr_min at step total-1.
double cosine_lr(long step, long total, double lr_max = 3e-4, double lr_min = 1e-5);

}  // namespace lee::tensor
