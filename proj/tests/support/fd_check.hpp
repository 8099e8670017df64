#pragma once

// Central finite-difference oracle for the tape. The loss closure rebuilds
// the graph from the given leaves on every call.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lee/tensor/tensor.hpp"
#include "lee/util/rng.hpp"

namespace lee::testing {

struct GradCheck {
  double max_rel = 0.0;  // worst per-leaf norm-wise relative error
};

inline GradCheck grad_check(std::vector<tensor::Tensor> leaves,
                            const std::function<tensor::Tensor(const std::vector<tensor::Tensor>&)>& loss_fn,
                            double h = 1e-3) {
  for (auto& l : leaves) l.zero_grad();
  tensor::backward(loss_fn(leaves));
  GradCheck out;
  for (auto& leaf : leaves) {
    tensor::Matrix analytic = leaf.has_grad() ? leaf.grad() : tensor::Matrix::Zero(leaf.rows(), leaf.cols());
    tensor::Matrix numeric(leaf.rows(), leaf.cols());
    for (tensor::Index i = 0; i < leaf.size(); ++i) {
      double& x = leaf.mutable_value().data()[i];
      const double saved = x;
      x = saved + h;
      const double up = loss_fn(leaves).item();
      x = saved - h;
      const double down = loss_fn(leaves).item();
      x = saved;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-8});
    out.max_rel = std::max(out.max_rel, (analytic - numeric).norm() / denom);
  }
  return out;
}

inline tensor::Matrix random_matrix(Rng& rng, tensor::Index r, tensor::Index c, double s = 1.0) {
  tensor::Matrix m(r, c);
  for (tensor::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

}  // namespace lee::testing
