#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lee/datagen/scatter.hpp"
#include "lee/model/model.hpp"

namespace lee::train {

using tensor::Index;
using tensor::Tensor;

/// Mean next-token cross-entropy over non-PAD targets. Throws when every
/// target is PAD.
Tensor loss_expr(const model::ExprLogits& logits);

struct EvalLoss {
  Tensor value;
  std::size_t empty_sets = 0;  // items without a single finite target
};

/// Scale-invariant MAE |y_hat - y| / max(|y|, 1), averaged over the finite
/// rows of each item and then over items. `offsets` delimits the packed rows
/// of y_hat (item b owns [offsets[b], offsets[b+1])). An item with no finite
/// row contributes zero and is counted.
EvalLoss loss_eval(const Tensor& y_hat, std::span<const double> y, std::span<const Index> offsets);

/// KL to the standard normal, summed over dimensions, averaged over rows.
Tensor loss_kl(const model::Gaussian& q);

/// KL(q || p) between diagonal Gaussians, summed over dimensions, averaged
/// over rows. p is held constant: no gradient reaches it.
Tensor loss_align(const model::Gaussian& q, const model::Gaussian& p);

/// Clean-sequence cross-entropy after encoding corrupted tokens with the
/// scatter. With `rng` the latent is sampled, otherwise z = mu.
Tensor loss_refine(const model::Model& m, std::span<const expr::TokenSeq> corrupted,
                   std::span<const datagen::ScatterSet* const> scatter, std::span<const expr::TokenSeq> clean,
                   Rng* rng);

}  // namespace lee::train
