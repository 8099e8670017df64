#pragma once

#include <array>
#include <string>
#include <vector>

namespace lee::train {

struct LossWeights {
  double expr = 0.0;
  double eval = 0.0;
  double kl = 0.0;
  double align = 0.0;
  double refine = 0.0;

  bool operator==(const LossWeights&) const = default;
};

struct Phase {
  std::string name;
  long steps = 0;
  LossWeights weights;
  bool freeze_decoders = false;  // only encoder parameters are updated
};

struct PhasePlan {
  std::vector<Phase> phases;

  /// The five-phase table with the given step counts.
  static PhasePlan standard(const std::array<long, 5>& steps);
  /// 50k/30k/50k/30k/40k.
  static PhasePlan full_scale();
  /// 5k/3k/5k/3k/4k.
  static PhasePlan desk();

  long total_steps() const;
  /// Phase index (0-based) active at a global step; the last phase past the end.
  std::size_t phase_at(long step) const;
};

/// Rows of the loss-weight table, phase 1 first.
const std::array<LossWeights, 5>& phase_weights();

}  // namespace lee::train
