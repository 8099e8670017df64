#include "lee/train/phases.hpp"

#include <stdexcept>

namespace lee::train {

const std::array<LossWeights, 5>& phase_weights() {
  static const std::array<LossWeights, 5> rows = {{
      {1.0, 5.0, 0.001, 0.0, 0.0},
      {1.0, 5.0, 0.001, 2.0, 0.0},
      {1.0, 5.0, 0.001, 2.0, 1.0},
      {0.0, 0.0, 0.001, 5.0, 0.0},
      {1.0, 5.0, 0.001, 2.0, 1.0},
  }};
  return rows;
}

PhasePlan PhasePlan::standard(const std::array<long, 5>& steps) {
  static const char* names[] = {"basic", "align", "refine", "freeze-dec", "unfreeze"};
  PhasePlan plan;
  for (std::size_t i = 0; i < 5; ++i) {
    if (steps[i] < 0) throw std::invalid_argument("phase step counts must be non-negative");
    plan.phases.push_back({names[i], steps[i], phase_weights()[i], i == 3});
  }
  return plan;
}

PhasePlan PhasePlan::full_scale() { return standard({50000, 30000, 50000, 30000, 40000}); }

PhasePlan PhasePlan::desk() { return standard({5000, 3000, 5000, 3000, 4000}); }

long PhasePlan::total_steps() const {
  long n = 0;
  for (const auto& p : phases) n += p.steps;
  return n;
}

std::size_t PhasePlan::phase_at(long step) const {
  if (phases.empty()) throw std::logic_error("empty phase plan");
  long end = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    end += phases[i].steps;
    if (step < end) return i;
  }
  return phases.size() - 1;
}

}  // namespace lee::train
