#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lee/bench/protocol.hpp"
#include "lee/model/model.hpp"
#include "lee/search/config.hpp"
#include "lee/search/pool.hpp"

namespace lee::search {

enum class Mode { Iterative, Gradient, Combined, OneShot, Cmaes };
/// iter, grad, pg, oneshot, cmaes
std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view name);

class RoundFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConvergenceRecord {
  int iteration = 0;
  double best_score = 0.0;
  double best_r2_train = 0.0;
  std::size_t best_complexity = 0;
};

struct RoundResult {
  bool failed = false;
  std::string diagnostic;
  std::optional<Candidate> winner;
  /// Best validation R^2 in the pool right after the most recent iterative
  /// (non-gradient) step; NaN outside the pool-based modes.
  double iter_champion_val = std::numeric_limits<double>::quiet_NaN();
  bool fallback_applied = false;
  std::vector<ConvergenceRecord> log;
  std::size_t decodes = 0;          // initial, iterative, refresh and baseline decodes
  std::size_t gradient_decodes = 0;  // decodes of gradient-refined latents
  std::size_t unparseable = 0;
  std::size_t refresh_injections = 0;
  std::size_t gradient_segments = 0;
};

/// Adam descent on a latent for
///   sum_i (g_eval(z, x_i) - y_i)^2 + prox * ||z - anchor||^2
/// over the finite rows of `rows`.
class LatentDescent {
 public:
  LatentDescent(const model::Model& m, std::vector<double> anchor, const datagen::ScatterSet& rows, double lr,
                double prox, std::vector<double> start = {});

  /// Objective and gradient at the current point, then one Adam update.
  /// Returns the objective before the update.
  double step();
  double objective() const;
  const std::vector<double>& z() const { return z_; }
  const std::vector<double>& anchor() const { return anchor_; }

 private:
  double evaluate(std::vector<double>* grad) const;

  const model::Model& model_;
  std::vector<double> anchor_, z_, m_, v_;
  datagen::ScatterSet rows_;
  double lr_, prox_;
  long t_ = 0;
};

struct GradientResult {
  std::vector<double> z;
  double objective_start = 0.0;
  double objective_end = 0.0;
  bool reverted = false;
};

/// grad_steps Adam steps from the anchor at rate grad_lr with proximal weight
/// grad_prox. A non-finite objective reverts to the anchor.
GradientResult gradient_refine(const model::Model& m, const std::vector<double>& anchor,
                               const datagen::ScatterSet& rows, const SearchConfig& cfg);

/// One round on fixed folds. round_index is 1-based (it sets the constant
/// fitting budget). Only the train and validation folds are read.
RoundResult run_round(Mode mode, const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                      std::uint64_t seed, int round_index = 1);

RoundResult baseline_oneshot(const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                             std::uint64_t seed, int round_index = 1);
RoundResult baseline_cmaes(const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                           std::uint64_t seed, int round_index = 1);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  Mode mode = Mode::Combined;
  std::optional<Candidate> winner;
  std::optional<double> r2_test;
  std::size_t complexity = 0;
  std::vector<RoundResult> rounds;
  std::size_t failed_rounds = 0;
};

/// Seeds s_t = s_base + 1000 t; split, noise, R rounds, winner by validation
/// R^2, then a single read of the test fold.
TrialResult run_trial(const bench::Dataset& data, double eps, const model::Model& m, const SearchConfig& cfg,
                      Mode mode, int trial, std::uint64_t s_base, const bench::ProtocolConfig& protocol = {},
                      int workers = 1);

}  // namespace lee::search
